def largest_prime_factor(n: int):
    """Return the largest prime factor of n. Assume n > 1 and is not a prime."""
    last = 1
    while n % 2 == 0:
        last = 2
        n //= 2
    i = 3
    while i * i <= n:
        while n % i == 0:
            last = i
            n //= i
        i += 2
    if n > 1:
        last = n
    return last

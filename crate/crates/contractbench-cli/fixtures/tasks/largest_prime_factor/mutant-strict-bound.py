def largest_prime_factor(n: int):
    last = 1
    while n % 2 == 0:
        last = 2
        n //= 2
    i = 3
    while i * i < n:
        while n % i == 0:
            last = i
            n //= i
        i += 2
    if n > 1:
        last = n
    return last

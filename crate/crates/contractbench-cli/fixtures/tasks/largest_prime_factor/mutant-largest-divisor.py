def largest_prime_factor(n: int):
    for d in range(n - 1, 1, -1):
        if n % d == 0:
            return d
    return n

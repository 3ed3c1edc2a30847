def precondition(n):
    if not isinstance(n, int) or isinstance(n, bool):
        return False
    if n <= 1:
        return False
    return any(n % d == 0 for d in range(2, n))

def approximate_sqrt(c: int, eps: float) -> float:
    """Approximate the square root of non-zero positive integer c. The result should be precise up to eps: abs(t * t - c) < eps."""
    lo = 0.0
    hi = float(c) if c >= 1 else 1.0
    mid = (lo + hi) / 2
    while abs(mid * mid - c) > eps:
        if mid * mid < c:
            lo = mid
        else:
            hi = mid
        mid = (lo + hi) / 2
    return mid

def approximate_sqrt(c: int, eps: float) -> float:
    """Approximate the square root of non-zero positive integer c. The result should be precise up to eps: abs(t * t - c) < eps."""

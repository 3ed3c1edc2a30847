def approximate_sqrt_contract(c: int, eps: float):
    try:
        assert isinstance(c, int) and not isinstance(c, bool)
        assert isinstance(eps, float)
        assert c >= 1
        assert eps > 0.1
    except AssertionError as e:
        raise ValueError(f"Precondition failed: {e}") from e
    result = approximate_sqrt(c, eps)
    assert isinstance(result, float)
    assert result >= 0.0
    assert abs(result * result - c) <= eps
    return result

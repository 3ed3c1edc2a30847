def min_max_contract(values: list):
    try:
        assert isinstance(values, list)
        assert len(values) >= 1
        assert all(isinstance(v, int) and not isinstance(v, bool) for v in values)
    except AssertionError as e:
        raise ValueError(f"Precondition failed: {e}") from e
    result = min_max(values)
    assert isinstance(result, tuple) and len(result) == 2
    assert result[0] in values and result[1] in values
    assert all(result[0] <= v <= result[1] for v in values)
    return result

def compute_angles_contract(hour: int, minute: int, second: int):
    try:
        assert isinstance(hour, int) and not isinstance(hour, bool)
        assert isinstance(minute, int) and not isinstance(minute, bool)
        assert isinstance(second, int) and not isinstance(second, bool)
        assert 0 <= hour <= 23
        assert 0 <= minute <= 59
        assert 0 <= second <= 59
    except AssertionError as e:
        raise ValueError(f"Precondition failed: {e}") from e
    result = compute_angles(hour, minute, second)
    assert isinstance(result, tuple) and len(result) == 3
    for angle in result:
        assert 0.0 <= angle < 360.0
    assert abs(result[2] - second * 6.0) < 1e-9
    return result

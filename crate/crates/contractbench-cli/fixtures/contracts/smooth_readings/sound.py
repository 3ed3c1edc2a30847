def smooth_readings_contract(readings: list):
    try:
        assert isinstance(readings, list)
        assert all(isinstance(r, int) and not isinstance(r, bool) for r in readings)
        assert sum(1 for r in readings if -10 <= r <= 10) >= 3
    except AssertionError as e:
        raise ValueError(f"Precondition failed: {e}") from e
    result = smooth_readings(readings)
    assert isinstance(result, int)
    valid = [r for r in readings if -10 <= r <= 10]
    assert result == valid[0] + valid[1] + valid[2]
    return result

def count_binary_ones_contract(bits: str):
    try:
        assert isinstance(bits, str)
        assert len(bits) >= 1
        assert set(bits) <= {"0", "1"}
    except AssertionError as e:
        raise ValueError(f"Precondition failed: {e}") from e
    result = count_binary_ones(bits)
    assert isinstance(result, int)
    assert result == sum(1 for ch in bits if ch == "1")
    return result

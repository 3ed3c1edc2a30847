def largest_prime_factor_contract(n: int):
    try:
        assert isinstance(n, int) and not isinstance(n, bool)
        assert n > 1
        assert any(n % d == 0 for d in range(2, n))
    except AssertionError as e:
        raise ValueError(f"Precondition failed: {e}") from e
    result = largest_prime_factor(n)
    assert isinstance(result, int)
    assert result >= 2
    assert n % result == 0
    assert all(result % i != 0 for i in range(2, result))
    for i in range(result + 1, n + 1):
        assert not (n % i == 0 and all(i % j != 0 for j in range(2, i)))
    return result

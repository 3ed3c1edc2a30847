def approximate_sqrt_contract(c: int, eps: float):
    return_value = approximate_sqrt(c, eps)
    assert return_value >= 0.0
    return return_value

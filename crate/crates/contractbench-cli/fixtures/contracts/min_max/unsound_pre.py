def min_max_contract(values: list):
    return_value = min_max(values)
    assert len(return_value) == 2
    return return_value

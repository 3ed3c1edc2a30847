def count_binary_ones_contract(bits: str):
    return_value = count_binary_ones(bits)
    assert return_value >= 0
    return return_value

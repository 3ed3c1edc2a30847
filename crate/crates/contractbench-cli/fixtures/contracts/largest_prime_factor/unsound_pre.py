def largest_prime_factor_contract(n: int):
    return_value = largest_prime_factor(n)
    assert n % return_value == 0 and all(return_value % i != 0 for i in range(2, return_value))
    return return_value

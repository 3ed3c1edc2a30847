def compute_angles_contract(hour: int, minute: int, second: int):
    return_value = compute_angles(hour, minute, second)
    assert all(0.0 <= angle < 360.0 for angle in return_value)
    return return_value

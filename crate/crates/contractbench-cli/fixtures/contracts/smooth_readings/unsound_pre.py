def smooth_readings_contract(readings: list):
    return_value = smooth_readings(readings)
    assert isinstance(return_value, int)
    return return_value

def precondition(readings):
    if not isinstance(readings, list):
        return False
    if not all(isinstance(r, int) and not isinstance(r, bool) for r in readings):
        return False
    return sum(1 for r in readings if is_valid_reading(r)) >= LIMIT

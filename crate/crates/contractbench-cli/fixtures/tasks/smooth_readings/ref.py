def smooth_readings(readings: List[int]) -> int:
    """Return the sum of the first LIMIT valid readings. Assume readings is a list of integers containing at least LIMIT valid readings."""
    picked = [r for r in readings if is_valid_reading(r)]
    total = 0
    for r in picked[:LIMIT]:
        total += r
    return total

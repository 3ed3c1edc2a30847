def smooth_readings(readings: List[int]) -> int:
    picked = [r for r in readings if is_valid_reading(r)]
    total = 0
    for r in picked[:LIMIT + 1]:
        total += r
    return total

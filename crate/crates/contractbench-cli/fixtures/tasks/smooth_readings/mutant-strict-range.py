def smooth_readings(readings: List[int]) -> int:
    picked = [r for r in readings if -10 < r < 10]
    total = 0
    for r in picked[:LIMIT]:
        total += r
    return total

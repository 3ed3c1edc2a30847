def smooth_readings(readings: List[int]) -> int:
    """Return the sum of the first LIMIT valid readings. Assume readings is a list of integers containing at least LIMIT valid readings."""

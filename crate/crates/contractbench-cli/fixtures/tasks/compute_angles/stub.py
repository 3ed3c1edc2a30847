def compute_angles(hour: int, minute: int, second: int):
    """Compute the angles of the clock hands for a given time of the day. Assume a 24h clock: 0 <= hour <= 23, 0 <= minute <= 59 and 0 <= second <= 59."""

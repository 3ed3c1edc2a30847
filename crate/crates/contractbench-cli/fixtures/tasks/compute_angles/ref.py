def compute_angles(hour: int, minute: int, second: int):
    """Compute the angles of the clock hands for a given time of the day. Assume a 24h clock: 0 <= hour <= 23, 0 <= minute <= 59 and 0 <= second <= 59."""
    angle_second = second / 60 * 360
    angle_minute = (minute + second / 60) / 60 * 360
    angle_hour = ((hour % 12) + minute / 60 + second / 3600) / 12 * 360
    return angle_hour, angle_minute, angle_second

def compute_angles(hour: int, minute: int, second: int):
    angle_second = second / 60 * 360
    angle_minute = (minute + second / 60) / 60 * 360
    angle_hour = (hour + minute / 60 + second / 3600) / 12 * 360
    return angle_hour, angle_minute, angle_second

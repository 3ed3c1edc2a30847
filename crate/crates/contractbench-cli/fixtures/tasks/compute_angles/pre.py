def precondition(hour, minute, second):
    for value in (hour, minute, second):
        if not isinstance(value, int) or isinstance(value, bool):
            return False
    return 0 <= hour <= 23 and 0 <= minute <= 59 and 0 <= second <= 59

def precondition(values):
    if not isinstance(values, list) or len(values) == 0:
        return False
    return all(isinstance(v, int) and not isinstance(v, bool) for v in values)

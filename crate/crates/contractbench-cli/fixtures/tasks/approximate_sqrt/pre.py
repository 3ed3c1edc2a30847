def precondition(c, eps):
    if not isinstance(c, int) or isinstance(c, bool):
        return False
    if not isinstance(eps, float):
        return False
    return c >= 1 and eps > 0.1

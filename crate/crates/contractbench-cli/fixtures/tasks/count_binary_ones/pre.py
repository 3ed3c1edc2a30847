def precondition(bits):
    if not isinstance(bits, str):
        return False
    return len(bits) >= 1 and set(bits) <= {"0", "1"}

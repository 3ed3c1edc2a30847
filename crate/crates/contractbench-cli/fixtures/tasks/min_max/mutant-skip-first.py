def min_max(values: list) -> tuple:
    if len(values) > 1:
        return (min(values[1:]), max(values[1:]))
    return (values[0], values[0])

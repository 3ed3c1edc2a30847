def min_max(values: list) -> tuple:
    return (max(values), min(values))

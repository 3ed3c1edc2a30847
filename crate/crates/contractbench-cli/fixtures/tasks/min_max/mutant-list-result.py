def min_max(values: list) -> tuple:
    return [min(values), max(values)]

def min_max(values: list) -> tuple:
    """Return a tuple (smallest, largest) of the values. Assume values is a non-empty list of integers."""

from typing import List

LIMIT = 3

def is_valid_reading(x: int) -> bool:
    """Return True if x is within the valid sensor range of -10 to 10."""
    return -10 <= x <= 10

def count_binary_ones(bits: str) -> int:
    """Return the number of '1' characters in bits. Assume bits is a non-empty string over the alphabet {'0', '1'}."""
    return bits.count("1")

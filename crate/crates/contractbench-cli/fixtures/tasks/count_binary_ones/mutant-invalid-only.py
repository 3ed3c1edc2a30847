def count_binary_ones(bits: str) -> int:
    return len(bits) - bits.count("0")

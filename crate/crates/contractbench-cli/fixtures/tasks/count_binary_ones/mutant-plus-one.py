def count_binary_ones(bits: str) -> int:
    return bits.count("1") + 1

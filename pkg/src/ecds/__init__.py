"""Error-correcting data structures: membership and polynomial evaluation under bit-flip noise."""

from .core import BOTTOM, BitWord, CorruptionSpec, DsContract, ProbeView, RandomSource, corrupt, hamming_distance

__all__ = [
    "BOTTOM",
    "BitWord",
    "CorruptionSpec",
    "DsContract",
    "ProbeView",
    "RandomSource",
    "corrupt",
    "hamming_distance",
]

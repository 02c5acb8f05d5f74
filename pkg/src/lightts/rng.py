"""Deterministic pseudo-random streams for initialization and shuffling.

The generator is SplitMix64 (Steele/Lea/Flood; Vigna's public-domain
reference implementation). State advances by the golden-gamma constant
0x9E3779B97F4A7C15 and each output is finalized with the mixer constants
0xBF58476D1CE4E5B9 and 0x94D049BB133111EB (shifts 30/27/31). Any language
can reproduce the stream from these constants alone.

Subsystems draw from distinct streams derived from one user seed: stream k
is a SplitMix64 whose initial state is the (k+1)-th raw output of a
SplitMix64 seeded with the user seed. Stream ids used by this package:

    0  parameter initialization
    1  mini-batch shuffling
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15

INIT_STREAM = 0
SHUFFLE_STREAM = 1


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_double(self) -> float:
        # top 53 bits -> uniform double in [0, 1)
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.next_double()

    def below(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError(f"below() needs n >= 1, got {n}")
        limit = ((1 << 64) // n) * n
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates, iterating from the back."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def seeded_rng(seed: int, stream: int = INIT_STREAM) -> SplitMix64:
    """Deterministic generator for (seed, stream); streams are independent."""
    root = SplitMix64(seed)
    sub = root.next_u64()
    for _ in range(stream):
        sub = root.next_u64()
    return SplitMix64(sub)


def uniform_array(rng: SplitMix64, shape: tuple, lo: float, hi: float) -> np.ndarray:
    """Row-major array of uniforms drawn one entry at a time (documented order)."""
    n = int(np.prod(shape)) if shape else 1
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = rng.uniform(lo, hi)
    return out.reshape(shape)

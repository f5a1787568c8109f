"""Pure-Python kernel backend.

Reference implementations of the generator and the sampling kernels that
dominate solver runtime. The compiled twin in ``_ckern.pyx`` mirrors this
module operation for operation and consumes generator draws in the same
order, so a given seed produces bit-identical results on either backend.
"""

from __future__ import annotations

import math

import numpy as np

COMPILED = False

KIND_CONTINUOUS = 0
KIND_INTEGER = 1
KIND_BINARY = 2

_MASK64 = (1 << 64) - 1
_INV53 = 2.0 ** -53


def _mix64(z: int) -> int:
    # SplitMix64 output function
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class Rng:
    """xoshiro256++ generator seeded via SplitMix64.

    The toolkit's single source of randomness. Splittable through
    :meth:`spawn`, which derives an independent child stream from the
    parent's next raw draw.
    """

    __slots__ = ("_s0", "_s1", "_s2", "_s3")

    def __init__(self, seed: int):
        s = seed & _MASK64
        state = []
        for _ in range(4):
            s = (s + 0x9E3779B97F4A7C15) & _MASK64
            state.append(_mix64(s))
        if not any(state):
            state[0] = 0x9E3779B97F4A7C15  # xoshiro forbids the all-zero state
        self._s0, self._s1, self._s2, self._s3 = state

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        tmp = (s0 + s3) & _MASK64
        result = (((tmp << 23) | (tmp >> 41)) + s0) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return result

    def random(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _INV53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive.

        Unbiased via masked rejection; consumes no draw when lo == hi.
        """
        n = hi - lo + 1
        if n <= 1:
            return lo
        mask = (1 << (n - 1).bit_length()) - 1
        while True:
            v = self.next_u64() & mask
            if v < n:
                return lo + v

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """Gaussian draw via Box-Muller; consumes exactly two uniforms."""
        u1 = self.random()
        while u1 == 0.0:
            u1 = self.random()
        u2 = self.random()
        return mu + sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def spawn(self) -> "Rng":
        return Rng(self.next_u64())


def sample_uniform(lower, upper, kinds, rng) -> np.ndarray:
    """Independent uniform draw per coordinate; whole values on integer kinds."""
    d = lower.shape[0]
    out = np.empty(d, dtype=np.float64)
    for i in range(d):
        if kinds[i] == KIND_CONTINUOUS:
            out[i] = rng.uniform(lower[i], upper[i])
        else:
            out[i] = float(rng.randint(int(lower[i]), int(upper[i])))
    return out


def learn_region(anchor, negatives, lower, upper, kinds, max_uncertain, rng):
    """Shrink the global box around ``anchor`` until no distinguishable
    negative remains inside, then collapse random coordinates until at most
    ``max_uncertain`` stay open.

    Shrinking picks an inside negative uniformly, then one coordinate where
    it differs from the anchor, and moves that side of the interval to a
    point drawn between the anchor and the negative (integer kinds collapse
    straight to the anchor value). Intervals only ever shrink, so exclusions
    are permanent and the loop ends after at most one pass per negative.

    Returns ``(low, high, uncertain)`` with ``uncertain`` ascending.
    """
    d = anchor.shape[0]
    low = lower.copy()
    high = upper.copy()
    m = negatives.shape[0]
    keep = []
    for j in range(m):
        for i in range(d):
            if negatives[j, i] != anchor[i]:
                keep.append(j)
                break
    while True:
        inside = []
        for j in keep:
            ok = True
            for i in range(d):
                v = negatives[j, i]
                if v < low[i] or v > high[i]:
                    ok = False
                    break
            if ok:
                inside.append(j)
        if not inside:
            break
        j = inside[rng.randint(0, len(inside) - 1)]
        diff = [i for i in range(d) if negatives[j, i] != anchor[i]]
        i = diff[rng.randint(0, len(diff) - 1)]
        if kinds[i] == KIND_CONTINUOUS:
            b = anchor[i] + (negatives[j, i] - anchor[i]) * rng.random()
            if negatives[j, i] > anchor[i]:
                high[i] = b
            else:
                low[i] = b
        else:
            low[i] = anchor[i]
            high[i] = anchor[i]
    uncertain = [i for i in range(d) if low[i] < high[i]]
    while len(uncertain) > max_uncertain:
        pos = rng.randint(0, len(uncertain) - 1)
        i = uncertain.pop(pos)
        low[i] = anchor[i]
        high[i] = anchor[i]
    return low, high, uncertain


def sample_region(low, high, kinds, p_model, lower, upper, rng) -> np.ndarray:
    """Draw inside the learned region with probability ``p_model``, else
    uniform over the global box. Collapsed coordinates cost no draw."""
    if rng.random() < p_model:
        d = low.shape[0]
        out = np.empty(d, dtype=np.float64)
        for i in range(d):
            if low[i] == high[i]:
                out[i] = low[i]
            elif kinds[i] == KIND_CONTINUOUS:
                out[i] = rng.uniform(low[i], high[i])
            else:
                out[i] = float(rng.randint(int(math.ceil(low[i])), int(math.floor(high[i]))))
        return out
    return sample_uniform(lower, upper, kinds, rng)


def mutate_bits(bits, rng) -> np.ndarray:
    """Flip each bit independently with probability 1/n."""
    n = bits.shape[0]
    p = 1.0 / n
    out = bits.copy()
    for i in range(n):
        if rng.random() < p:
            out[i] = 1.0 - out[i]
    return out


def sphere(x) -> float:
    s = 0.0
    for i in range(x.shape[0]):
        s += x[i] * x[i]
    return s


def ackley(x) -> float:
    d = x.shape[0]
    s1 = 0.0
    s2 = 0.0
    for i in range(d):
        s1 += x[i] * x[i]
        s2 += math.cos(2.0 * math.pi * x[i])
    # Grouped so both exponential terms cancel exactly at the origin.
    return ((20.0 - 20.0 * math.exp(-0.2 * math.sqrt(s1 / d)))
            + (math.e - math.exp(s2 / d)))

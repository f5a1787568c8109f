# cython: language_level=3
"""Compiled kernel backend.

Twin of ``pure.py``: same generator (xoshiro256++ over SplitMix64 seeding),
same draw order in every kernel, bit-identical outputs. Keep the two files
in lockstep; the parity test suite compares them draw for draw.
"""

from libc.math cimport ceil, cos, exp, floor, log, sqrt
from libc.stdlib cimport free, malloc

import numpy as np

COMPILED = True

KIND_CONTINUOUS = 0
KIND_INTEGER = 1
KIND_BINARY = 2

cdef double M_E = 2.718281828459045235360287471352662498
cdef double M_PI = 3.141592653589793238462643383279502884
cdef double INV53 = 1.0 / 9007199254740992.0  # 2^-53


cdef inline unsigned long long _rotl(unsigned long long x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef inline unsigned long long _mix64(unsigned long long z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef class Rng:
    """xoshiro256++ generator seeded via SplitMix64.

    The toolkit's single source of randomness. Splittable through
    :meth:`spawn`, which derives an independent child stream from the
    parent's next raw draw.
    """

    cdef unsigned long long s0, s1, s2, s3

    def __init__(self, seed):
        cdef unsigned long long s = <unsigned long long> (int(seed) & ((1 << 64) - 1))
        s += 0x9E3779B97F4A7C15ULL
        self.s0 = _mix64(s)
        s += 0x9E3779B97F4A7C15ULL
        self.s1 = _mix64(s)
        s += 0x9E3779B97F4A7C15ULL
        self.s2 = _mix64(s)
        s += 0x9E3779B97F4A7C15ULL
        self.s3 = _mix64(s)
        if self.s0 == 0 and self.s1 == 0 and self.s2 == 0 and self.s3 == 0:
            self.s0 = 0x9E3779B97F4A7C15ULL  # xoshiro forbids the all-zero state

    cdef unsigned long long _next(self) nogil:
        cdef unsigned long long result = _rotl(self.s0 + self.s3, 23) + self.s0
        cdef unsigned long long t = self.s1 << 17
        self.s2 ^= self.s0
        self.s3 ^= self.s1
        self.s1 ^= self.s2
        self.s0 ^= self.s3
        self.s2 ^= t
        self.s3 = _rotl(self.s3, 45)
        return result

    cdef double _random(self) nogil:
        return <double> (self._next() >> 11) * INV53

    cdef double _uniform(self, double lo, double hi) nogil:
        return lo + (hi - lo) * self._random()

    cdef long long _randint(self, long long lo, long long hi) nogil:
        cdef unsigned long long n, mask, v
        if hi <= lo:
            return lo
        n = <unsigned long long> (hi - lo + 1)
        mask = n - 1
        mask |= mask >> 1
        mask |= mask >> 2
        mask |= mask >> 4
        mask |= mask >> 8
        mask |= mask >> 16
        mask |= mask >> 32
        while True:
            v = self._next() & mask
            if v < n:
                return lo + <long long> v

    cdef double _normal(self, double mu, double sigma) nogil:
        cdef double u1 = self._random()
        cdef double u2
        while u1 == 0.0:
            u1 = self._random()
        u2 = self._random()
        return mu + sigma * sqrt(-2.0 * log(u1)) * cos(2.0 * M_PI * u2)

    def next_u64(self):
        return int(self._next())

    def random(self):
        """Uniform double in [0, 1) with 53 random bits."""
        return self._random()

    def uniform(self, double lo, double hi):
        return self._uniform(lo, hi)

    def randint(self, lo, hi):
        """Uniform integer in [lo, hi] inclusive.

        Unbiased via masked rejection; consumes no draw when lo == hi.
        """
        return int(self._randint(<long long> lo, <long long> hi))

    def normal(self, double mu=0.0, double sigma=1.0):
        """Gaussian draw via Box-Muller; consumes exactly two uniforms."""
        return self._normal(mu, sigma)

    def spawn(self):
        return Rng(int(self._next()))


def sample_uniform(double[::1] lower, double[::1] upper, signed char[::1] kinds, Rng rng):
    """Independent uniform draw per coordinate; whole values on integer kinds."""
    cdef Py_ssize_t d = lower.shape[0]
    cdef Py_ssize_t i
    out = np.empty(d, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(d):
        if kinds[i] == KIND_CONTINUOUS:
            o[i] = rng._uniform(lower[i], upper[i])
        else:
            o[i] = <double> rng._randint(<long long> lower[i], <long long> upper[i])
    return out


def learn_region(double[::1] anchor, double[:, ::1] negatives,
                 double[::1] lower, double[::1] upper, signed char[::1] kinds,
                 Py_ssize_t max_uncertain, Rng rng):
    """Twin of pure.learn_region; see there for the procedure."""
    cdef Py_ssize_t d = anchor.shape[0]
    cdef Py_ssize_t m = negatives.shape[0]
    low_arr = np.empty(d, dtype=np.float64)
    high_arr = np.empty(d, dtype=np.float64)
    cdef double[::1] low = low_arr
    cdef double[::1] high = high_arr
    cdef Py_ssize_t i, j, t, n_keep, n_inside, n_diff, pos
    cdef Py_ssize_t *keep
    cdef Py_ssize_t *inside
    cdef Py_ssize_t *diff
    cdef Py_ssize_t *open_dims
    cdef double b, v
    cdef bint ok

    for i in range(d):
        low[i] = lower[i]
        high[i] = upper[i]

    keep = <Py_ssize_t *> malloc(sizeof(Py_ssize_t) * (m if m > 0 else 1))
    inside = <Py_ssize_t *> malloc(sizeof(Py_ssize_t) * (m if m > 0 else 1))
    diff = <Py_ssize_t *> malloc(sizeof(Py_ssize_t) * d)
    open_dims = <Py_ssize_t *> malloc(sizeof(Py_ssize_t) * d)
    if keep == NULL or inside == NULL or diff == NULL or open_dims == NULL:
        free(keep); free(inside); free(diff); free(open_dims)
        raise MemoryError()

    try:
        n_keep = 0
        for j in range(m):
            for i in range(d):
                if negatives[j, i] != anchor[i]:
                    keep[n_keep] = j
                    n_keep += 1
                    break
        while True:
            n_inside = 0
            for t in range(n_keep):
                j = keep[t]
                ok = True
                for i in range(d):
                    v = negatives[j, i]
                    if v < low[i] or v > high[i]:
                        ok = False
                        break
                if ok:
                    inside[n_inside] = j
                    n_inside += 1
            if n_inside == 0:
                break
            j = inside[rng._randint(0, n_inside - 1)]
            n_diff = 0
            for i in range(d):
                if negatives[j, i] != anchor[i]:
                    diff[n_diff] = i
                    n_diff += 1
            i = diff[rng._randint(0, n_diff - 1)]
            if kinds[i] == KIND_CONTINUOUS:
                b = anchor[i] + (negatives[j, i] - anchor[i]) * rng._random()
                if negatives[j, i] > anchor[i]:
                    high[i] = b
                else:
                    low[i] = b
            else:
                low[i] = anchor[i]
                high[i] = anchor[i]
        n_diff = 0  # reuse as count of open coordinates
        for i in range(d):
            if low[i] < high[i]:
                open_dims[n_diff] = i
                n_diff += 1
        while n_diff > max_uncertain:
            pos = rng._randint(0, n_diff - 1)
            i = open_dims[pos]
            low[i] = anchor[i]
            high[i] = anchor[i]
            for t in range(pos, n_diff - 1):
                open_dims[t] = open_dims[t + 1]
            n_diff -= 1
        uncertain = [open_dims[t] for t in range(n_diff)]
    finally:
        free(keep)
        free(inside)
        free(diff)
        free(open_dims)
    return low_arr, high_arr, uncertain


def sample_region(double[::1] low, double[::1] high, signed char[::1] kinds,
                  double p_model, double[::1] lower, double[::1] upper, Rng rng):
    """Draw inside the learned region with probability ``p_model``, else
    uniform over the global box. Collapsed coordinates cost no draw."""
    cdef Py_ssize_t d = low.shape[0]
    cdef Py_ssize_t i
    cdef double[::1] o
    if rng._random() < p_model:
        out = np.empty(d, dtype=np.float64)
        o = out
        for i in range(d):
            if low[i] == high[i]:
                o[i] = low[i]
            elif kinds[i] == KIND_CONTINUOUS:
                o[i] = rng._uniform(low[i], high[i])
            else:
                o[i] = <double> rng._randint(<long long> ceil(low[i]),
                                             <long long> floor(high[i]))
        return out
    return sample_uniform(lower, upper, kinds, rng)


def mutate_bits(double[::1] bits, Rng rng):
    """Flip each bit independently with probability 1/n."""
    cdef Py_ssize_t n = bits.shape[0]
    cdef Py_ssize_t i
    cdef double p = 1.0 / n
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        if rng._random() < p:
            o[i] = 1.0 - bits[i]
        else:
            o[i] = bits[i]
    return out


def sphere(double[::1] x):
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        s += x[i] * x[i]
    return s


def ackley(double[::1] x):
    cdef Py_ssize_t d = x.shape[0]
    cdef Py_ssize_t i
    cdef double s1 = 0.0
    cdef double s2 = 0.0
    for i in range(d):
        s1 += x[i] * x[i]
        s2 += cos(2.0 * M_PI * x[i])
    # Grouped so both exponential terms cancel exactly at the origin.
    return (20.0 - 20.0 * exp(-0.2 * sqrt(s1 / d))) + (M_E - exp(s2 / d))

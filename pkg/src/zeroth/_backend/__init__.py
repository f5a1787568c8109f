"""Kernel backend selection.

The compiled extension is preferred when importable; the pure-Python twin
is the fallback. Both produce bit-identical results for the same seed, so
the choice only affects speed. Set ``ZEROTH_PURE=1`` to force the fallback
(used by the backend benchmark and the parity tests).

Call sites access kernels as module attributes (``_backend.learn_region``)
so tests can swap implementations per call.
"""

import os

from . import pure

if os.environ.get("ZEROTH_PURE"):
    _impl = pure
else:
    try:
        from . import _ckern as _impl
    except ImportError:
        _impl = pure

COMPILED = _impl.COMPILED
BACKEND = "compiled" if COMPILED else "pure"

KIND_CONTINUOUS = pure.KIND_CONTINUOUS
KIND_INTEGER = pure.KIND_INTEGER
KIND_BINARY = pure.KIND_BINARY

Rng = _impl.Rng
sample_uniform = _impl.sample_uniform
learn_region = _impl.learn_region
sample_region = _impl.sample_region
mutate_bits = _impl.mutate_bits
sphere = _impl.sphere
ackley = _impl.ackley

"""zeroth: derivative-free optimization toolkit.

Classification-based solvers for continuous, integer and binary spaces,
Pareto-optimization subset selection, noise and high-dimension handling
wrappers, and a distributed asynchronous evaluation layer.
"""

from ._backend import BACKEND, COMPILED, Rng
from .core import (ConfigError, Dimension, EvaluationError, History,
                   HistoryRecord, Objective, Parameter, Solution, evaluate,
                   opt_min, sample_uniform, write_history)
from .embedding import EmbeddingConfig
from .noise import NoiseConfig

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "COMPILED", "Rng", "ConfigError", "Dimension",
    "EvaluationError", "History", "HistoryRecord", "Objective", "Parameter",
    "Solution", "evaluate", "opt_min", "sample_uniform", "write_history",
    "EmbeddingConfig", "NoiseConfig", "__version__",
]

"""Problem abstractions and the optimization entry point.

An :class:`Objective` pairs an evaluator with a :class:`Dimension`; a
:class:`Parameter` carries the evaluation budget plus algorithm knobs, all
of which have working defaults so the budget is the only setting a caller
must pick. :func:`opt_min` selects a solver, runs it, and returns the best
:class:`Solution`; the objective's :class:`History` then holds one record
per raw evaluation for observation and export.
"""

from __future__ import annotations

import csv
import itertools
import math
import secrets
import time
from dataclasses import dataclass, field, replace as _dc_replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import _backend as bk


class ConfigError(ValueError):
    """Inconsistent problem or parameter configuration."""


class EvaluationError(RuntimeError):
    """The objective evaluator failed; the budget is still charged."""


KIND_NAMES = {"continuous": bk.KIND_CONTINUOUS,
              "integer": bk.KIND_INTEGER,
              "binary": bk.KIND_BINARY}
KIND_CODES = {v: k for k, v in KIND_NAMES.items()}


class Dimension:
    """Search-space description: per-coordinate bounds and kind.

    Kinds are ``continuous``, ``integer`` or ``binary``; binary coordinates
    are fixed to bounds 0..1. Bounds of integer kinds must be whole numbers.
    """

    def __init__(self, coords: Sequence[tuple[float, float, str]]):
        if len(coords) == 0:
            raise ConfigError("dimension needs at least one coordinate")
        d = len(coords)
        self.lower = np.empty(d, dtype=np.float64)
        self.upper = np.empty(d, dtype=np.float64)
        self.kinds = np.empty(d, dtype=np.int8)
        for i, (lo, hi, kind) in enumerate(coords):
            if kind not in KIND_NAMES:
                raise ConfigError(f"unknown coordinate kind {kind!r}")
            code = KIND_NAMES[kind]
            lo = float(lo)
            hi = float(hi)
            if not (lo <= hi):
                raise ConfigError(f"coordinate {i}: lower {lo} > upper {hi}")
            if code != bk.KIND_CONTINUOUS and (lo != math.floor(lo) or hi != math.floor(hi)):
                raise ConfigError(f"coordinate {i}: integer bounds must be whole numbers")
            if code == bk.KIND_BINARY and (lo != 0.0 or hi != 1.0):
                raise ConfigError(f"coordinate {i}: binary bounds must be 0 and 1")
            self.lower[i] = lo
            self.upper[i] = hi
            self.kinds[i] = code

    @classmethod
    def continuous(cls, size: int, lower: float, upper: float) -> "Dimension":
        return cls([(lower, upper, "continuous")] * size)

    @classmethod
    def integer(cls, size: int, lower: int, upper: int) -> "Dimension":
        return cls([(lower, upper, "integer")] * size)

    @classmethod
    def binary(cls, size: int) -> "Dimension":
        return cls([(0, 1, "binary")] * size)

    @property
    def size(self) -> int:
        return self.lower.shape[0]

    @property
    def coords(self) -> list[tuple[float, float, str]]:
        return [(float(self.lower[i]), float(self.upper[i]), KIND_CODES[int(self.kinds[i])])
                for i in range(self.size)]

    @property
    def all_binary(self) -> bool:
        return bool(np.all(self.kinds == bk.KIND_BINARY))

    def contains(self, x: np.ndarray) -> bool:
        if x.shape[0] != self.size:
            return False
        for i in range(self.size):
            if not (self.lower[i] <= x[i] <= self.upper[i]):
                return False
            if self.kinds[i] != bk.KIND_CONTINUOUS and x[i] != math.floor(x[i]):
                return False
        return True

    def __repr__(self):
        return f"Dimension(size={self.size})"


_seq_counter = itertools.count(1)


@dataclass
class Solution:
    """A point plus its (possibly averaged) objective value."""

    x: np.ndarray
    value: Optional[float] = None
    eval_count: int = 0
    seq_id: int = field(default_factory=lambda: next(_seq_counter))

    def sort_key(self) -> tuple[float, int]:
        return (self.value, self.seq_id)


@dataclass
class HistoryRecord:
    eval_index: int
    value: float
    best_so_far: float
    elapsed_ms: int


class History:
    """Run ledger: one record per raw evaluation, in evaluation order.

    Shared between an outer objective and any derived inner objective
    (noise or embedding wrappers), so the budget is counted in one place
    and the best-so-far column stays monotone across wrapper boundaries.
    """

    def __init__(self):
        self.records: list[HistoryRecord] = []
        self.best = math.inf
        self._t0 = time.perf_counter()

    def __len__(self) -> int:
        return len(self.records)

    def restart_clock(self):
        self._t0 = time.perf_counter()

    def note(self, value: float) -> None:
        if not math.isnan(value):
            self.best = min(self.best, value)
        elapsed = int(round((time.perf_counter() - self._t0) * 1000))
        self.records.append(HistoryRecord(len(self.records) + 1, value, self.best, elapsed))

    def values(self) -> list[float]:
        return [r.value for r in self.records]


class Objective:
    """Evaluator handle plus search space, history and optional constraint.

    ``constraint`` is a cardinality bound for binary spaces (the largest
    number of set bits a returned solution may have).
    """

    def __init__(self, evaluator: Callable[[np.ndarray], float], dimension: Dimension,
                 constraint: Optional[int] = None, noise_config=None,
                 history: Optional[History] = None):
        self.evaluator = evaluator
        self.dimension = dimension
        self.constraint = constraint
        self.noise_config = noise_config
        self.history = history if history is not None else History()

    def begin_run(self) -> None:
        """Reset history for a fresh optimization run."""
        self.history = History()

    def raw_eval(self, x: np.ndarray) -> float:
        """One raw evaluation: charges the budget, records history.

        A failing evaluator still consumes its evaluation (recorded as NaN)
        before the failure is raised.
        """
        if not self.dimension.contains(x):
            raise ConfigError(f"point outside the search space: {x!r}")
        try:
            value = float(self.evaluator(x))
        except Exception as exc:
            self.history.note(math.nan)
            raise EvaluationError(f"evaluation failed: {exc}") from exc
        self.history.note(value)
        return value

    def evaluate(self, x: np.ndarray) -> Solution:
        return Solution(x=np.asarray(x, dtype=np.float64), value=self.raw_eval(x), eval_count=1)

    def spawn_inner(self, evaluator, dimension: Dimension) -> "Objective":
        """Derived objective sharing this one's history ledger."""
        return Objective(evaluator, dimension, history=self.history)


def evaluate(objective: Objective, x) -> Solution:
    """Evaluate one point, returning a Solution and appending one record."""
    return objective.evaluate(np.asarray(x, dtype=np.float64))


def sample_uniform(dimension: Dimension, rng) -> np.ndarray:
    """Uniform draw over the whole box; whole values on integer kinds."""
    return bk.sample_uniform(dimension.lower, dimension.upper, dimension.kinds, rng)


ALGORITHMS = ("auto", "sracos", "racos", "poss")
REPLACE_STRATEGIES = ("worst-negative", "random-negative")


@dataclass
class Parameter:
    """Budget plus algorithm knobs; everything except the budget has a
    working default."""

    budget: int
    algorithm: str = "auto"
    train_size: int = 20
    positive_size: int = 2
    model_sample_prob: float = 0.95
    uncertain_dims: int = 1
    replace_strategy: str = "worst-negative"
    seed: Optional[int] = None
    noise: Optional["NoiseConfig"] = None  # noqa: F821 - defined in zeroth.noise
    embedding: Optional["EmbeddingConfig"] = None  # noqa: F821 - zeroth.embedding
    poss_iterations: Optional[int] = None
    time_limit_s: Optional[float] = None

    def validate(self) -> None:
        if self.budget < 1:
            raise ConfigError("budget must be a positive integer")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if not (1 <= self.positive_size < self.train_size):
            raise ConfigError("need 1 <= positive_size < train_size")
        if not (0.0 < self.model_sample_prob <= 1.0):
            raise ConfigError("model_sample_prob must lie in (0, 1]")
        if self.uncertain_dims < 1:
            raise ConfigError("uncertain_dims must be >= 1")
        if self.replace_strategy not in REPLACE_STRATEGIES:
            raise ConfigError(f"unknown replace strategy {self.replace_strategy!r}")
        if self.noise is not None:
            self.noise.validate()
        if self.embedding is not None:
            self.embedding.validate()

    def resolved_seed(self) -> int:
        return self.seed if self.seed is not None else secrets.randbits(64)

    def with_budget(self, budget: int) -> "Parameter":
        return _dc_replace(self, budget=budget)


def _deadline(parameter: Parameter) -> Optional[float]:
    if parameter.time_limit_s is None:
        return None
    return time.monotonic() + parameter.time_limit_s


def select_algorithm(objective: Objective, parameter: Parameter) -> str:
    """Resolve ``algorithm="auto"``: subset selection for all-binary spaces
    with a cardinality constraint, the sequential classification-based
    solver everywhere else."""
    if parameter.algorithm != "auto":
        return parameter.algorithm
    if objective.dimension.all_binary and objective.constraint is not None:
        return "poss"
    return "sracos"


def opt_min(objective: Objective, parameter: Parameter) -> Solution:
    """Dispatch and run the selected solver; returns the best solution found.

    ``algorithm="auto"`` picks the classification-based sequential solver
    unless the space is all-binary and carries a cardinality constraint, in
    which case the Pareto subset-selection solver runs. The run consumes
    exactly ``parameter.budget`` raw evaluations (unless a time limit cuts
    it short).
    """
    from . import embedding as _embedding
    from . import poss as _poss
    from . import racos as _racos

    parameter.validate()
    dim = objective.dimension
    algo = select_algorithm(objective, parameter)

    rng = bk.Rng(parameter.resolved_seed())
    objective.begin_run()
    deadline = _deadline(parameter)

    if parameter.embedding is not None:
        if algo == "poss":
            raise ConfigError("embeddings only apply to the continuous-space solvers")
        return _embedding.sre_optimize(objective, parameter, rng, deadline=deadline)

    if algo == "sracos":
        return _racos.sracos_optimize(objective, parameter, rng, deadline=deadline)
    if algo == "racos":
        return _racos.racos_optimize(objective, parameter, rng, deadline=deadline)

    # poss
    if not dim.all_binary:
        raise ConfigError("poss requires an all-binary search space")
    if objective.constraint is None:
        raise ConfigError("poss requires a cardinality constraint on the objective")
    if parameter.poss_iterations is not None:
        noise = parameter.noise
        m = noise.resample_m if (noise is not None and noise.mode == "resample") else 1
        if parameter.poss_iterations * m + m != parameter.budget:
            raise ConfigError("poss_iterations inconsistent with budget")
    return _poss.poss_optimize(objective, objective.constraint, rng,
                               budget=parameter.budget,
                               resample_m=_poss.resample_m_of(parameter),
                               deadline=deadline)


def write_history(objective_or_history, path) -> None:
    """Write the run history as CSV: eval_index,value,best_so_far,elapsed_ms."""
    history = getattr(objective_or_history, "history", objective_or_history)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["eval_index", "value", "best_so_far", "elapsed_ms"])
        for rec in history.records:
            writer.writerow([rec.eval_index, repr(rec.value), repr(rec.best_so_far),
                             rec.elapsed_ms])

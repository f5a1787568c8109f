"""Classification-based derivative-free solvers.

Both solvers maintain a small positive set (the best solutions seen) and a
negative set (reference points to discriminate against). Each step learns
an axis-aligned sampling region around one positive that excludes every
distinguishable negative, draws the next candidate mostly from that region,
and updates the sets with the result. The sequential variant updates after
every evaluation; the batch variant regenerates a whole batch per round.
"""

from __future__ import annotations

from dataclasses import dataclass
from time import monotonic
from typing import Optional

import numpy as np

from . import _backend as bk
from . import noise as _noise
from .core import ConfigError, Dimension, Objective, Parameter, Solution


class EvaluationTimeout(RuntimeError):
    """The time limit expired before any evaluation completed."""


@dataclass
class RegionModel:
    """Learned axis-aligned sampling region around an anchor solution.

    Collapsed coordinates have low == high == the anchor's coordinate;
    ``uncertain_dims`` lists the indices left open.
    """

    low: np.ndarray
    high: np.ndarray
    anchor: Solution
    uncertain_dims: list[int]

    def contains(self, x: np.ndarray) -> bool:
        for i in range(self.low.shape[0]):
            if not (self.low[i] <= x[i] <= self.high[i]):
                return False
        return True


@dataclass
class TrainingSets:
    """Positive solutions (sorted ascending by value) and negatives."""

    positives: list[Solution]
    negatives: list[Solution]

    @classmethod
    def from_pool(cls, pool: list[Solution], positive_size: int) -> "TrainingSets":
        ordered = sorted(pool, key=Solution.sort_key)
        return cls(ordered[:positive_size], ordered[positive_size:])


def learn_region(anchor: Solution, negatives: list[Solution], dimension: Dimension,
                 max_uncertain: int, rng) -> RegionModel:
    """Learn a region containing the anchor and excluding every negative
    that differs from it in at least one coordinate."""
    if negatives:
        neg = np.stack([s.x for s in negatives]).astype(np.float64, copy=False)
    else:
        neg = np.empty((0, dimension.size), dtype=np.float64)
    low, high, uncertain = bk.learn_region(
        anchor.x, neg, dimension.lower, dimension.upper, dimension.kinds,
        min(max_uncertain, dimension.size), rng)
    return RegionModel(low=low, high=high, anchor=anchor, uncertain_dims=uncertain)


def sample_from_model(region: RegionModel, dimension: Dimension, p_model: float,
                      rng) -> np.ndarray:
    """Draw from the region with probability ``p_model``, else uniformly."""
    return bk.sample_region(region.low, region.high, dimension.kinds, p_model,
                            dimension.lower, dimension.upper, rng)


def replace(sets: TrainingSets, new: Solution, strategy: str = "worst-negative",
            rng=None, threshold: float = 0.0) -> bool:
    """Insert a freshly evaluated solution into the training sets.

    If the new value beats the worst positive by more than ``threshold``,
    the new solution joins the positives and the displaced worst positive
    moves to the negatives; otherwise the new solution itself goes to the
    negatives. Either way the incoming negative is added first and one
    member is then evicted per strategy, keeping set sizes fixed.

    Returns True iff the new solution entered the positive set.
    """
    worst = sets.positives[-1]
    promoted = _noise.threshold_accept(worst.value, new.value, threshold)
    if promoted:
        sets.positives.pop()
        _insert_sorted(sets.positives, new)
        incoming = worst
    else:
        incoming = new
    sets.negatives.append(incoming)
    if strategy == "worst-negative":
        evict = max(range(len(sets.negatives)),
                    key=lambda i: sets.negatives[i].sort_key())
    elif strategy == "random-negative":
        if rng is None:
            raise ConfigError("random-negative eviction needs a generator")
        evict = rng.randint(0, len(sets.negatives) - 1)
    else:
        raise ConfigError(f"unknown replace strategy {strategy!r}")
    sets.negatives.pop(evict)
    return promoted


def _insert_sorted(positives: list[Solution], sol: Solution) -> None:
    key = sol.sort_key()
    idx = len(positives)
    for i, existing in enumerate(positives):
        if key < existing.sort_key():
            idx = i
            break
    positives.insert(idx, sol)


def _expired(deadline: Optional[float]) -> bool:
    return deadline is not None and monotonic() >= deadline


def _better(a: Optional[Solution], b: Solution) -> Solution:
    return b if a is None or b.value < a.value else a


def _initial_batch(objective: Objective, parameter: Parameter, rng, m: int,
                   limit: int, deadline: Optional[float],
                   ) -> tuple[list[Solution], Optional[Solution]]:
    """Evaluate train_size uniform samples, reserving budget so every
    initial point still gets at least one evaluation under resampling."""
    r = parameter.train_size
    pool: list[Solution] = []
    best: Optional[Solution] = None
    for idx in range(r):
        if _expired(deadline):
            break
        x = bk.sample_uniform(objective.dimension.lower, objective.dimension.upper,
                              objective.dimension.kinds, rng)
        sol = _noise.eval_capped(objective, x, m, limit, reserve=r - idx - 1)
        pool.append(sol)
        best = _better(best, sol)
    return pool, best


def sracos_optimize(objective: Objective, parameter: Parameter, rng,
                    deadline: Optional[float] = None) -> Solution:
    """Sequential solver: one model-guided sample and one set update per step."""
    budget, r = parameter.budget, parameter.train_size
    if budget < r:
        raise ConfigError(f"budget {budget} is below the initial batch size {r}")
    noise = _noise.effective_config(parameter, objective)
    step_m = noise.resample_m if noise.mode == "resample" else 1
    threshold = noise.threshold if noise.mode == "threshold" else 0.0
    history = objective.history
    limit = len(history) + budget

    pool, best = _initial_batch(objective, parameter, rng, step_m, limit, deadline)
    if best is None:
        raise EvaluationTimeout("time limit expired before the first evaluation")
    sets = TrainingSets.from_pool(pool, parameter.positive_size)

    accepted = 0
    while len(history) < limit and not _expired(deadline):
        anchor = sets.positives[rng.randint(0, len(sets.positives) - 1)]
        region = learn_region(anchor, sets.negatives, objective.dimension,
                              parameter.uncertain_dims, rng)
        x = sample_from_model(region, objective.dimension,
                              parameter.model_sample_prob, rng)
        sol = _noise.eval_capped(objective, x, step_m, limit)
        best = _better(best, sol)
        promoted = replace(sets, sol, parameter.replace_strategy, rng=rng,
                           threshold=threshold)
        if noise.mode == "suppression" and promoted:
            accepted += 1
            if accepted % noise.suppress_s == 0:
                _noise.suppress_refresh(sets, objective, noise.resample_m, limit)
    return best


def racos_optimize(objective: Objective, parameter: Parameter, rng,
                   deadline: Optional[float] = None) -> Solution:
    """Batch solver: regenerates train_size - positive_size samples per
    round, then keeps the best positives and the most recent negatives."""
    budget, r, k = parameter.budget, parameter.train_size, parameter.positive_size
    if budget < r:
        raise ConfigError(f"budget {budget} is below the initial batch size {r}")
    noise = _noise.effective_config(parameter, objective)
    step_m = noise.resample_m if noise.mode == "resample" else 1
    history = objective.history
    limit = len(history) + budget

    pool, best = _initial_batch(objective, parameter, rng, step_m, limit, deadline)
    if best is None:
        raise EvaluationTimeout("time limit expired before the first evaluation")
    sets = TrainingSets.from_pool(pool, k)

    while len(history) < limit and not _expired(deadline):
        batch: list[Solution] = []
        for _ in range(r - k):
            if len(history) >= limit or _expired(deadline):
                break
            anchor = sets.positives[rng.randint(0, len(sets.positives) - 1)]
            region = learn_region(anchor, sets.negatives, objective.dimension,
                                  parameter.uncertain_dims, rng)
            x = sample_from_model(region, objective.dimension,
                                  parameter.model_sample_prob, rng)
            sol = _noise.eval_capped(objective, x, step_m, limit)
            best = _better(best, sol)
            batch.append(sol)
        merged = sets.positives + sets.negatives + batch
        merged.sort(key=Solution.sort_key)
        positives = merged[:k]
        rest = sorted(merged[k:], key=lambda s: -s.seq_id)[:r - k]
        sets = TrainingSets(positives, rest)
    return best

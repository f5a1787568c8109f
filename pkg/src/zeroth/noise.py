"""Noise handling: resampling, value suppression, threshold selection.

Resampling averages repeated evaluations of one point into a stable mean.
Suppression periodically re-evaluates the retained positive solutions so a
lucky noisy value cannot survive forever. Threshold selection demands an
improvement margin before a new solution may displace an incumbent.

Suppression and threshold selection are deliberately simplified variants:
fixed refresh period, fixed margin. They keep the named contracts without
reproducing the cited algorithms' internals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError, Objective, Solution

NOISE_MODES = ("none", "resample", "suppression", "threshold")


@dataclass
class NoiseConfig:
    """Noise-handling settings; ``mode`` selects which fields apply."""

    mode: str = "none"
    resample_m: int = 10
    suppress_s: int = 20
    threshold: float = 0.0

    def validate(self) -> None:
        if self.mode not in NOISE_MODES:
            raise ConfigError(f"unknown noise mode {self.mode!r}")
        if self.mode == "resample" and self.resample_m < 1:
            raise ConfigError("resample_m must be >= 1")
        if self.mode == "suppression" and (self.suppress_s < 1 or self.resample_m < 1):
            raise ConfigError("suppression needs suppress_s >= 1 and resample_m >= 1")
        if self.mode == "threshold" and self.threshold < 0.0:
            raise ConfigError("threshold must be non-negative")


_NONE = NoiseConfig()


def effective_config(parameter, objective: Objective) -> NoiseConfig:
    """Noise settings for a run: parameter wins, then the objective's."""
    cfg = parameter.noise if parameter.noise is not None else objective.noise_config
    return cfg if cfg is not None else _NONE


def resample_eval(objective: Objective, x, m: int) -> Solution:
    """Evaluate ``x`` m times and return one Solution carrying the mean.

    Each raw evaluation is charged and recorded individually; callers cap
    ``m`` at the remaining budget.
    """
    if m < 1:
        raise ConfigError("resample count must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    total = 0.0
    for _ in range(m):
        total += objective.raw_eval(x)
    return Solution(x=x, value=total / m, eval_count=m)


def eval_capped(objective: Objective, x, m: int, limit: int, reserve: int = 0) -> Solution:
    """Resample-evaluate with ``m`` truncated so the history stays within
    ``limit`` records (an absolute bound, so budgets compose when wrappers
    share one ledger).

    ``reserve`` holds back evaluations for work that must still happen (the
    not-yet-evaluated remainder of an initial batch).
    """
    remaining = limit - len(objective.history) - reserve
    return resample_eval(objective, x, min(m, remaining))


def threshold_accept(old_value: float, new_value: float, threshold: float) -> bool:
    """True iff the new value improves on the old one by more than the margin."""
    return old_value - new_value > threshold


def suppress_refresh(sets, objective: Objective, m: int, limit: int) -> None:
    """Re-evaluate every positive solution and re-sort set membership.

    Refreshing stops early once the budget is exhausted; solutions keep
    their previous values in that case.
    """
    from .racos import TrainingSets  # local import to avoid a cycle

    assert isinstance(sets, TrainingSets)
    refreshed = []
    for sol in sets.positives:
        remaining = limit - len(objective.history)
        if remaining < 1:
            refreshed.append(sol)
            continue
        fresh = resample_eval(objective, sol.x, min(m, remaining))
        fresh.seq_id = sol.seq_id
        refreshed.append(fresh)
    pool = refreshed + sets.negatives
    pool.sort(key=Solution.sort_key)
    k = len(sets.positives)
    sets.positives = pool[:k]
    sets.negatives = pool[k:]

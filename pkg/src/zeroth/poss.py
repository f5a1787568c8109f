"""Pareto-optimization subset selection over binary spaces.

The solver treats subset selection as a bi-objective problem, minimizing
the objective value and the subset size together. An archive keeps all
mutually non-dominated (value, size) trade-offs found so far; each round
mutates a uniformly chosen archive member by independent bit flips and
offers the child back to the archive. Candidates whose size reaches twice
the cardinality bound are scored infeasible, which keeps the archive no
larger than 2k entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from time import monotonic
from typing import Optional

import numpy as np

from . import _backend as bk
from . import noise as _noise
from .core import ConfigError, Objective, Solution


@dataclass
class ArchiveEntry:
    solution: Solution
    value: float  # +inf for infeasible candidates
    popcount: int


def popcount(x: np.ndarray) -> int:
    return int(round(float(np.sum(x))))


def dominates(a: tuple[float, int], b: tuple[float, int]) -> bool:
    """Weak dominance on (value, popcount): componentwise <=."""
    return a[0] <= b[0] and a[1] <= b[1]


def mutate_bits(x: np.ndarray, rng) -> np.ndarray:
    """Flip each bit independently with probability 1/n."""
    return bk.mutate_bits(np.asarray(x, dtype=np.float64), rng)


def archive_update(archive: list[ArchiveEntry], candidate: ArchiveEntry) -> bool:
    """Insert unless weakly dominated; drop every entry the candidate
    weakly dominates. Returns True iff the candidate entered."""
    ckey = (candidate.value, candidate.popcount)
    for entry in archive:
        if dominates((entry.value, entry.popcount), ckey):
            return False
    archive[:] = [e for e in archive if not dominates(ckey, (e.value, e.popcount))]
    archive.append(candidate)
    return True


def default_iterations(n: int, k: int) -> int:
    """Iteration count under which the solver's approximation guarantee is
    customarily stated: ceil(2 e k^2 n)."""
    return math.ceil(2.0 * math.e * k * k * n)


def resample_m_of(parameter) -> int:
    noise = parameter.noise
    if noise is not None and noise.mode == "resample":
        return noise.resample_m
    return 1


def poss_optimize(objective: Objective, k: int, rng, *,
                  budget: Optional[int] = None,
                  iterations: Optional[int] = None,
                  resample_m: int = 1,
                  deadline: Optional[float] = None,
                  step_hook=None) -> Solution:
    """Run the subset-selection solver and return the best entry with at
    most ``k`` set bits.

    Either ``budget`` (raw evaluations, consumed exactly) or ``iterations``
    (mutation rounds, in which case budget = (iterations + 1) * resample_m)
    must be given. The all-zero vector seeds the archive. ``step_hook``,
    when given, is called with the archive after every update (used by the
    invariant tests).
    """
    dim = objective.dimension
    if not dim.all_binary:
        raise ConfigError("subset selection needs an all-binary search space")
    n = dim.size
    if not (1 <= k <= n):
        raise ConfigError(f"cardinality bound {k} outside 1..{n}")
    if budget is None:
        if iterations is None or iterations < 1:
            raise ConfigError("need a budget or a positive iteration count")
        budget = (iterations + 1) * resample_m
    if budget < 1:
        raise ConfigError("budget must cover the initial evaluation")

    history = objective.history
    limit = len(history) + budget
    zero = np.zeros(n, dtype=np.float64)
    archive: list[ArchiveEntry] = []
    sol = _noise.eval_capped(objective, zero, resample_m, limit)
    archive.append(ArchiveEntry(sol, sol.value, 0))

    while len(history) < limit and (deadline is None or monotonic() < deadline):
        pick = archive[rng.randint(0, len(archive) - 1)]
        child = mutate_bits(pick.solution.x, rng)
        sol = _noise.eval_capped(objective, child, resample_m, limit)
        pc = popcount(child)
        arch_value = math.inf if pc >= 2 * k else sol.value
        archive_update(archive, ArchiveEntry(sol, arch_value, pc))
        if step_hook is not None:
            step_hook(archive)

    best: Optional[ArchiveEntry] = None
    for entry in archive:
        if entry.popcount <= k and (best is None or entry.value < best.value):
            best = entry
    return best.solution

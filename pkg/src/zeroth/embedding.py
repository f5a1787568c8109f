"""High-dimension handling via random embeddings.

A Gaussian matrix maps a small search box into the full-dimensional space;
optimization runs over the low-dimensional preimage and images are clipped
into the original bounds. The sequential variant chains several stages,
each combining a fresh embedding with a scaling coordinate that can keep,
shrink or flip the best point of the previous stage.

Both mappings are reconstructions of the published technique names; the
exact formulas are this package's own (see README).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as _dc_replace
from time import monotonic
from typing import Optional

import numpy as np

from .core import ConfigError, Dimension, Objective, Parameter, Solution


@dataclass
class EmbeddingConfig:
    """Settings for the embedding wrappers.

    ``stages`` only applies to the sequential variant; ``inner_budget``
    defaults to an even split of the run budget across stages.
    """

    d_low: int
    stages: int = 5
    inner_budget: Optional[int] = None
    sequential: bool = True

    def validate(self) -> None:
        if self.d_low < 1:
            raise ConfigError("d_low must be >= 1")
        if self.stages < 1:
            raise ConfigError("stages must be >= 1")
        if self.inner_budget is not None and self.inner_budget < 1:
            raise ConfigError("inner_budget must be >= 1")


def make_embedding(d_high: int, d_low: int, rng) -> np.ndarray:
    """d_high x d_low matrix of i.i.d. standard normal entries (row-major)."""
    if not (1 <= d_low < d_high):
        raise ConfigError(f"need 1 <= d_low < d_high, got {d_low} / {d_high}")
    out = np.empty((d_high, d_low), dtype=np.float64)
    for i in range(d_high):
        for j in range(d_low):
            out[i, j] = rng.normal()
    return out


def box_center(dimension: Dimension) -> np.ndarray:
    return (dimension.lower + dimension.upper) / 2.0


def low_dim_halfwidth(dimension: Dimension, d_low: int) -> float:
    """Half-width of the low-dimensional search box: sqrt(d_low) scaled by
    half the mean width of the high-dimensional box.

    Under standard-normal entries this keeps the embedded displacement
    comparable to the box radius.
    """
    mean_halfwidth = float(np.mean((dimension.upper - dimension.lower) / 2.0))
    return math.sqrt(d_low) * mean_halfwidth


def embed_point(A: np.ndarray, y: np.ndarray, dimension: Dimension) -> np.ndarray:
    """Map a low-dimensional point into the box: clip(center + A y)."""
    x = box_center(dimension) + A @ np.asarray(y, dtype=np.float64)
    return np.clip(x, dimension.lower, dimension.upper)


def _low_dimension(halfwidth: float, d_low: int, with_scale_coord: bool) -> Dimension:
    coords = []
    if with_scale_coord:
        coords.append((-1.0, 1.0, "continuous"))
    coords.extend([(-halfwidth, halfwidth, "continuous")] * d_low)
    return Dimension(coords)


def _stage_budgets(budget: int, config: EmbeddingConfig) -> list[int]:
    """Per-stage budgets summing to the run budget exactly."""
    stages = config.stages
    if config.inner_budget is not None:
        if stages * config.inner_budget > budget:
            raise ConfigError("stages * inner_budget exceeds the budget")
        budgets = [config.inner_budget] * stages
        budgets[-1] += budget - stages * config.inner_budget
        return budgets
    base, extra = divmod(budget, stages)
    if base < 1:
        raise ConfigError("budget too small for the requested stage count")
    return [base + (1 if i < extra else 0) for i in range(stages)]


def re_optimize(objective: Objective, parameter: Parameter, rng,
                deadline: Optional[float] = None) -> Solution:
    """Plain random-embedding run: one Gaussian matrix, full budget."""
    from . import racos as _racos

    config = parameter.embedding
    config.validate()
    dim = objective.dimension
    A = make_embedding(dim.size, config.d_low, rng)
    halfwidth = low_dim_halfwidth(dim, config.d_low)
    inner_dim = _low_dimension(halfwidth, config.d_low, with_scale_coord=False)
    raw = objective.evaluator

    def h(y: np.ndarray) -> float:
        return raw(embed_point(A, y, dim))

    inner = objective.spawn_inner(h, inner_dim)
    inner_parameter = _dc_replace(parameter, embedding=None)
    best_low = _racos.sracos_optimize(inner, inner_parameter, rng, deadline=deadline)
    sol = Solution(x=embed_point(A, best_low.x, dim), value=best_low.value,
                   eval_count=best_low.eval_count)
    return sol


def sre_optimize(objective: Objective, parameter: Parameter, rng,
                 deadline: Optional[float] = None) -> Solution:
    """Sequential random embeddings: per stage, optimize a scaling of the
    previous stage's best plus a fresh embedded displacement."""
    from . import racos as _racos

    config = parameter.embedding
    config.validate()
    if not config.sequential:
        return re_optimize(objective, parameter, rng, deadline=deadline)

    dim = objective.dimension
    center = box_center(dim)
    halfwidth = low_dim_halfwidth(dim, config.d_low)
    inner_dim = _low_dimension(halfwidth, config.d_low, with_scale_coord=True)
    raw = objective.evaluator
    budgets = _stage_budgets(parameter.budget, config)

    x_prev = center.copy()
    best: Optional[Solution] = None
    for stage_budget in budgets:
        if best is not None and deadline is not None and monotonic() >= deadline:
            break
        A = make_embedding(dim.size, config.d_low, rng)
        offset = x_prev - center

        def h(z: np.ndarray, A=A, offset=offset) -> float:
            return raw(_compose(z, A, offset, center, dim))

        inner = objective.spawn_inner(h, inner_dim)
        inner_parameter = _dc_replace(parameter, budget=stage_budget, embedding=None)
        stage_best = _racos.sracos_optimize(inner, inner_parameter, rng,
                                            deadline=deadline)
        x_stage = _compose(stage_best.x, A, offset, center, dim)
        if best is None or stage_best.value < best.value:
            best = Solution(x=x_stage, value=stage_best.value,
                            eval_count=stage_best.eval_count)
        x_prev = x_stage
    return best


def _compose(z: np.ndarray, A: np.ndarray, offset: np.ndarray,
             center: np.ndarray, dimension: Dimension) -> np.ndarray:
    alpha, y = z[0], z[1:]
    x = alpha * offset + A @ y + center
    return np.clip(x, dimension.lower, dimension.upper)

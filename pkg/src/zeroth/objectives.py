"""Built-in benchmark objectives, instance loaders and the delay wrapper.

Objectives are referenced by name so that evaluation servers can rebuild
them from a wire description without transporting code. The ``cmd``
objective delegates to an external child process speaking a line protocol:
one line of space-separated decimal coordinates in, one decimal value out.
"""

from __future__ import annotations

import json
import math
import shlex
import subprocess
from typing import Callable, Optional

import numpy as np

from . import _backend as bk
from .core import ConfigError, Dimension, EvaluationError, Objective

BUILTIN_NAMES = ("sphere", "ackley", "lowdim_sphere", "max_coverage",
                 "sparse_regression", "cmd")


def sphere(x: np.ndarray) -> float:
    """Sum of squared coordinates; global minimum 0 at the origin."""
    return float(bk.sphere(np.ascontiguousarray(x, dtype=np.float64)))


def ackley(x: np.ndarray) -> float:
    """Standard multimodal benchmark with constants 20, 0.2 and 2 pi;
    global minimum 0 at the origin."""
    return float(bk.ackley(np.ascontiguousarray(x, dtype=np.float64)))


def lowdim_sphere(effective_dims: int) -> Callable[[np.ndarray], float]:
    """Sphere over the first ``effective_dims`` coordinates only."""

    def f(x: np.ndarray) -> float:
        return sphere(x[:effective_dims])

    return f


def delay_wrapper(evaluator: Callable[[np.ndarray], float],
                  loops: int) -> Callable[[np.ndarray], float]:
    """Busy-loop for ``loops`` iterations before each evaluation.

    Deliberately interpreted Python work (wrapping integer accumulation
    whose result feeds a data-dependent check), so the simulated cost
    matches a CPU-bound evaluation regardless of the compiled backend.
    """
    if loops < 0:
        raise ConfigError("delay loops must be >= 0")
    if loops == 0:
        return evaluator

    sink = {"acc": 0}

    def delayed(x: np.ndarray) -> float:
        acc = 0
        for i in range(loops):
            acc = (acc + i) & 0xFFFFFFFFFFFFFFFF
        if acc == 0xD1CE:
            sink["acc"] = acc
        return evaluator(x)

    return delayed


def load_instance(path) -> dict:
    """Read and validate a problem-instance JSON document."""
    with open(path) as fh:
        inst = json.load(fh)
    return validate_instance(inst)


def validate_instance(inst: dict) -> dict:
    if not isinstance(inst, dict) or "type" not in inst:
        raise ConfigError("instance document needs a 'type' field")
    kind = inst["type"]
    if kind == "max_coverage":
        for key in ("n", "sets", "universe"):
            if key not in inst:
                raise ConfigError(f"max_coverage instance missing {key!r}")
        if len(inst["sets"]) != inst["n"]:
            raise ConfigError("max_coverage: 'sets' length must equal n")
    elif kind == "sparse_regression":
        for key in ("X", "y"):
            if key not in inst:
                raise ConfigError(f"sparse_regression instance missing {key!r}")
        if len(inst["X"]) != len(inst["y"]):
            raise ConfigError("sparse_regression: X rows must match y length")
    else:
        raise ConfigError(f"unknown instance type {kind!r}")
    return inst


def max_coverage_evaluator(inst: dict) -> Callable[[np.ndarray], float]:
    """Negated coverage of the union of selected sets (minimization)."""
    sets = [frozenset(s) for s in inst["sets"]]

    def f(bits: np.ndarray) -> float:
        covered: set = set()
        for i, chosen in enumerate(bits):
            if chosen >= 0.5:
                covered |= sets[i]
        return -float(len(covered))

    return f


def sparse_regression_evaluator(inst: dict) -> Callable[[np.ndarray], float]:
    """Mean squared error of a least-squares fit on the selected columns."""
    X = np.asarray(inst["X"], dtype=np.float64)
    y = np.asarray(inst["y"], dtype=np.float64)

    def f(bits: np.ndarray) -> float:
        idx = [i for i in range(len(bits)) if bits[i] >= 0.5]
        if not idx:
            return float(np.mean(y ** 2))
        sub = X[:, idx]
        coef, *_ = np.linalg.lstsq(sub, y, rcond=None)
        resid = y - sub @ coef
        return float(np.mean(resid ** 2))

    return f


class CmdEvaluator:
    """External-command objective speaking the line protocol.

    The child is spawned once and reused; each evaluation writes one line
    of space-separated decimal coordinates and reads back one decimal value.
    """

    def __init__(self, command: str):
        if not command:
            raise ConfigError("cmd objective needs a command line")
        self.command = command
        self._proc: Optional[subprocess.Popen] = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                shlex.split(self.command),
                stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1)
        return self._proc

    def __call__(self, x: np.ndarray) -> float:
        proc = self._ensure()
        line = " ".join(repr(float(v)) for v in x)
        try:
            proc.stdin.write(line + "\n")
            proc.stdin.flush()
            reply = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise EvaluationError(f"external command failed: {exc}") from exc
        if reply == "":
            raise EvaluationError("external command closed its output stream")
        try:
            return float(reply.strip())
        except ValueError as exc:
            raise EvaluationError(f"external command replied {reply!r}") from exc

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.terminate()
            self._proc.wait(timeout=5)
        self._proc = None


def dimension_to_wire(dimension: Dimension) -> dict:
    return {"size": dimension.size,
            "lower": [float(v) for v in dimension.lower],
            "upper": [float(v) for v in dimension.upper],
            "kinds": [kind for _, _, kind in dimension.coords]}


def dimension_from_wire(payload: dict) -> Dimension:
    try:
        coords = list(zip(payload["lower"], payload["upper"], payload["kinds"]))
        if len(coords) != payload["size"]:
            raise ConfigError("dimension size does not match its bounds")
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed dimension payload: {exc}") from exc
    return Dimension(coords)


def build_evaluator(name: str, dimension: Dimension,
                    params: dict) -> Callable[[np.ndarray], float]:
    """Resolve a named objective; used locally and by evaluation servers."""
    params = params or {}
    if name == "sphere":
        f = sphere
    elif name == "ackley":
        f = ackley
    elif name == "lowdim_sphere":
        eff = int(params.get("effective_dims", dimension.size))
        if not (1 <= eff <= dimension.size):
            raise ConfigError("effective_dims outside the dimension size")
        f = lowdim_sphere(eff)
    elif name in ("max_coverage", "sparse_regression"):
        inst = params.get("instance")
        if inst is None:
            raise ConfigError(f"{name} needs an 'instance' parameter")
        validate_instance(inst)
        if inst["type"] != name:
            raise ConfigError(f"instance type {inst['type']!r} does not match {name!r}")
        builder = (max_coverage_evaluator if name == "max_coverage"
                   else sparse_regression_evaluator)
        f = builder(inst)
    elif name == "cmd":
        f = CmdEvaluator(params.get("command", ""))
    else:
        raise ConfigError(f"unknown objective {name!r}")
    loops = int(params.get("delay_loops", 0))
    return delay_wrapper(f, loops)


def build_objective(name: str, dimension: Dimension, params: dict) -> Objective:
    """Objective from a wire-style description (name, dimension, params)."""
    constraint = params.get("constraint") if params else None
    return Objective(build_evaluator(name, dimension, params), dimension,
                     constraint=constraint)


def instance_dimension(name: str, params: dict) -> Dimension:
    """Dimension implied by an instance-backed objective."""
    if name == "max_coverage":
        return Dimension.binary(int(params["instance"]["n"]))
    if name == "sparse_regression":
        return Dimension.binary(len(params["instance"]["X"][0]))
    raise ConfigError(f"objective {name!r} does not imply a dimension")

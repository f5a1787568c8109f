import contextlib
import random

import numpy as np
import pytest

import zeroth._backend as backend_module
from zeroth._backend import pure


@contextlib.contextmanager
def force_pure_backend():
    """Temporarily route all kernel calls through the pure-Python twin."""
    names = ["Rng", "sample_uniform", "learn_region", "sample_region",
             "mutate_bits", "sphere", "ackley"]
    saved = {name: getattr(backend_module, name) for name in names}
    try:
        for name in names:
            setattr(backend_module, name, getattr(pure, name))
        yield
    finally:
        for name, value in saved.items():
            setattr(backend_module, name, value)


@pytest.fixture
def pure_backend():
    with force_pure_backend():
        yield


def uniform_search_best(func, lower, upper, budget, seed):
    """Independent uniform-random-search oracle built on the stdlib RNG."""
    rnd = random.Random(seed)
    best = None
    for _ in range(budget):
        x = np.array([rnd.uniform(lo, hi) for lo, hi in zip(lower, upper)])
        v = func(x)
        if best is None or v < best:
            best = v
    return best


def random_coverage_instance(n, universe, seed):
    """Random max-coverage instance: n subsets of a given universe."""
    rnd = random.Random(seed)
    sets = []
    for _ in range(n):
        size = rnd.randint(1, max(1, universe // 3))
        sets.append(sorted(rnd.sample(range(universe), size)))
    return {"type": "max_coverage", "n": n, "universe": universe, "sets": sets}


def brute_force_best_coverage(inst, k):
    """Exhaustive optimum of the (negated) coverage over subsets of size <= k."""
    from itertools import combinations

    n = inst["n"]
    sets = [frozenset(s) for s in inst["sets"]]
    best = 0
    for size in range(0, k + 1):
        for combo in combinations(range(n), size):
            covered = set()
            for i in combo:
                covered |= sets[i]
            best = max(best, len(covered))
    return -float(best)

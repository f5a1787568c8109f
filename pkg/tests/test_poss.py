"""Subset-selection solver: dominance, mutation, archive, optimization."""

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zeroth import ConfigError, Dimension, Objective, Parameter, Rng, opt_min
from zeroth.objectives import max_coverage_evaluator, sparse_regression_evaluator
from zeroth.poss import (ArchiveEntry, Solution, archive_update,
                         default_iterations, dominates, mutate_bits,
                         poss_optimize)

from conftest import brute_force_best_coverage, random_coverage_instance


class TestDominates:
    def test_equal_value_smaller_size(self):
        assert dominates((1.0, 2), (1.0, 3))

    def test_trade_off_incomparable(self):
        assert not dominates((1.0, 3), (2.0, 2))
        assert not dominates((2.0, 2), (1.0, 3))

    def test_reflexive(self):
        assert dominates((1.5, 4), (1.5, 4))


class TestMutateBits:
    def test_single_bit_always_flips(self):
        for seed in range(20):
            out = mutate_bits(np.array([0.0]), Rng(seed))
            assert out[0] == 1.0

    def test_preserves_length(self):
        x = np.zeros(17)
        assert mutate_bits(x, Rng(1)).shape == (17,)

    def test_expected_flip_count(self):
        n, trials = 100, 10_000
        rng = Rng(3)
        x = np.zeros(n)
        total = 0
        for _ in range(trials):
            total += int(mutate_bits(x, rng).sum())
        mean = total / trials
        assert 0.9 <= mean <= 1.1

    def test_input_unchanged(self):
        x = np.zeros(8)
        mutate_bits(x, Rng(5))
        assert x.sum() == 0.0


def _entry(value, pc):
    sol = Solution(x=np.zeros(max(pc, 1)), value=value, eval_count=1)
    return ArchiveEntry(sol, value, pc)


class TestArchiveUpdate:
    def test_empty_archive_accepts(self):
        archive = []
        assert archive_update(archive, _entry(1.0, 2))
        assert len(archive) == 1

    def test_duplicate_rejected(self):
        archive = [_entry(1.0, 2)]
        assert not archive_update(archive, _entry(1.0, 2))
        assert len(archive) == 1

    def test_incomparable_coexist(self):
        archive = [_entry(1.0, 2), _entry(0.5, 4)]
        assert archive_update(archive, _entry(0.7, 3))
        assert len(archive) == 3

    def test_dominating_candidate_sweeps(self):
        archive = [_entry(1.0, 2), _entry(0.5, 4), _entry(0.7, 3)]
        assert archive_update(archive, _entry(0.4, 1))
        assert len(archive) == 1

    @given(st.lists(st.tuples(st.integers(0, 8), st.integers(0, 9)), max_size=60))
    @settings(max_examples=200, deadline=None)
    def test_invariants_hold_under_any_sequence(self, tuples):
        archive = []
        for raw_value, pc in tuples:
            archive_update(archive, _entry(float(raw_value), pc))
            keys = [(e.value, e.popcount) for e in archive]
            for i, a in enumerate(keys):
                for j, b in enumerate(keys):
                    if i != j:
                        assert not dominates(a, b)
            assert len({pc for _, pc in keys}) == len(keys)


def _coverage_objective(inst, k):
    obj = Objective(max_coverage_evaluator(inst), Dimension.binary(inst["n"]),
                    constraint=k)
    return obj


class TestPossOptimize:
    def test_degenerate_budget_returns_zero_vector(self):
        inst = random_coverage_instance(6, 12, seed=0)
        obj = _coverage_objective(inst, 2)
        sol = poss_optimize(obj, 2, Rng(0), budget=1)
        assert sol.x.sum() == 0.0
        assert len(obj.history) == 1

    def test_non_binary_space_rejected(self):
        obj = Objective(lambda x: 0.0, Dimension.continuous(3, 0, 1))
        with pytest.raises(ConfigError):
            poss_optimize(obj, 2, Rng(0), budget=10)

    def test_budget_exact_and_constraint_respected(self):
        inst = random_coverage_instance(12, 25, seed=3)
        obj = _coverage_objective(inst, 4)
        sol = poss_optimize(obj, 4, Rng(5), budget=400)
        assert len(obj.history) == 400
        assert sol.x.sum() <= 4

    def test_archive_bounded_and_nondominated_throughout(self):
        inst = random_coverage_instance(10, 20, seed=1)
        obj = _coverage_objective(inst, 3)
        max_size = 0

        def check(archive):
            nonlocal max_size
            max_size = max(max_size, len(archive))
            assert len(archive) <= 2 * 3
            keys = [(e.value, e.popcount) for e in archive]
            for i, a in enumerate(keys):
                for j, b in enumerate(keys):
                    if i != j:
                        assert not dominates(a, b)
            assert all(math.isfinite(e.value) for e in archive)

        poss_optimize(obj, 3, Rng(2), budget=600, step_hook=check)
        assert max_size >= 2

    def test_matches_brute_force_on_most_seeds(self):
        inst = random_coverage_instance(10, 20, seed=9)
        k = 3
        optimum = brute_force_best_coverage(inst, k)
        iterations = 2 * math.ceil(math.e * k * k * inst["n"])
        hits = 0
        for seed in range(20):
            obj = _coverage_objective(inst, k)
            sol = poss_optimize(obj, k, Rng(seed), budget=iterations + 1)
            if sol.value == optimum:
                hits += 1
        assert hits >= 18

    def test_long_run_reaches_optimum_reliably(self):
        # heavy invariant: with a 50x iteration allowance the exhaustive
        # optimum is found nearly always on small instances
        inst = random_coverage_instance(10, 18, seed=4)
        k = 3
        optimum = brute_force_best_coverage(inst, k)
        iterations = 50 * 2 * math.ceil(math.e * k * k * inst["n"])
        hits = 0
        for seed in range(20):
            obj = _coverage_objective(inst, k)
            sol = poss_optimize(obj, k, Rng(seed), budget=iterations + 1)
            if sol.value == optimum:
                hits += 1
        assert hits / 20 >= 0.95

    def test_default_iterations_formula(self):
        assert default_iterations(10, 3) == math.ceil(2 * math.e * 9 * 10)

    def test_via_opt_min_auto(self):
        inst = random_coverage_instance(8, 16, seed=6)
        obj = _coverage_objective(inst, 3)
        sol = opt_min(obj, Parameter(budget=300, seed=11))
        assert len(obj.history) == 300
        assert sol.x.sum() <= 3

    def test_deterministic(self):
        inst = random_coverage_instance(9, 18, seed=7)
        runs = []
        for _ in range(2):
            obj = _coverage_objective(inst, 3)
            opt_min(obj, Parameter(budget=250, seed=13))
            runs.append(obj.history.values())
        assert runs[0] == runs[1]


def _greedy_forward_selection(X, y, k):
    """Greedy oracle: add the column with the best mean-squared-error gain."""
    chosen: list[int] = []
    best_err = float(np.mean(y ** 2))
    for _ in range(k):
        best_col, best_col_err = None, best_err
        for col in range(X.shape[1]):
            if col in chosen:
                continue
            sub = X[:, chosen + [col]]
            coef, *_ = np.linalg.lstsq(sub, y, rcond=None)
            err = float(np.mean((y - sub @ coef) ** 2))
            if err < best_col_err:
                best_col, best_col_err = col, err
        if best_col is None:
            break
        chosen.append(best_col)
        best_err = best_col_err
    return best_err


class TestSparseRegression:
    def _instance(self, seed):
        rnd = np.random.RandomState(seed)
        X = rnd.randn(40, 8)
        true_coef = np.zeros(8)
        true_coef[rnd.choice(8, 2, replace=False)] = rnd.randn(2) * 2
        y = X @ true_coef + 0.05 * rnd.randn(40)
        return {"type": "sparse_regression", "X": X.tolist(), "y": y.tolist()}

    def test_beats_or_ties_greedy_on_most_seeds(self):
        inst = self._instance(0)
        X = np.asarray(inst["X"])
        y = np.asarray(inst["y"])
        k = 2
        greedy = _greedy_forward_selection(X, y, k)
        wins = 0
        for seed in range(20):
            obj = Objective(sparse_regression_evaluator(inst),
                            Dimension.binary(8), constraint=k)
            sol = poss_optimize(obj, k, Rng(seed), budget=500)
            if sol.value <= greedy + 1e-12:
                wins += 1
        assert wins >= 18

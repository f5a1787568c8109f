"""Noise handling: resampling, thresholds, suppression, identity of mode none."""

import numpy as np
import pytest

from zeroth import (ConfigError, Dimension, NoiseConfig, Objective, Parameter,
                    Rng, Solution, opt_min)
from zeroth.noise import resample_eval, suppress_refresh, threshold_accept
from zeroth.objectives import sphere
from zeroth.racos import TrainingSets


def _noisy_sphere(sigma, seed):
    rng = Rng(seed)

    def f(x):
        return sphere(x) + rng.normal(0.0, sigma)

    return f


class TestResampleEval:
    def test_deterministic_mean(self):
        obj = Objective(sphere, Dimension.continuous(2, -3, 3))
        sol = resample_eval(obj, [1.0, 2.0], 5)
        assert sol.value == 5.0
        assert sol.eval_count == 5
        assert len(obj.history) == 5

    def test_single_sample_matches_evaluate(self):
        obj = Objective(sphere, Dimension.continuous(2, -3, 3))
        sol = resample_eval(obj, [1.0, 2.0], 1)
        assert sol.value == 5.0
        assert sol.eval_count == 1
        assert len(obj.history) == 1

    def test_rejects_nonpositive_count(self):
        obj = Objective(sphere, Dimension.continuous(2, -3, 3))
        with pytest.raises(ConfigError):
            resample_eval(obj, [0.0, 0.0], 0)

    def test_variance_shrinks_by_m(self):
        sigma, m, trials = 1.0, 10, 1000
        obj = Objective(_noisy_sphere(sigma, 99), Dimension.continuous(1, 0, 1))
        values = [resample_eval(obj, [0.0], m).value for _ in range(trials)]
        var = float(np.var(values))
        expected = sigma ** 2 / m
        assert 0.7 * expected <= var <= 1.3 * expected


class TestThresholdAccept:
    def test_accepts_large_improvement(self):
        assert threshold_accept(1.0, 0.5, 0.4)

    def test_rejects_small_improvement(self):
        assert not threshold_accept(1.0, 0.7, 0.4)

    def test_zero_threshold_is_strict_improvement(self):
        assert threshold_accept(1.0, 0.999, 0.0)
        assert not threshold_accept(1.0, 1.0, 0.0)


class TestSuppressRefresh:
    def _sets(self, positives, negatives):
        return TrainingSets(
            positives=[Solution(x=np.array([float(x)]), value=v, eval_count=1)
                       for x, v in positives],
            negatives=[Solution(x=np.array([float(x)]), value=v, eval_count=1)
                       for x, v in negatives])

    def test_deterministic_objective_keeps_membership(self):
        obj = Objective(sphere, Dimension.continuous(1, -3, 3))
        sets = self._sets([(1.0, 1.0), (2.0, 4.0)], [(3.0, 9.0)])
        suppress_refresh(sets, obj, m=3, limit=100)
        assert [s.value for s in sets.positives] == [1.0, 4.0]
        assert [s.value for s in sets.negatives] == [9.0]
        assert len(obj.history) == 6

    def test_lucky_stale_positive_demoted(self):
        # one positive holds a wildly optimistic stored value; its true mean
        # is the worst of the pool, so refreshing demotes it nearly always
        demotions = 0
        for seed in range(20):
            noisy = _noisy_sphere(0.5, seed)
            obj = Objective(noisy, Dimension.continuous(1, -3, 3))
            lucky = Solution(x=np.array([2.0]), value=-10.0, eval_count=1)  # true 4
            honest = Solution(x=np.array([1.0]), value=1.0, eval_count=1)  # true 1
            other = Solution(x=np.array([1.5]), value=2.4, eval_count=1)  # true 2.25
            sets = TrainingSets(positives=[lucky, honest], negatives=[other])
            suppress_refresh(sets, obj, m=50, limit=10_000)
            if all(s.seq_id != lucky.seq_id for s in sets.positives):
                demotions += 1
        assert demotions >= 18

    def test_budget_truncation_stops_refresh(self):
        obj = Objective(sphere, Dimension.continuous(1, -3, 3))
        sets = self._sets([(1.0, 99.0), (2.0, 98.0)], [(3.0, 9.0)])
        suppress_refresh(sets, obj, m=10, limit=5)
        assert len(obj.history) == 5  # truncated, not 20


class TestModesUnderOptMin:
    def test_mode_none_is_identity(self):
        histories = []
        for noise in (None, NoiseConfig(mode="none")):
            obj = Objective(sphere, Dimension.continuous(2, -1, 1))
            opt_min(obj, Parameter(budget=150, seed=40, noise=noise))
            histories.append(obj.history.values())
        assert histories[0] == histories[1]

    @pytest.mark.parametrize("noise", [
        NoiseConfig(mode="resample", resample_m=7),
        NoiseConfig(mode="suppression", resample_m=5, suppress_s=3),
        NoiseConfig(mode="threshold", threshold=0.05),
    ])
    def test_budget_exactness(self, noise):
        obj = Objective(_noisy_sphere(0.3, 7), Dimension.continuous(2, -1, 1))
        opt_min(obj, Parameter(budget=137, seed=8, noise=noise))
        assert len(obj.history) == 137

    def test_suppression_never_triggers_with_large_period(self):
        runs = []
        for noise in (None, NoiseConfig(mode="suppression", resample_m=5,
                                        suppress_s=10_000)):
            obj = Objective(sphere, Dimension.continuous(2, -1, 1))
            opt_min(obj, Parameter(budget=200, seed=12, noise=noise))
            runs.append(obj.history.values())
        assert runs[0] == runs[1]

    def test_suppression_triggers_with_small_period(self):
        runs = []
        for noise in (None, NoiseConfig(mode="suppression", resample_m=5,
                                        suppress_s=1)):
            obj = Objective(sphere, Dimension.continuous(2, -1, 1))
            opt_min(obj, Parameter(budget=200, seed=12, noise=noise))
            runs.append(obj.history.values())
        assert runs[0] != runs[1]

    def test_threshold_zero_matches_plain_run(self):
        runs = []
        for noise in (None, NoiseConfig(mode="threshold", threshold=0.0)):
            obj = Objective(sphere, Dimension.continuous(2, -1, 1))
            opt_min(obj, Parameter(budget=180, seed=19, noise=noise))
            runs.append(obj.history.values())
        assert runs[0] == runs[1]

    def test_objective_noise_config_used_as_fallback(self):
        obj = Objective(sphere, Dimension.continuous(2, -1, 1),
                        noise_config=NoiseConfig(mode="resample", resample_m=4))
        opt_min(obj, Parameter(budget=97, seed=3))
        assert len(obj.history) == 97

    def test_invalid_config_rejected(self):
        with pytest.raises(ConfigError):
            Parameter(budget=100,
                      noise=NoiseConfig(mode="resample", resample_m=0)).validate()
        with pytest.raises(ConfigError):
            Parameter(budget=100, noise=NoiseConfig(mode="typo")).validate()

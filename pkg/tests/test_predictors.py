"""Tests for the per-source predictors and their observe/predict cycle."""

import math
from dataclasses import replace

import numpy as np
import pytest

from conoracle.kalman import initial_state
from conoracle.predictors import (
    KalmanSettings,
    PredictorKind,
    make_predictor,
    observe,
    predict,
)

SETTINGS = KalmanSettings(sigma2_0=1.0, w_bar=0.0, v_bar=0.0, w_bar_floor=-5.0)


def seeded(kind=PredictorKind.MVP_KALMAN, alpha_k=0.1, seed=0, mu0=None, settings=SETTINGS):
    p = make_predictor(kind, alpha_k=alpha_k, settings=settings, seed=seed)
    if mu0 is not None:
        p = replace(p, score_state=initial_state(mu=mu0, sigma2=1.0, w_bar=0.0, w_bar_floor=-5.0))
    return p


class TestPredict:
    def test_uninitialized_is_empty(self):
        assert predict(seeded()).is_empty

    def test_degenerate_at_max_threshold(self):
        p = seeded(mu0=4.0)
        p = replace(p, mvp_state=replace(p.mvp_state, tau=0.5))
        iv = predict(p)
        assert iv.lo == iv.hi == 4.0

    def test_zero_threshold_is_full_line(self):
        p = seeded(mu0=4.0)
        assert p.mvp_state.tau == 0.0
        assert predict(p).is_full

    def test_sigma_baseline_is_one_std(self):
        p = seeded(kind=PredictorKind.SIGMA_BPS, mu0=0.0,
                   settings=KalmanSettings(sigma2_0=2.0, w_bar=0.0, v_bar=0.0))
        p = replace(p, score_state=initial_state(mu=0.0, sigma2=2.0, w_bar=0.0, w_bar_floor=-5.0))
        iv = predict(p)
        assert iv.lo == pytest.approx(-2.0)
        assert iv.hi == pytest.approx(2.0)

    def test_predict_does_not_mutate(self):
        p = seeded(mu0=1.0)
        first = predict(p)
        for _ in range(5):
            assert predict(p) == first


class TestObserve:
    def test_first_observation_seeds_the_mean(self):
        p = observe(seeded(), 42.0)
        assert p.score_state.mu == 42.0
        assert p.score_state.sigma2 == SETTINGS.sigma2_0

    def test_covered_raises_pressure_by_alpha(self):
        p = seeded(alpha_k=0.2, mu0=0.0)  # tau = 0, full line, always covers
        before = p.mvp_state.v.sum()
        p2 = observe(p, 0.1)
        assert p2.mvp_state.v.sum() == pytest.approx(before + 0.2)

    def test_miss_drops_pressure_and_mean_chases(self):
        p = seeded(alpha_k=0.2, mu0=0.0)
        p = replace(p, mvp_state=replace(p.mvp_state, tau=0.5, tau_units=p.mvp_state.r // 2))
        before = p.mvp_state.v.sum()
        p2 = observe(p, 50.0)  # far outside the degenerate set
        assert p2.mvp_state.v.sum() == pytest.approx(before - (1.0 - 0.2))
        assert 0.0 < p2.score_state.mu <= 50.0

    def test_value_semantics(self):
        p = seeded(mu0=0.0)
        snapshot = (p.score_state.mu, p.mvp_state.tau, p.mvp_state.v.sum())
        observe(p, 9.0)
        assert (p.score_state.mu, p.mvp_state.tau, p.mvp_state.v.sum()) == snapshot

    def test_sigma_baseline_skips_threshold_learning(self):
        p = seeded(kind=PredictorKind.SIGMA_BPS, mu0=0.0)
        assert p.mvp_state is None
        p2 = observe(p, 3.0)
        assert p2.mvp_state is None
        assert p2.score_state.mu != 0.0

    def test_deterministic_replay(self):
        rng = np.random.default_rng(31)
        stream = rng.standard_normal(300).tolist()
        a = seeded(seed=9)
        b = seeded(seed=9)
        for y in stream:
            iv_a, iv_b = predict(a), predict(b)
            assert iv_a == iv_b
            a, b = observe(a, y), observe(b, y)


def drifting_stream(T, seed):
    rng = np.random.default_rng(seed)
    mean = 0.0
    out = []
    for _ in range(T):
        mean += rng.normal(0.0, 0.05)
        out.append(mean + rng.normal(0.0, 1.0))
    return out


class TestCoverage:
    def test_calibrated_on_drifting_stream(self):
        alpha_k = 0.1
        stream = drifting_stream(6000, seed=32)
        p = seeded(alpha_k=alpha_k, seed=5)
        misses = []
        for y in stream:
            misses.append(not predict(p).contains(y))
            p = observe(p, y)
        rate = np.mean(misses[500:])
        assert abs(rate - alpha_k) <= 0.03

    def test_sigma_baseline_is_less_calibrated(self):
        alpha_k = 0.1
        stream = drifting_stream(6000, seed=33)
        adaptive = seeded(alpha_k=alpha_k, seed=6)
        baseline = seeded(kind=PredictorKind.SIGMA_BPS, alpha_k=alpha_k, seed=6)
        miss_a, miss_b = [], []
        for y in stream:
            miss_a.append(not predict(adaptive).contains(y))
            miss_b.append(not predict(baseline).contains(y))
            adaptive = observe(adaptive, y)
            baseline = observe(baseline, y)
        gap_adaptive = abs(np.mean(miss_a[500:]) - alpha_k)
        gap_baseline = abs(np.mean(miss_b[500:]) - alpha_k)
        assert gap_baseline > gap_adaptive


class TestValidation:
    def test_mvp_kalman_requires_mvp_state(self):
        p = seeded()
        with pytest.raises(ValueError):
            replace(p, mvp_state=None)

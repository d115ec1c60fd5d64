"""Tests for the online threshold calibrator."""

import math
from dataclasses import replace

import numpy as np
import pytest

from conoracle.kalman import initial_state, score
from conoracle.mvp import (
    bin_index,
    calibration_eta_range,
    f_potential,
    initial_mvp_state,
    mvp_update,
)


class TestPotential:
    def test_zero(self):
        assert f_potential(0) == 1.0

    def test_two(self):
        assert f_potential(2) == pytest.approx(math.sqrt(3.0 * 4.0), rel=1e-15)

    def test_fourteen(self):
        assert f_potential(14) == pytest.approx(math.sqrt(15.0 * 16.0), rel=1e-15)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            f_potential(-1)


class TestBinIndex:
    def test_bottom(self):
        state = initial_mvp_state(alpha_k=0.1, m=100)
        assert bin_index(state, 0.0) == 1

    def test_top_interior(self):
        state = initial_mvp_state(alpha_k=0.1, m=100)
        assert bin_index(state, 0.995) == 100

    def test_left_edge(self):
        state = initial_mvp_state(alpha_k=0.1, m=20)
        assert bin_index(state, 0.05) == 2

    def test_tau_max_maps_to_last(self):
        state = initial_mvp_state(alpha_k=0.1, m=10)
        assert bin_index(state, 1.0) == 10

    def test_out_of_range_rejected(self):
        state = initial_mvp_state(alpha_k=0.1)
        with pytest.raises(ValueError):
            bin_index(state, 1.5)


class TestUpdate:
    def test_fresh_state_lands_just_under_the_top(self):
        for covered in (True, False):
            state = initial_mvp_state(alpha_k=0.1, m=100, r=1000, seed=5)
            new = mvp_update(state, covered)
            assert new.tau == 1.0 - (1.0 / 100 - 1.0 / (1000 * 100))

    def test_all_positive_pressure_maxes_out(self):
        state = initial_mvp_state(alpha_k=0.1, m=50, seed=1)
        state = replace(state, v=np.full(50, 0.5), n=np.full(50, 5.0))
        new = mvp_update(state, covered=True)
        assert new.tau == state.tau_max
        assert new.tau_units == 0

    def test_all_negative_pressure_floors_out(self):
        state = initial_mvp_state(alpha_k=0.1, m=50, seed=1)
        state = replace(state, v=np.full(50, -0.5), n=np.full(50, 5.0), tau=0.7, tau_units=15000)
        new = mvp_update(state, covered=True)
        assert new.tau == 0.0
        assert new.tau_units == 50 * 1000

    def test_threshold_stays_in_range(self):
        state = initial_mvp_state(alpha_k=0.2, m=30, r=7, seed=2)
        rng = np.random.default_rng(13)
        for _ in range(500):
            state = mvp_update(state, covered=bool(rng.random() < 0.6))
            assert 0.0 <= state.tau <= state.tau_max

    def test_visit_counter_totals_updates(self):
        state = initial_mvp_state(alpha_k=0.1, seed=3)
        for k in range(25):
            state = mvp_update(state, covered=(k % 3 == 0))
        assert state.n.sum() == 25
        assert np.all(state.n >= 0)

    def test_miss_pressure_is_negative(self):
        state = initial_mvp_state(alpha_k=0.1, seed=4)
        for _ in range(5):
            bucket = min(state.tau_units // state.r, state.m - 1)
            before = state.v[bucket]
            state = mvp_update(state, covered=False)
            assert state.v[bucket] == pytest.approx(before - (1.0 - 0.1))

    def test_cover_pressure_is_positive(self):
        state = initial_mvp_state(alpha_k=0.1, seed=4)
        for _ in range(5):
            bucket = min(state.tau_units // state.r, state.m - 1)
            before = state.v[bucket]
            state = mvp_update(state, covered=True)
            assert state.v[bucket] == pytest.approx(before + 0.1)

    def test_deterministic_trajectories(self):
        rng = np.random.default_rng(14)
        outcomes = [bool(b) for b in rng.random(400) < 0.7]
        a = initial_mvp_state(alpha_k=0.1, seed=77)
        b = initial_mvp_state(alpha_k=0.1, seed=77)
        for covered in outcomes:
            a = mvp_update(a, covered)
            b = mvp_update(b, covered)
            assert a.tau == b.tau
            assert a.tau_units == b.tau_units
        assert np.array_equal(a.v, b.v)

    def test_different_seeds_diverge(self):
        # randomization only matters at sign changes with mixed weights, so
        # drive with a noisy outcome stream
        rng = np.random.default_rng(15)
        outcomes = [bool(b) for b in rng.random(2000) < 0.8]
        a = initial_mvp_state(alpha_k=0.2, seed=1)
        b = initial_mvp_state(alpha_k=0.2, seed=2)
        taus_a, taus_b = [], []
        for covered in outcomes:
            a = mvp_update(a, covered)
            b = mvp_update(b, covered)
            taus_a.append(a.tau)
            taus_b.append(b.tau)
        assert taus_a != taus_b


class TestCalibration:
    def test_converges_to_target_rate(self):
        # i.i.d. stream against a fixed well-specified score
        alpha = 0.1
        state = initial_mvp_state(alpha_k=alpha, m=100, seed=11)
        fixed = initial_state(mu=0.0, sigma2=1.0, w_bar=-14.0, w_bar_floor=-14.0)
        ys = np.random.default_rng(16).standard_normal(8000)
        misses = []
        for y in ys:
            covered = score(fixed, float(y)) >= state.tau
            misses.append(not covered)
            state = mvp_update(state, covered)
        rate = np.mean(misses[500:])
        assert abs(rate - alpha) <= 0.03


class TestEtaRange:
    def test_range_is_ordered(self):
        lo, hi = calibration_eta_range(100)
        assert 0 < lo < hi

    def test_strict_mode_rejects_default_eta(self):
        with pytest.raises(ValueError):
            initial_mvp_state(alpha_k=0.1, m=100, eta=5.0, strict_eta=True)

    def test_strict_mode_accepts_in_band(self):
        lo, hi = calibration_eta_range(100)
        state = initial_mvp_state(alpha_k=0.1, m=100, eta=(lo + hi) / 2, strict_eta=True)
        assert lo <= state.eta <= hi


class TestValidation:
    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            initial_mvp_state(alpha_k=0.0)

    def test_bad_m(self):
        with pytest.raises(ValueError):
            initial_mvp_state(alpha_k=0.1, m=1)

    def test_bad_r(self):
        with pytest.raises(ValueError):
            initial_mvp_state(alpha_k=0.1, r=0)

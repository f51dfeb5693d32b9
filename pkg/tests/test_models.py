import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import entropy

from odc.models import (Battery, DiscreteDistribution, HarvestProcess, TraceExhausted, VoISource,
                        draw_energy, kl_divergence, mah_to_charge, next_harvest, next_voi,
                        phase_schedule, solar_state, store_energy, uniform_units, voi_from_window)


def test_charge_units():
    assert mah_to_charge(1) == 60.0
    assert mah_to_charge(40) == 2400.0
    assert mah_to_charge(1, slot_seconds=30) == 120.0


class TestKL:
    def test_identical(self):
        assert kl_divergence((0.5, 0.5), (0.5, 0.5)) == 0.0

    def test_point_mass_against_uniform(self):
        assert kl_divergence((1.0, 0.0), (0.5, 0.5)) == pytest.approx(math.log(2), abs=1e-12)

    def test_skewed(self):
        expected = 0.75 * math.log(1.5) + 0.25 * math.log(0.5)
        assert kl_divergence((0.75, 0.25), (0.5, 0.5)) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.130812, abs=1e-6)

    def test_support_mismatch(self):
        with pytest.raises(ValueError, match="support"):
            kl_divergence((0.5, 0.5), (0.2, 0.3, 0.5))

    def test_undefined_when_q_vanishes(self):
        with pytest.raises(ValueError, match="undefined"):
            kl_divergence((0.5, 0.5), (1.0, 0.0))

    def test_weights_must_normalise(self):
        with pytest.raises(ValueError):
            DiscreteDistribution((0.5, 0.6))
        with pytest.raises(ValueError):
            DiscreteDistribution((1.2, -0.2))

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(0.01, 10), min_size=2, max_size=8), st.data())
    def test_gibbs_and_scipy_agreement(self, raw_q, data):
        raw_p = data.draw(st.lists(st.floats(0.0, 10), min_size=len(raw_q), max_size=len(raw_q)))
        if sum(raw_p) == 0:
            raw_p[0] = 1.0
        p = np.array(raw_p) / sum(raw_p)
        q = np.array(raw_q) / sum(raw_q)
        p[-1] = 1.0 - p[:-1].sum()
        q[-1] = 1.0 - q[:-1].sum()
        p = np.clip(p, 0, None)
        value = kl_divergence(tuple(p / p.sum()), tuple(q / q.sum()))
        assert value >= 0
        assert value == pytest.approx(entropy(p, q), abs=1e-9)
        assert kl_divergence(tuple(q / q.sum()), tuple(q / q.sum())) == pytest.approx(0, abs=1e-12)


class TestVoIWindow:
    def test_identical_windows(self):
        w = [1.0, 2.0, 3.0, 2.5]
        assert voi_from_window(w, w) == pytest.approx(0.0, abs=1e-6)

    def test_disjoint_ranges_exceed_one(self):
        assert voi_from_window([0, 0.1, 0.2, 0.3], [9.7, 9.8, 9.9, 10.0], 8) > 1

    def test_constant_range_is_zero(self):
        assert voi_from_window([4, 4, 4], [4, 4]) == 0.0

    def test_matches_hand_histogram(self):
        obs, ref = [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]
        # two bins over [0, 1]; obs counts (2, 1), ref counts (0, 3); smoothing 1/3
        p = np.array([2 + 1 / 3, 1 + 1 / 3]); p /= p.sum()
        q = np.array([0 + 1 / 3, 3 + 1 / 3]); q /= q.sum()
        assert voi_from_window(obs, ref, 2) == pytest.approx(float(np.sum(p * np.log(p / q))), abs=1e-12)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            voi_from_window([], [1.0])
        with pytest.raises(ValueError):
            voi_from_window([1.0], [2.0], bin_count=1)


class TestVoISource:
    def test_gaussian_mean(self):
        draws = VoISource(seed=11).stream(100_000)
        assert 0.99 <= draws.mean() <= 1.03
        assert draws.min() >= 0

    def test_trace_replay(self):
        src = VoISource("trace", values=(3, 7, 1))
        assert next_voi(src, 1) == 7
        with pytest.raises(TraceExhausted):
            next_voi(src, 3)

    def test_zero_variance(self):
        assert np.all(VoISource(mean=1.0, variance=0.0).stream(50) == 1.0)

    def test_replay_is_deterministic(self):
        a = VoISource(seed=4).stream(300)
        b = VoISource(seed=4).stream(300)
        assert np.array_equal(a, b)
        assert np.array_equal(VoISource(seed=4).stream(1000)[:300], a)


class TestHarvest:
    def test_phase_schedule_slot(self):
        proc = phase_schedule(66.0, [(0, 10)], horizon=20)
        assert next_harvest(proc, 5) == (6.0, 0)

    def test_boundary_inclusive(self):
        assert solar_state(20.0, 20.0) == 1
        proc = HarvestProcess("trace", power=(20.0,), solar_threshold=20.0)
        assert next_harvest(proc, 0) == (20.0, 1)

    def test_absorbing_markov(self):
        proc = HarvestProcess("markov", levels=(0.0, 30.0), transition=((1, 0), (0, 1)), start_state=1)
        assert np.all(proc.stream(100) == 30.0)

    def test_malformed_transition(self):
        with pytest.raises(ValueError, match="sum to 1"):
            HarvestProcess("markov", levels=(0.0, 30.0), transition=((0.5, 0.4), (0, 1)))

    def test_markov_frequencies_follow_stationary(self):
        P = ((0.9, 0.1, 0.0), (0.2, 0.6, 0.2), (0.0, 0.3, 0.7))
        proc = HarvestProcess("markov", levels=(0.0, 20.0, 50.0), transition=P, seed=3)
        freq = np.bincount(proc.states(100_000), minlength=3) / 100_000
        # stationary vector from the balance equations solved by hand
        pi = np.array([2 / 4.5, 1 / 4.5, (2 / 3) / 4.5])
        pi /= pi.sum()
        assert np.allclose(proc.stationary_distribution(), pi, atol=1e-9)
        assert 0.5 * np.abs(freq - pi).sum() < 0.02

    def test_trace_exhausted(self):
        with pytest.raises(TraceExhausted):
            HarvestProcess("trace", power=(1.0, 2.0)).stream(3)

    def test_one_mah_over_eleven_slots(self):
        proc = phase_schedule(mah_to_charge(1.0), [(0, 10)], horizon=200)
        p = proc.stream(200)
        assert abs(p.sum() - 60.0) < 1e-9
        assert np.allclose(p[:11], 60.0 / 11)
        assert np.all(p[11:] == 0)

    def test_two_equal_phases(self):
        p = phase_schedule(60.0, [(0, 5), (90, 95)], horizon=200).stream(200)
        assert p[:6].sum() == pytest.approx(30.0, abs=1e-12)
        assert p[90:96].sum() == pytest.approx(30.0, abs=1e-12)

    def test_single_slot_phase(self):
        p = phase_schedule(42.0, [(7, 7)], horizon=10).stream(10)
        assert p[7] == 42.0 and p.sum() == 42.0

    def test_phase_errors(self):
        with pytest.raises(ValueError):
            phase_schedule(10.0, [])
        with pytest.raises(ValueError):
            phase_schedule(10.0, [(0, 5), (5, 8)])

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.5, 1e4), st.lists(st.tuples(st.integers(0, 30), st.integers(0, 5)),
                                         min_size=1, max_size=4))
    def test_phase_conserves_energy(self, energy, spans):
        phases, cursor = [], 0
        for gap, length in spans:
            start = cursor + gap
            phases.append((start, start + length))
            cursor = start + length + 1
        p = phase_schedule(energy, phases, horizon=cursor + 5).stream(cursor + 5)
        assert abs(p.sum() - energy) <= 1e-9 * max(1.0, energy)

    def test_uniform_units_stack(self):
        p = uniform_units(20.0, 180, 200, seed=1).stream(200)
        assert p.sum() == pytest.approx(3600.0)
        assert np.all(np.mod(p, 20.0) == 0)
        assert np.array_equal(p, uniform_units(20.0, 180, 200, seed=1).stream(200))


class TestBattery:
    def test_lossy_store(self):
        b = store_energy(Battery(0.0, 2400, 0.75), 20)
        assert b.level == 15.0

    def test_zero_harvest(self):
        b = Battery(33.0, 100, 0.8)
        assert store_energy(b, 0).level == 33.0

    def test_overflow_is_wasted(self):
        b = store_energy(Battery(99.0, 100.0, 0.8), 20)
        assert b.level == 100.0
        assert b.wasted == pytest.approx(15.0)

    def test_overdraw_rejected(self):
        with pytest.raises(ValueError):
            draw_energy(Battery(5.0, 100.0), 6.0)

    def test_half_full_default(self):
        assert Battery.half_full().level == 1200.0

    @given(st.floats(0, 100), st.floats(0.01, 1.0), st.lists(st.floats(0, 500), max_size=30))
    def test_level_stays_in_range(self, level, eta, harvests):
        b = Battery(level, 100.0, eta)
        for h in harvests:
            b = store_energy(b, h)
            assert 0.0 <= b.level <= b.capacity

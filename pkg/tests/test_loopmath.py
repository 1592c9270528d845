"""Loop identity and Nyquist margins on synthetic loci."""

import math

import numpy as np
import pytest

from lockboxsim.lockbox.loopmath import (
    closed_from_open,
    nyquist_margins,
    open_loop_from_closed,
)


class TestLoopIdentity:
    def test_unity_closed_gives_zero_open(self):
        g = open_loop_from_closed([1.0 + 0j])
        assert g[0] == 0.0

    def test_half_closed_gives_minus_one(self):
        g = open_loop_from_closed([0.5 + 0j])
        assert g[0] == -1.0

    def test_round_trip_to_1e12(self):
        rng = np.random.default_rng(7)
        g_open = (rng.normal(size=500) + 1j * rng.normal(size=500)).astype(complex)
        g_open = g_open[np.abs(1 - g_open) > 1e-3]
        g_closed = closed_from_open(g_open)
        back = open_loop_from_closed(g_closed)
        assert np.max(np.abs(back - g_open) / np.maximum(np.abs(g_open), 1e-9)) < 1e-12

    def test_background_subtraction(self):
        g_open = np.array([0.3 + 0.1j])
        bg = np.array([0.05 - 0.02j])
        g_meas = closed_from_open(g_open) + bg
        back = open_loop_from_closed(g_meas, background=bg)
        assert back[0] == pytest.approx(g_open[0])

    def test_near_zero_flagged_nan(self):
        g = open_loop_from_closed([1e-15 + 0j, 0.5 + 0j])
        assert np.isnan(g[0])
        assert g[1] == -1.0


def integrator_locus(f, ugf):
    # the loop convention puts the critical point at (1, 0): a stable
    # integrator loop reads G = -ugf/(i f)
    return -ugf / (1j * f)


class TestNyquistMargins:
    def test_pure_integrator_phase_margin_90(self):
        f = np.logspace(1, 5, 400)
        m = nyquist_margins(f, integrator_locus(f, 1e3))
        assert m.unity_gain_hz == pytest.approx(1e3, rel=1e-3)
        assert m.phase_margin_deg == pytest.approx(90.0, abs=0.5)

    def test_integrator_with_matched_pole_45_deg(self):
        # matched at crossover: integrator gain sqrt(2)*fc puts |G| = 1
        # exactly at the pole frequency, where the pole contributes
        # arctan(1) = 45 degrees of lag
        f = np.logspace(1, 5, 4000)
        fc = 1e3
        g = integrator_locus(f, math.sqrt(2) * fc) / (1 + 1j * f / fc)
        m = nyquist_margins(f, g)
        assert m.unity_gain_hz == pytest.approx(fc, rel=1e-3)
        assert m.phase_margin_deg == pytest.approx(45.0, abs=1.0)

    def test_resonance_sets_gain_margin_two(self):
        f = np.logspace(1, 5.5, 4000)
        f0, q = 60e3, 30.0
        res = 1.0 / (1 - (f / f0) ** 2 + 1j * f / (f0 * q))
        g = integrator_locus(f, 1e3) * res
        # scale so |G| at the zero-phase crossing equals 0.5
        m0 = nyquist_margins(f, g)
        g_scaled = g * (0.5 * m0.gain_margin)
        m = nyquist_margins(f, g_scaled)
        assert m.gain_margin == pytest.approx(2.0, abs=0.1)
        assert m.gain_margin_hz == pytest.approx(f0, rel=0.05)

    def test_missing_crossing_reported_none(self):
        f = np.logspace(1, 3, 50)
        g = -0.1 / (1j * f / 1e5)      # |G| << 1 everywhere, no 0-phase cross
        m = nyquist_margins(f, g * 1e-3)
        assert m.gain_margin is None

    def test_margin_consistency_gain_scaling(self):
        # raising the gain by exactly the gain margin moves the zero-phase
        # magnitude to 1.0
        f = np.logspace(1, 5.5, 4000)
        f0, q = 40e3, 10.0
        g = integrator_locus(f, 2e3) / (1 - (f / f0) ** 2 + 1j * f / (f0 * q))
        m = nyquist_margins(f, g)
        m2 = nyquist_margins(f, g * m.gain_margin)
        assert m2.gain_margin == pytest.approx(1.0, abs=0.02)

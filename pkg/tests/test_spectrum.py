"""Spectrum analyzer: ENBW values, Parseval normalization, tone power,
IQ-mode frequency mapping."""

import numpy as np
import pytest

from lockboxsim.core.fixedpoint import TICK_SECONDS
from lockboxsim.engine import Engine
from lockboxsim.instruments.spectrum import (
    SpectrumConfig,
    enbw,
    iq_mode_psd,
    welch_psd,
    window_samples,
)


class TestEnbw:
    def test_boxcar_is_one_over_n(self):
        for n in (64, 1000, 16384):
            assert enbw(np.ones(n)) == pytest.approx(1.0 / n, rel=1e-12)

    def test_rbw_relation(self):
        n, t = 16384, 8e-9
        w = np.ones(n)
        _, _, rbw = welch_psd(np.random.default_rng(0).normal(size=n), t,
                              SpectrumConfig(window="boxcar"))
        assert rbw == pytest.approx(enbw(w) / t)
        assert rbw == pytest.approx(1.0 / (n * t))

    def test_known_window_enbw_in_bins(self):
        # classic equivalent-noise-bandwidth values, in bins (x N)
        n = 4096
        assert enbw(window_samples("hamming", n)) * n == pytest.approx(1.363, abs=0.01)
        assert enbw(window_samples("blackman", n)) * n == pytest.approx(1.73, abs=0.02)
        assert enbw(window_samples("flattop", n)) * n == pytest.approx(3.77, abs=0.05)


class TestWelch:
    def test_white_noise_integrated_psd_equals_variance(self):
        rng = np.random.default_rng(42)
        sigma = 0.1
        x = rng.normal(0, sigma, 1 << 16)
        for win in ("boxcar", "hamming", "blackman", "flattop", "gaussian"):
            f, psd, _ = welch_psd(x, 8e-9, SpectrumConfig(window=win, averages=16))
            df = f[1] - f[0]
            total = psd.sum() * df
            assert total == pytest.approx(sigma**2, rel=0.05), win

    def test_fullscale_sine_peak_power_flattop(self):
        n = 1 << 14
        t = 8e-9
        k = 128                      # bin-centered tone
        a = 1.0
        x = a * np.sin(2 * np.pi * k * np.arange(n) / n)
        f, psd, rbw = welch_psd(x, t, SpectrumConfig(window="flattop"))
        peak = psd.max() * rbw
        # flattop scalloping loss is below 0.1 dB
        assert 10 * np.log10(peak / (a**2 / 2)) == pytest.approx(0.0, abs=0.1)

    def test_sine_between_bins_flattop_still_accurate(self):
        n = 1 << 14
        t = 8e-9
        x = np.sin(2 * np.pi * (128.5) * np.arange(n) / n)
        f, psd, rbw = welch_psd(x, t, SpectrumConfig(window="flattop"))
        peak = psd.max() * rbw
        assert 10 * np.log10(peak / 0.5) == pytest.approx(0.0, abs=0.1)

    def test_boxcar_parseval_exact(self):
        rng = np.random.default_rng(1)
        x = rng.normal(0, 1.0, 4096)
        f, psd, _ = welch_psd(x, 1e-6, SpectrumConfig(window="boxcar"))
        df = f[1] - f[0]
        assert psd.sum() * df == pytest.approx(np.mean(x**2), rel=1e-9)

    def test_too_short_trace_rejected(self):
        with pytest.raises(ValueError):
            welch_psd(np.zeros(32), 8e-9, SpectrumConfig(averages=16))


class TestIqModePsd:
    def test_tone_at_center_lands_in_center_bin(self):
        eng = Engine()
        eng.power_down_unused(["asg0", "iq1", "iq2", "scope"])
        f0 = 2e6
        eng.asg0.load_sine(1.0)
        eng.asg0.setup(frequency_hz=f0, scale=0.5)
        freqs, psd, _ = iq_mode_psd(eng, f0, decimation_shift=6,
                                    source="asg0")
        peak = freqs[np.argmax(psd)]
        df = freqs[1] - freqs[0]
        assert abs(peak - f0) <= df

    def test_tone_offset_appears_at_offset_bin(self):
        eng = Engine()
        eng.power_down_unused(["asg0", "iq1", "iq2", "scope"])
        f0 = 2e6
        delta = 40e3
        eng.asg0.load_sine(1.0)
        eng.asg0.setup(frequency_hz=f0 + delta, scale=0.5)
        freqs, psd, _ = iq_mode_psd(eng, f0, decimation_shift=6,
                                    source="asg0")
        df = freqs[1] - freqs[0]
        peak = freqs[np.argmax(psd)]
        assert abs(peak - (f0 + delta)) <= df

    def test_center_above_nyquist_rejected(self):
        eng = Engine()
        with pytest.raises(ValueError):
            iq_mode_psd(eng, 70e6)

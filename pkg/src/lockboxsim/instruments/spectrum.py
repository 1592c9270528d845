"""Spectrum estimation on scope traces: averaged windowed periodograms.

Baseband mode FFTs the real scope channels; IQ mode demodulates around a
center frequency with two phase-orthogonal IQ slots and FFTs the complex
quadrature series z = I + jQ, giving a narrow window around the center.

The normalization is one-sided V^2/Hz with the window power removed, so
the integrated density reproduces the trace variance for any window
(Parseval); multiplying a peak bin by the residual bandwidth
RBW = ENBW / T_sample recovers a tone's power A^2/2 (amplitude-sum
normalization).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window

from lockboxsim.core.fixedpoint import TICK_SECONDS

WINDOWS = ("blackman", "flattop", "boxcar", "hamming", "gaussian")


@dataclass
class SpectrumConfig:
    window: str = "blackman"
    averages: int = 1                 # non-overlapping segments per trace
    gaussian_std_fraction: float = 0.125
    one_sided: bool = True


def window_samples(name: str, n: int, gaussian_std_fraction: float = 0.125
                   ) -> np.ndarray:
    if name not in WINDOWS:
        raise ValueError(f"unknown window {name!r}; pick one of {WINDOWS}")
    if name == "gaussian":
        return get_window(("gaussian", n * gaussian_std_fraction), n,
                          fftbins=True)
    return get_window(name, n, fftbins=True)


def enbw(window: np.ndarray) -> float:
    """Equivalent noise bandwidth (sum f^2)/(sum f)^2 of the window samples.

    Dimensionless: multiply by 1/T_sample for the residual bandwidth in Hz.
    Boxcar of length N gives exactly 1/N.
    """
    w = np.asarray(window, dtype=np.float64)
    return float(np.sum(w * w) / np.sum(w) ** 2)


def welch_psd(trace, sample_interval: float, cfg: SpectrumConfig | None = None
              ) -> tuple[np.ndarray, np.ndarray, float]:
    """Averaged periodogram of a real trace.

    Returns (frequencies, psd, rbw_hz): one-sided V^2/Hz such that
    sum(psd)*df equals the trace variance for the boxcar window, and
    psd_peak * rbw recovers a centered tone's power.
    """
    cfg = cfg or SpectrumConfig()
    x = np.asarray(trace, dtype=np.float64)
    if cfg.averages < 1:
        raise ValueError("averages must be >= 1")
    nseg = len(x) // cfg.averages
    if nseg < 8:
        raise ValueError("trace too short for the requested averaging")
    w = window_samples(cfg.window, nseg, cfg.gaussian_std_fraction)
    scale = sample_interval / np.sum(w * w)
    acc = np.zeros(nseg // 2 + 1 if cfg.one_sided else nseg)
    for k in range(cfg.averages):
        seg = x[k * nseg:(k + 1) * nseg] * w
        if cfg.one_sided:
            spec = np.fft.rfft(seg)
            p = (np.abs(spec) ** 2) * scale
            p[1:] *= 2.0
            if nseg % 2 == 0:
                p[-1] /= 2.0
        else:
            p = (np.abs(np.fft.fft(seg)) ** 2) * scale
        acc += p
    acc /= cfg.averages
    if cfg.one_sided:
        freqs = np.fft.rfftfreq(nseg, sample_interval)
    else:
        freqs = np.fft.fftfreq(nseg, sample_interval)
    rbw = enbw(w) / sample_interval
    return freqs, acc, rbw


def complex_psd(z, sample_interval: float, cfg: SpectrumConfig | None = None
                ) -> tuple[np.ndarray, np.ndarray, float]:
    """Two-sided periodogram of a complex series, frequencies centered on 0."""
    cfg = cfg or SpectrumConfig()
    z = np.asarray(z, dtype=np.complex128)
    nseg = len(z) // cfg.averages
    if nseg < 8:
        raise ValueError("trace too short for the requested averaging")
    w = window_samples(cfg.window, nseg, cfg.gaussian_std_fraction)
    scale = sample_interval / np.sum(w * w)
    acc = np.zeros(nseg)
    for k in range(cfg.averages):
        seg = z[k * nseg:(k + 1) * nseg] * w
        acc += (np.abs(np.fft.fft(seg)) ** 2) * scale
    acc /= cfg.averages
    freqs = np.fft.fftfreq(nseg, sample_interval)
    order = np.argsort(freqs)
    rbw = enbw(w) / sample_interval
    return freqs[order], acc[order], rbw


def iq_mode_psd(engine, center_hz: float, decimation_shift: int = 6,
                source: str = "in1", cfg: SpectrumConfig | None = None,
                iq_a="iq1", iq_b="iq2", bandwidth_hz: float | None = None
                ) -> tuple[np.ndarray, np.ndarray, float]:
    """Narrow spectrum around center_hz from demodulated quadratures.

    Two IQ slots demodulate the same source 90 degrees apart; the scope
    records both quadrature outputs and the FFT of z = I + jQ yields the
    spectrum on a frequency axis centered at center_hz.
    """
    if center_hz >= 62.5e6:
        raise ValueError("center frequency above Nyquist")
    sample_interval = TICK_SECONDS * (1 << decimation_shift)
    span = 1.0 / sample_interval
    bw = bandwidth_hz if bandwidth_hz is not None else span
    # each slot's quadrature output is the cos-demodulated component; the
    # 90-degree-shifted slot therefore supplies the real part of z so that
    # a tone above center rotates z forward (peak at +delta)
    ma, mb = engine.modules[iq_a], engine.modules[iq_b]
    for m, phase in ((ma, 90.0), (mb, 0.0)):
        m.setup(frequency_hz=center_hz, phase_degrees=phase, gain=0.0,
                quadrature_factor=1.0, bandwidth_hz=(bw,),
                output_mux="quadrature")
        m.set("input_select", source)
    engine.run(int(4 / (2 * np.pi * min(bw, span)) / TICK_SECONDS) + 100)
    engine.scope.arm(ch1=iq_a, ch2=iq_b, decimation_shift=decimation_shift)
    engine.run_until_scope()
    tr_i, tr_q, _ = engine.scope.traces_volts()
    z = tr_i + 1j * tr_q     # a tone exactly at center lands in the DC bin
    freqs, psd, rbw = complex_psd(z, sample_interval, cfg)
    return freqs + center_hz, psd, rbw

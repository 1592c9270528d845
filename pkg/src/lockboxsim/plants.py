"""Simulated plants that close the analog loop around the DSP engine.

Three models: a Fabry-Perot cavity whose detuning is driven by a resonant
piezo actuator (reflection / transmission / dispersive error signals), a
two-laser beatnote source for phase locking, and a bare converter loopback.
Converter imperfections (effective 12-bit ADC / 11-bit DAC noise, group
delay) are part of each model and are seeded deterministically.

The per-tick physics runs inside the compiled kernel; this module holds
the configuration dataclasses, the derived-constant computation, and the
closed-form signal shapes used for calibration and testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from lockboxsim.core.fixedpoint import TICK_SECONDS
from lockboxsim.core.lehmer import seed_stream
from lockboxsim import kernel as K

# effective converter resolutions: noise RMS in 14-bit LSB units
ADC_NOISE_LSB14 = 4.0     # 12 effective bits
DAC_NOISE_LSB14 = 8.0     # 11 effective bits


@dataclass
class PiezoMode:
    freq_hz: float
    q: float
    weight: float


DEFAULT_PIEZO_DIRECT = 0.1    # stiffness feedthrough above the modal band
UNCOMP_MODE_HZ = 60e3         # the mode a compensator leaves uncorrected


def default_piezo_modes(total_weight: float = 1.0 - DEFAULT_PIEZO_DIRECT
                        ) -> list[PiezoMode]:
    """Ten compensatable modes log-spaced 25-90 kHz plus one at 60 kHz.

    In a loop that rolls off as 1/f, a mode limits the gain margin through
    its peak-response-to-frequency ratio (w*Q/f).  The ten main modes are
    drawn with that ratio within a factor of ~3 of the strongest one; the
    60 kHz mode, which a resonance-compensation filter deliberately leaves
    uncorrected, sits 20x weaker, so compensating the others buys roughly
    a decade of loop bandwidth at a fixed margin.  All weights are
    positive and, together with the direct stiffness path, sum to unit DC
    gain, which keeps the actuator minimum phase.
    """
    rng = np.random.default_rng(20240925)
    freqs = np.logspace(math.log10(25e3), math.log10(90e3), 10)
    x_max = 1e-3                      # typical w*Q/f, before normalization
    modes = []
    for i, f in enumerate(freqs):
        q = float(np.round(rng.uniform(150, 400)))
        # the lowest mode is deliberately dominant: it pins the gain margin
        # of an uncompensated loop an order of magnitude below what the
        # compensated loop can reach
        rho = 3.0 if i == 0 else float(rng.uniform(0.3, 1.0))
        w = rho * x_max * float(f) / q
        modes.append(PiezoMode(float(f), q, w))
    modes.append(PiezoMode(UNCOMP_MODE_HZ, 300.0,
                           0.05 * x_max * UNCOMP_MODE_HZ / 300.0))
    total = sum(m.weight for m in modes)
    for m in modes:
        m.weight *= total_weight / total
    return modes


@dataclass
class CavityPlant:
    """Fabry-Perot cavity + piezo actuator + converter models."""

    r_min: float = 0.2              # residual power reflection on resonance
    pdh_volts: float = 0.5          # dispersive beat amplitude scale
    reflection_volts: float = 0.8
    transmission_volts: float = 0.8
    eom_port: int = 0               # analog output carrying the modulation
    piezo_port: int = 1             # analog output driving the piezo
    piezo_gain: float = 40.0        # cavity bandwidths per volt, DC
    modes: list[PiezoMode] = field(default_factory=list)
    theta0: float = 0.0             # static detuning, bandwidth units
    disturbance_rms: float = 0.0    # detuning noise, bandwidth units
    disturbance_fc: float = 2e3     # shaping low-pass, Hz
    adc_noise: float = 0.0          # LSB14 rms
    dac_noise: float = 0.0
    adc_delay: int = 12             # ticks (~100 ns converter group delay)
    dac_delay: int = 13
    rc_fc: float = 0.0              # analog low-pass on the piezo drive, Hz
    adc1: str = "pd_combined"
    adc2: str = "transmission"
    displacement_probe_volts: float = 1.0
    piezo_direct: float | None = None   # stiffness feedthrough; None picks
                                        # 1.0 for a modeless piezo, else 0.1

    kind = "fabry_perot"
    _SIGNALS = {
        "pd_combined": K.SIG_PD_COMBINED,
        "reflection": K.SIG_REFLECTION,
        "transmission": K.SIG_TRANSMISSION,
        "displacement": K.SIG_DISPLACEMENT,
        "off": K.SIG_OFF,
    }

    def plant_type(self) -> int:
        return K.PLANT_CAVITY

    def fill_arrays(self, pcfg: np.ndarray, pderiv: np.ndarray, pi64: np.ndarray,
                    seed: int) -> None:
        if len(self.modes) > 12:
            raise ValueError("at most 12 piezo modes supported")
        pcfg[:] = 0.0
        pderiv[:] = 0.0
        pcfg[K.PC_RMIN] = self.r_min
        pcfg[K.PC_PDH_V] = self.pdh_volts
        pcfg[K.PC_REFL_V] = self.reflection_volts
        pcfg[K.PC_TRANS_V] = self.transmission_volts
        pcfg[K.PC_EOM_PORT] = float(self.eom_port)
        pcfg[K.PC_PIEZO_PORT] = float(self.piezo_port)
        pcfg[K.PC_PIEZO_GAIN] = self.piezo_gain
        pcfg[K.PC_NMODES] = float(len(self.modes))
        for m_i, m in enumerate(self.modes):
            pcfg[K.PC_MODE_BASE + 3 * m_i + 0] = m.freq_hz
            pcfg[K.PC_MODE_BASE + 3 * m_i + 1] = m.q
            pcfg[K.PC_MODE_BASE + 3 * m_i + 2] = m.weight
            p, g = mode_discrete_constants(m.freq_hz, m.q, m.weight)
            pderiv[K.PD_MODE_BASE + 4 * m_i + 0] = p.real
            pderiv[K.PD_MODE_BASE + 4 * m_i + 1] = p.imag
            pderiv[K.PD_MODE_BASE + 4 * m_i + 2] = g.real
            pderiv[K.PD_MODE_BASE + 4 * m_i + 3] = g.imag
        pcfg[K.PC_THETA0] = self.theta0
        pcfg[K.PC_DIST_RMS] = self.disturbance_rms
        pcfg[K.PC_DIST_FC] = self.disturbance_fc
        pcfg[K.PC_ADC_NOISE] = self.adc_noise
        pcfg[K.PC_DAC_NOISE] = self.dac_noise
        pcfg[K.PC_ADC_DELAY] = float(self.adc_delay)
        pcfg[K.PC_DAC_DELAY] = float(self.dac_delay)
        pcfg[K.PC_RC_FC] = self.rc_fc
        pcfg[K.PC_ADC1_SEL] = float(self._SIGNALS[self.adc1])
        pcfg[K.PC_ADC2_SEL] = float(self._SIGNALS[self.adc2])
        pcfg[K.PC_DISP_PROBE_V] = self.displacement_probe_volts
        if self.piezo_direct is None:
            pcfg[K.PC_WDIRECT] = 1.0 if not self.modes else DEFAULT_PIEZO_DIRECT
        else:
            pcfg[K.PC_WDIRECT] = self.piezo_direct
        pderiv[K.PD_ALPHA_RC] = one_pole_alpha(self.rc_fc)
        alpha = one_pole_alpha(self.disturbance_fc)
        pderiv[K.PD_DIST_ALPHA] = alpha
        # white-noise drive scaled so the filtered output has the target rms
        if alpha > 0.0:
            gain = math.sqrt(alpha / (2.0 - alpha))
            pderiv[K.PD_DIST_SCALE] = self.disturbance_rms / gain
        for k in range(5):
            pi64[k] = seed_stream(seed, 16 + k)


@dataclass
class LaserPairPlant:
    """Two free-running lasers and their beatnote photodiode."""

    beat_offset_hz: float = 9e6     # |nu2 - nu1| at t = 0
    fast_port: int = 0
    fast_gain: float = 3e5          # Hz per volt
    fast_fc: float = 1e5            # fast piezo bandwidth
    slow_port: int = 1
    slow_gain: float = 3e6          # high-voltage amplifier path
    slow_fc: float = 10.0
    temp_slot: int = -1             # DSP slot driving the crystal temperature
    temp_gain: float = 0.0          # Hz per second at full-scale drive
    amplitude_volts: float = 0.5
    adc_noise: float = ADC_NOISE_LSB14
    freq_noise_hz: float = 0.0      # white frequency noise rms per tick
    adc_delay: int = 12
    dac_delay: int = 13

    kind = "laser_pair"

    def plant_type(self) -> int:
        return K.PLANT_LASER_PAIR

    def fill_arrays(self, pcfg, pderiv, pi64, seed: int) -> None:
        pcfg[:] = 0.0
        pderiv[:] = 0.0
        pcfg[K.LP_NU0] = self.beat_offset_hz
        pcfg[K.LP_FAST_PORT] = float(self.fast_port)
        pcfg[K.LP_FAST_GAIN] = self.fast_gain
        pcfg[K.LP_FAST_FC] = self.fast_fc
        pcfg[K.LP_SLOW_PORT] = float(self.slow_port)
        pcfg[K.LP_SLOW_GAIN] = self.slow_gain
        pcfg[K.LP_SLOW_FC] = self.slow_fc
        pcfg[K.LP_TEMP_SLOT] = float(self.temp_slot)
        pcfg[K.LP_TEMP_GAIN] = self.temp_gain
        pcfg[K.LP_AMP_V] = self.amplitude_volts
        pcfg[K.LP_ADC_NOISE] = self.adc_noise
        pcfg[K.LP_FNOISE] = self.freq_noise_hz
        pcfg[K.LP_ADC_DELAY] = float(self.adc_delay)
        pcfg[K.LP_DAC_DELAY] = float(self.dac_delay)
        pderiv[K.LD_ALPHA_FAST] = one_pole_alpha(self.fast_fc)
        pderiv[K.LD_ALPHA_SLOW] = one_pole_alpha(self.slow_fc)
        for k in range(5):
            pi64[k] = seed_stream(seed, 16 + k)


@dataclass
class LoopbackPlant:
    """ADC directly fed from the DAC through the converter models."""

    adc_noise: float = 0.0
    dac_noise: float = 0.0
    adc_delay: int = 0
    dac_delay: int = 0

    kind = "loopback"

    def plant_type(self) -> int:
        return K.PLANT_LOOPBACK

    def fill_arrays(self, pcfg, pderiv, pi64, seed: int) -> None:
        pcfg[:] = 0.0
        pderiv[:] = 0.0
        pcfg[K.LB_ADC_NOISE] = self.adc_noise
        pcfg[K.LB_DAC_NOISE] = self.dac_noise
        pcfg[K.LB_ADC_DELAY] = float(self.adc_delay)
        pcfg[K.LB_DAC_DELAY] = float(self.dac_delay)
        for k in range(5):
            pi64[k] = seed_stream(seed, 16 + k)


def one_pole_alpha(fc_hz: float) -> float:
    """Exact per-tick smoothing factor of a first-order low-pass."""
    if fc_hz <= 0.0:
        return 0.0
    return 1.0 - math.exp(-2.0 * math.pi * fc_hz * TICK_SECONDS)


def mode_discrete_constants(freq_hz: float, q: float, weight: float
                            ) -> tuple[complex, complex]:
    """Discrete-time (pole, input gain) of one piezo resonance.

    The continuous mode weight*w0^2 / (s^2 + w0 s / Q + w0^2) is split into
    a conjugate pole pair; one complex first-order state per mode evolves as
    m <- p*m + g*x with displacement contribution 2*Re(m).  The input gain
    is renormalized so the discrete DC response equals the modal weight
    exactly.
    """
    w0 = 2.0 * math.pi * freq_hz
    gamma = w0 / (2.0 * q)
    wd = w0 * math.sqrt(max(0.0, 1.0 - 1.0 / (4.0 * q * q)))
    s_pole = complex(-gamma, wd)
    r = weight * w0 * w0 / (2j * wd)
    p = np.exp(s_pole * TICK_SECONDS)
    g = TICK_SECONDS * r
    dc = 2.0 * (g / (1.0 - p)).real
    if dc != 0.0:
        g *= weight / dc
    return complex(p), complex(g)


def piezo_response(modes: list[PiezoMode], freqs_hz,
                   direct: float = 0.0) -> np.ndarray:
    """Analytic displacement-per-volt response: direct path + modal sum."""
    f = np.asarray(freqs_hz, dtype=np.float64)
    s = 2j * np.pi * f
    h = np.full(len(f), complex(direct), dtype=np.complex128)
    if not modes and direct == 0.0:
        return np.ones(len(f), dtype=np.complex128)
    for m in modes:
        w0 = 2.0 * math.pi * m.freq_hz
        h += m.weight * w0 * w0 / (s * s + w0 / m.q * s + w0 * w0)
    return h


def cavity_outputs(r_min: float, theta: float,
                   optical_gain: float = 1.0) -> tuple[float, float, float]:
    """Closed-form (reflection, transmission, pdh) shapes at detuning theta.

    reflection(0) = r_min, reflection(+-inf) = 1; the dispersive signal is
    odd and peaks at theta = +-1 (sidebands outside the linewidth).
    """
    lor = 1.0 / (1.0 + theta * theta)
    reflection = r_min + (1.0 - r_min) * theta * theta * lor
    transmission = lor
    pdh = optical_gain * theta * lor
    return reflection, transmission, pdh

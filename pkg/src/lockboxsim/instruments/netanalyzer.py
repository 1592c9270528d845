"""Swept-sine network analyzer built on an IQ slot.

Per point: write the frequency word, wait ``sleep_cycles`` for the system
under test to settle, accumulate the demodulated quadratures over
``na_cycles`` ticks in the 62-bit accumulators, then normalize by the
cycle count and the commanded excitation amplitude.  The known routing
pipeline delay is divided out of the measured phase.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from lockboxsim.core.fixedpoint import TICK_SECONDS
from lockboxsim.engine import SLOT_INDEX


@dataclass
class NaSweepConfig:
    start_hz: float
    stop_hz: float
    points: int
    amplitude_volts: float = 0.1
    logscale: bool = True
    rbw_hz: float = 0.0              # > 0 derives na_cycles from the bandwidth
    na_cycles: int = 0               # explicit accumulation window (ticks)
    sleep_cycles: int = -1           # -1: same as na_cycles
    avg_per_point: int = 1
    reverse_order: bool = False
    zero_span: bool = False          # retrigger at start_hz, points times
    auto_amplitude: bool = False
    target_input_volts: float = 0.5  # |response| target when auto_amplitude
    min_amplitude_volts: float = 1e-3
    max_amplitude_volts: float = 1.0
    input: str = "in1"               # demodulator source
    output_select: str = "off"       # where the excitation goes
    bandwidth_hz: float | None = None  # quadrature low-pass; None: from rbw
    ac_bandwidth_hz: float = 0.0
    delay_ticks: int = 1             # known pipeline delay to divide out
    allow_feedback_sum: bool = False
    extra_points_hz: list[float] = field(default_factory=list)

    def frequency_list(self) -> np.ndarray:
        if self.zero_span:
            return np.full(self.points, self.start_hz)
        if self.points < 1:
            raise ValueError("points must be >= 1")
        if self.points == 1:
            f = np.array([self.start_hz])
        elif self.logscale:
            if self.start_hz <= 0:
                raise ValueError("logscale sweep needs start > 0")
            f = np.logspace(math.log10(self.start_hz),
                            math.log10(self.stop_hz), self.points)
        else:
            f = np.linspace(self.start_hz, self.stop_hz, self.points)
        if self.extra_points_hz:
            f = np.unique(np.concatenate([f, np.asarray(self.extra_points_hz)]))
        if self.reverse_order:
            f = f[::-1]
        return f

    def cycles_for(self, freq_hz: float) -> int:
        if self.na_cycles > 0:
            return self.na_cycles
        if self.rbw_hz > 0:
            # boxcar accumulation: ENBW = 1/N, so N = 1/(RBW * T)
            return max(64, int(round(1.0 / (self.rbw_hz * TICK_SECONDS))))
        # default: at least 16 periods or 50 us, whichever is longer
        per = int(16.0 / max(freq_hz, 1.0) / TICK_SECONDS)
        return max(per, 6250)


def na_sweep(engine, cfg: NaSweepConfig, iq_name: str = "iq0",
             progress=None) -> list[tuple[float, complex]]:
    """Run a full sweep; returns [(frequency_hz, complex response G)].

    The response is normalized so a direct loopback reads G = 1 + 0j.
    """
    iq = engine.modules[iq_name]
    _check_routing(engine, cfg, iq)
    bw = cfg.bandwidth_hz
    if bw is None:
        bw = max(cfg.rbw_hz, 1e3) if cfg.rbw_hz > 0 else 10e3
    amp = cfg.amplitude_volts
    iq.setup(frequency_hz=cfg.start_hz, phase_degrees=0.0,
             amplitude_volts=amp, gain=0.0, quadrature_factor=0.0,
             bandwidth_hz=(bw,), ac_bandwidth_hz=cfg.ac_bandwidth_hz,
             output_mux="output_direct")
    iq.set("input_select", cfg.input)
    iq.set("output_select", cfg.output_select)

    results: list[tuple[float, complex]] = []
    freqs = cfg.frequency_list()
    for idx, f in enumerate(freqs):
        iq.set("frequency_hz", f)
        if cfg.auto_amplitude and results:
            _, g_prev = results[-1]
            if abs(g_prev) > 1e-12:
                amp = min(max(cfg.target_input_volts / abs(g_prev),
                              cfg.min_amplitude_volts),
                          cfg.max_amplitude_volts)
                iq.set("amplitude_volts", amp)
        cycles = cfg.cycles_for(f)
        sleep = cfg.sleep_cycles if cfg.sleep_cycles >= 0 else cycles
        acc = 0j
        for _ in range(cfg.avg_per_point):
            iq.na_start(sleep, cycles)
            engine.run_until_na()
            acc += iq.na_result()
            sleep = 0      # settled after the first average
        g = acc / cfg.avg_per_point
        # divide out the known pipeline delay
        f_real = iq.get("frequency_hz")
        g *= cmath.exp(2j * math.pi * f_real * TICK_SECONDS * cfg.delay_ticks)
        results.append((float(f), g))
        if progress is not None:
            progress(idx + 1, len(freqs), float(f), g)
    return results


def _check_routing(engine, cfg: NaSweepConfig, iq) -> None:
    """Reject sweeps whose excitation is summed into their own input without
    the caller acknowledging the feedback (closed-loop measurements must
    subtract a background or set allow_feedback_sum)."""
    if cfg.allow_feedback_sum:
        return
    src = SLOT_INDEX[cfg.input]
    out = cfg.output_select
    if out in ("out1", "both") and src == SLOT_INDEX["out1"] and _others_feed(engine, 0, iq):
        raise ValueError("excitation and other modules sum into out1, which "
                         "feeds the analyzer input; set allow_feedback_sum "
                         "for closed-loop measurements")
    if out in ("out2", "both") and src == SLOT_INDEX["out2"] and _others_feed(engine, 1, iq):
        raise ValueError("excitation and other modules sum into out2, which "
                         "feeds the analyzer input; set allow_feedback_sum "
                         "for closed-loop measurements")


def _others_feed(engine, dac_ch: int, iq) -> bool:
    import lockboxsim.kernel as K
    want = (K.OUT_1, K.OUT_BOTH) if dac_ch == 0 else (K.OUT_2, K.OUT_BOTH)
    for slot in range(K.N_SLOTS):
        if slot == iq.slot or engine.mod_type[slot] in (K.TYPE_OFF, K.TYPE_DAC):
            continue
        if int(engine.out_sel[slot]) in want:
            return True
    return False

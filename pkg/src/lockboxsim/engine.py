"""Engine facade: owns the state arrays, drives the compiled kernel, and
exposes each DSP slot through a typed module wrapper.

The default instantiation mirrors the hardware: two analog inputs, two
analog outputs, 2 signal generators, 3 PIDs, 3 IQ demodulators, one IIR
filter and a two-channel scope, all connected through a 16-slot router.
Every configurable quantity is a *field* with an integer register code
behind it; the register map, the config file and the HTTP API all read and
write the same fields, so the three access paths can never disagree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from lockboxsim import kernel as K
from lockboxsim.core.fixedpoint import (
    CLOCK_HZ,
    TICK_SECONDS,
    frequency_word,
    round_half_even,
    sat14,
    word_to_frequency,
)
from lockboxsim.core.lehmer import seed_stream
from lockboxsim.core.sinelut import build_table
from lockboxsim.iir.design import BiquadTable
from lockboxsim.core.fixedpoint import quantize_coeff

SLOT_NAMES = [
    "in1", "in2", "out1", "out2",
    "asg0", "asg1",
    "pid0", "pid1", "pid2",
    "iq0", "iq1", "iq2",
    "iir",
    "scope",
    "spare0", "spare1",
]
SLOT_INDEX = {n: i for i, n in enumerate(SLOT_NAMES)}
SLOT_INDEX["off"] = -1

SLOT_IN1, SLOT_IN2, SLOT_OUT1, SLOT_OUT2 = 0, 1, 2, 3
SLOT_ASG0, SLOT_ASG1 = 4, 5
SLOT_PID0, SLOT_PID1, SLOT_PID2 = 6, 7, 8
SLOT_IQ0, SLOT_IQ1, SLOT_IQ2 = 9, 10, 11
SLOT_IIR = 12
SLOT_SCOPE = 13

OUTPUT_SELECT = {"off": K.OUT_OFF, "out1": K.OUT_1, "out2": K.OUT_2, "both": K.OUT_BOTH}
IQ_MUX = {"quadrature": K.MUX_QUADRATURE, "output_direct": K.MUX_OUTPUT_DIRECT,
          "cordic_phase": K.MUX_CORDIC}
FILTER_MODES = {"off": K.FILT_OFF, "lowpass": K.FILT_LP, "highpass": K.FILT_HP}

PHASE_LSB_RAD = math.pi / (1 << 11)      # CORDIC phase register scaling


@dataclass
class Field:
    """One named register: python-domain accessors plus its u32 wire code."""

    name: str
    getter: Callable[[], object]
    setter: Callable[[object], None] | None
    code_get: Callable[[], int]
    code_set: Callable[[int], None] | None
    in_config: bool = True
    doc: str = ""

    @property
    def writable(self) -> bool:
        return self.setter is not None


def _u32(v: int) -> int:
    return int(v) & 0xFFFFFFFF


def _s32(code: int) -> int:
    code &= 0xFFFFFFFF
    return code - (1 << 32) if code >= (1 << 31) else code


class Module:
    """Base wrapper for one router slot."""

    def __init__(self, engine: "Engine", slot: int, name: str):
        self.engine = engine
        self.slot = slot
        self.name = name
        self.fields: dict[str, Field] = {}
        self._build_fields()

    # -- register plumbing -------------------------------------------------
    def _S(self, off: int) -> int:
        return int(self.engine.S[self.slot, off])

    def _setS(self, off: int, v: int) -> None:
        self.engine.S[self.slot, off] = int(v)

    def add_field(self, name: str, getter, setter, code_get, code_set,
                  in_config=True, doc=""):
        self.fields[name] = Field(name, getter, setter, code_get, code_set,
                                  in_config, doc)

    def raw_field(self, name, off, lo=None, hi=None, in_config=True, doc=""):
        def setter(v):
            v = int(v)
            if lo is not None and not (lo <= v <= hi):
                raise ValueError(f"{self.name}.{name}={v} outside [{lo}, {hi}]")
            self._setS(off, v)
        self.add_field(name, lambda: self._S(off), setter,
                       lambda: _u32(self._S(off)),
                       lambda c: setter(_s32(c)), in_config, doc)

    def volts_field(self, name, off, in_config=True, doc=""):
        self.add_field(
            name,
            lambda: self._S(off) / 8191.0,
            lambda v: self._setS(off, sat14(round_half_even(float(v) * 8191.0))),
            lambda: _u32(self._S(off)),
            lambda c: self._setS(off, sat14(_s32(c))),
            in_config, doc)

    def freq_field(self, name, off, in_config=True, doc=""):
        self.add_field(
            name,
            lambda: word_to_frequency(self._S(off)),
            lambda v: self._setS(off, frequency_word(float(v))),
            lambda: _u32(self._S(off)),
            lambda c: self._setS(off, _u32(c)),
            in_config, doc)

    def q12_field(self, name, off, limit=512.0, in_config=True, doc=""):
        def setter(v):
            v = float(v)
            if abs(v) > limit:
                raise ValueError(f"{self.name}.{name}={v} outside +-{limit}")
            self._setS(off, round_half_even(v * 4096.0))
        self.add_field(name, lambda: self._S(off) / 4096.0, setter,
                       lambda: _u32(self._S(off)),
                       lambda c: self._setS(off, _s32(c)), in_config, doc)

    def enum_field(self, name, off, mapping: dict, in_config=True, doc=""):
        rev = {v: k for k, v in mapping.items()}
        def setter(v):
            if v not in mapping:
                raise ValueError(f"{self.name}.{name}: unknown option {v!r}")
            self._setS(off, mapping[v])
        def code_set(c):
            c = _s32(c)
            if c not in rev:
                raise ValueError(f"{self.name}.{name}: invalid code {c}")
            self._setS(off, c)
        self.add_field(name, lambda: rev[self._S(off)], setter,
                       lambda: _u32(self._S(off)), code_set, in_config, doc)

    def _build_fields(self) -> None:
        if self.slot >= 0 and self.name not in ("scope",):
            eng = self.engine
            slot = self.slot
            def set_input(v):
                eng.in_sel[slot] = SLOT_INDEX[v] if isinstance(v, str) else int(v)
            self.add_field(
                "input_select",
                lambda: SLOT_NAMES[eng.in_sel[slot]] if eng.in_sel[slot] >= 0 else "off",
                set_input,
                lambda: _u32(int(eng.in_sel[slot])),
                lambda c: eng.in_sel.__setitem__(slot, _s32(c)),
                doc="source slot feeding this module")
            def set_output(v):
                eng.out_sel[slot] = OUTPUT_SELECT[v] if isinstance(v, str) else int(v)
            rev = {v: k for k, v in OUTPUT_SELECT.items()}
            self.add_field(
                "output_select",
                lambda: rev[int(eng.out_sel[slot])],
                set_output,
                lambda: _u32(int(eng.out_sel[slot])),
                lambda c: eng.out_sel.__setitem__(slot, _s32(c)),
                doc="analog output routing of output_direct")

    # -- live values -------------------------------------------------------
    @property
    def output_signal(self) -> int:
        return int(self.engine.sig[self.slot])

    @property
    def output_direct(self) -> int:
        return int(self.engine.dirout[self.slot])

    def get(self, name: str):
        return self.fields[name].getter()

    def set(self, name: str, value) -> None:
        f = self.fields[name]
        if f.setter is None:
            raise ValueError(f"{self.name}.{name} is read-only")
        f.setter(value)

    def state_dict(self) -> dict:
        return {n: f.getter() for n, f in self.fields.items() if f.in_config}

    def load_state(self, d: dict) -> None:
        for k, v in d.items():
            if k not in self.fields:
                raise KeyError(f"{self.name}: unknown field {k!r}")
            self.set(k, v)


class InputModule(Module):
    def _build_fields(self):
        pass  # channel binding is fixed; no configuration


class DacModule(Module):
    def _build_fields(self):
        pass


class AsgModule(Module):
    """Arbitrary signal generator: 2^14-sample table, NCO, trigger modes."""

    def _build_fields(self):
        super()._build_fields()
        self.freq_field("frequency_hz", K.A_FWORD)
        self.raw_field("amplitude_scale_q14", K.A_SCALE, -(1 << 16), 1 << 16,
                       doc="waveform scale, 16384 = 1.0")
        self.volts_field("offset_volts", K.A_OFFSET)
        self.raw_field("trigger_mode", K.A_TRIGMODE, 0, 2,
                       doc="0 continuous, 1 single burst, 2 delayed trigger")
        self.raw_field("trigger_delay_ticks", K.A_DELAY, 0, 1 << 40)
        self.raw_field("prng_enabled", K.A_PRNG_EN, 0, 1)
        self.raw_field("run_state", K.A_RUNSTATE, 0, 2, in_config=False,
                       doc="0 hold offset, 1 waiting delay, 2 running")

    @property
    def wave_id(self) -> int:
        return self.slot - SLOT_ASG0

    def load_waveform(self, samples) -> None:
        w = np.asarray(samples, dtype=np.int64)
        if w.shape != (16384,):
            raise ValueError("waveform must hold exactly 2^14 samples")
        np.clip(w, -8192, 8191, out=w)
        self.engine.wave[self.wave_id, :] = w

    def load_sine(self, amplitude: float = 1.0) -> None:
        n = np.arange(16384)
        self.load_waveform(np.rint(amplitude * 8191.0 * np.sin(2 * np.pi * n / 16384)))

    def load_ramp(self, lo: float = -1.0, hi: float = 1.0) -> None:
        """Symmetric triangle spanning [lo, hi] volts, one period per table."""
        n = np.arange(16384)
        tri = 2.0 * np.abs(n / 16384.0 - 0.5) - 0.5   # starts at +0.5, vee shape
        mid, half = (hi + lo) / 2.0, (hi - lo) / 2.0
        self.load_waveform(np.rint(8191.0 * (mid + 2 * half * tri)))

    def setup(self, frequency_hz=None, scale=1.0, offset_volts=0.0,
              trigger_mode=0, trigger_delay_ticks=0, prng=False,
              phase_word=0, start=True) -> None:
        if frequency_hz is not None:
            self.set("frequency_hz", frequency_hz)
        self._setS(K.A_SCALE, round_half_even(scale * 16384))
        self.set("offset_volts", offset_volts)
        self._setS(K.A_TRIGMODE, trigger_mode)
        self._setS(K.A_DELAY, trigger_delay_ticks)
        self._setS(K.A_PRNG_EN, 1 if prng else 0)
        if prng:
            self._setS(K.A_PRNG, seed_stream(self.engine.seed, 8 + self.wave_id))
        self._setS(K.A_PHASE, phase_word & 0xFFFFFFFF)
        self._setS(K.A_RUNSTATE, 2 if (start and trigger_mode != 2) else 0)

    def trigger(self) -> None:
        """Arm the delayed trigger (or restart a single burst)."""
        if self._S(K.A_TRIGMODE) == K.ASG_DELAYED and self._S(K.A_DELAY) > 0:
            self._setS(K.A_DELAYCNT, self._S(K.A_DELAY))
            self._setS(K.A_RUNSTATE, 1)
        else:
            self._setS(K.A_PHASE, 0)
            self._setS(K.A_RUNSTATE, 2)


class PidModule(Module):
    """PID with 4 selectable first-order prefilters, ival access, saturation."""

    def _build_fields(self):
        super()._build_fields()
        self.volts_field("setpoint_volts", K.P_SETPOINT)
        self.add_field(
            "gain_i",
            lambda: self._S(K.P_KI) / (TICK_SECONDS * 2.0**32),
            lambda v: self._setS(K.P_KI, round_half_even(float(v) * TICK_SECONDS * 2.0**32)),
            lambda: _u32(self._S(K.P_KI)),
            lambda c: self._setS(K.P_KI, _s32(c)),
            doc="integral gain, 1/s")
        self.add_field(
            "gain_p",
            lambda: self._S(K.P_KP) / 65536.0,
            lambda v: self._setS(K.P_KP, round_half_even(float(v) * 65536.0)),
            lambda: _u32(self._S(K.P_KP)),
            lambda c: self._setS(K.P_KP, _s32(c)),
            doc="proportional gain")
        self.add_field(
            "gain_d",
            lambda: self._S(K.P_KD) * TICK_SECONDS / 65536.0,
            lambda v: self._setS(K.P_KD, round_half_even(float(v) / TICK_SECONDS * 65536.0)),
            lambda: _u32(self._S(K.P_KD)),
            lambda c: self._setS(K.P_KD, _s32(c)),
            doc="derivative gain, s")
        self.add_field(
            "ival_volts",
            lambda: self._S(K.P_IVAL) / 2.0**32 / 8191.0,
            lambda v: self._setS(K.P_IVAL, round_half_even(float(v) * 8191.0) << 32),
            lambda: _u32(self._S(K.P_IVAL) >> 14),
            lambda c: self._setS(K.P_IVAL, _s32(c) << 14),
            in_config=False,
            doc="integrator register, directly writable")
        self.volts_field("min_volts", K.P_MIN)
        self.volts_field("max_volts", K.P_MAX)
        for st in range(4):
            self.raw_field(f"filter{st}_mode", K.P_F_MODE + st, 0, 2,
                           doc="0 off, 1 lowpass, 2 highpass")
            self.raw_field(f"filter{st}_shift", K.P_F_SHIFT + st, 0, 30,
                           doc="cutoff = power-of-two smoothing factor 2^-shift")

    def setup(self, gain_i=0.0, gain_p=0.0, gain_d=0.0, setpoint_volts=0.0,
              min_volts=-1.0, max_volts=1.0) -> None:
        self.set("gain_i", gain_i)
        self.set("gain_p", gain_p)
        self.set("gain_d", gain_d)
        self.set("setpoint_volts", setpoint_volts)
        self.set("min_volts", min_volts)
        self.set("max_volts", max_volts)

    def set_prefilter(self, stage: int, mode: str, fc_hz: float = 0.0) -> None:
        self._setS(K.P_F_MODE + stage, FILTER_MODES[mode])
        if mode != "off":
            self._setS(K.P_F_SHIFT + stage, cutoff_to_shift(fc_hz))
        self._setS(K.P_F_ACC + stage, 0)

    @property
    def filtered_input(self) -> int:
        return self._S(K.P_LASTIN)


class IqModule(Module):
    """Demodulator/modulator with CORDIC phase path and NA accumulators."""

    def _build_fields(self):
        super()._build_fields()
        self.freq_field("frequency_hz", K.Q_FWORD)
        self.add_field(
            "phase_degrees",
            lambda: self._S(K.Q_PHASEOFS) / (1 << 32) * 360.0,
            lambda v: self._setS(K.Q_PHASEOFS,
                                 round_half_even((float(v) % 360.0) / 360.0 * (1 << 32)) & 0xFFFFFFFF),
            lambda: _u32(self._S(K.Q_PHASEOFS)),
            lambda c: self._setS(K.Q_PHASEOFS, _u32(c)),
            doc="output phase shift at the center frequency")
        self.raw_field("ac_shift", K.Q_NAC, 0, 30,
                       doc="input high-pass smoothing shift, 0 = DC coupled")
        self.raw_field("bw1_shift", K.Q_NBW1, 0, 30)
        self.raw_field("bw2_shift", K.Q_NBW2, 0, 30)
        self.q12_field("gain", K.Q_GAIN, limit=32.0,
                       doc="remodulation gain; 0 decouples the stages")
        self.volts_field("amplitude_volts", K.Q_AMP)
        self.q12_field("quadrature_factor", K.Q_QF, limit=4096.0)
        self.enum_field("output_mux", K.Q_MUX, IQ_MUX)

    def setup(self, frequency_hz, phase_degrees=0.0, amplitude_volts=0.0,
              gain=0.0, quadrature_factor=0.0, bandwidth_hz=(),
              ac_bandwidth_hz=0.0, output_mux="quadrature") -> None:
        self.set("frequency_hz", frequency_hz)
        self.set("phase_degrees", phase_degrees)
        self.set("amplitude_volts", amplitude_volts)
        self.set("gain", gain)
        self.set("quadrature_factor", quadrature_factor)
        bws = list(bandwidth_hz) if not np.isscalar(bandwidth_hz) else [bandwidth_hz]
        self._setS(K.Q_NBW1, cutoff_to_shift(bws[0]) if len(bws) > 0 and bws[0] > 0 else 0)
        self._setS(K.Q_NBW2, cutoff_to_shift(bws[1]) if len(bws) > 1 and bws[1] > 0 else 0)
        self._setS(K.Q_NAC, cutoff_to_shift(ac_bandwidth_hz) if ac_bandwidth_hz > 0 else 0)
        self.set("output_mux", output_mux)
        for off in (K.Q_ACACC, K.Q_I_ACC1, K.Q_I_ACC2, K.Q_Q_ACC1, K.Q_Q_ACC2,
                    K.Q_I, K.Q_Q, K.Q_CPHASE, K.Q_CTURN, K.Q_CQUAD, K.Q_CVALID):
            self._setS(off, 0)

    @property
    def bandwidth_hz(self) -> tuple[float, ...]:
        """Realized (power-of-two) low-pass cutoffs, Hz."""
        out = []
        for off in (K.Q_NBW1, K.Q_NBW2):
            n = self._S(off)
            if n > 0:
                out.append(shift_to_cutoff(n))
        return tuple(out)

    @property
    def quadratures(self) -> tuple[int, int]:
        return self._S(K.Q_I), self._S(K.Q_Q)

    @property
    def cordic_phase_rad(self) -> float:
        return self._S(K.Q_CPHASE) * PHASE_LSB_RAD

    # -- network-analyzer accumulation ------------------------------------
    def na_start(self, sleep_cycles: int, na_cycles: int) -> None:
        if na_cycles < 1:
            raise ValueError("na_cycles must be positive")
        self.engine.status[K.ST_NA_DONE] &= ~(1 << self.slot)
        self.engine.status[K.ST_NA_OVF] &= ~(1 << self.slot)
        self._setS(K.Q_NA_SUMI, 0)
        self._setS(K.Q_NA_SUMQ, 0)
        self._setS(K.Q_NA_OVF, 0)
        self._setS(K.Q_NA_TOTAL, na_cycles)
        self._setS(K.Q_NA_CYC, na_cycles)
        self._setS(K.Q_NA_SLEEP, sleep_cycles)

    @property
    def na_done(self) -> bool:
        return bool(self.engine.status[K.ST_NA_DONE] & (1 << self.slot))

    @property
    def na_overflow(self) -> bool:
        return self._S(K.Q_NA_OVF) != 0

    def na_result(self) -> complex:
        """Averaged quadrature sum normalized to the excitation amplitude."""
        if self.na_overflow:
            raise OverflowError("62-bit network-analyzer accumulator overflow")
        cycles = self._S(K.Q_NA_TOTAL)
        amp = self._S(K.Q_AMP)
        if amp == 0:
            raise ValueError("na_result undefined with zero excitation amplitude")
        scale = cycles * amp * 512.0      # amp * 2^10 / 2 per earlier derivation
        return complex(self._S(K.Q_NA_SUMI) / scale, self._S(K.Q_NA_SUMQ) / scale)


class IirModule(Module):
    """Sequential-biquad runtime: one section per tick, 3.29 coefficients."""

    def _build_fields(self):
        super()._build_fields()
        self.raw_field("on", K.R_ON, 0, 1)
        self.raw_field("n_loops", K.R_NLOOPS, 1, 16384)
        self.raw_field("n_sections", K.R_NSECT, 0, 14)
        self.raw_field("aa_shift", K.R_NAA, 0, 30,
                       doc="anti-alias low-pass shift, 0 = off")
        self.raw_field("d_code", K.R_DCODE, -(1 << 31), (1 << 31) - 1,
                       doc="feedthrough coefficient, 3.29 code")

    def load_table(self, table: BiquadTable) -> None:
        """Program a designed section table; D sections fold into d_code."""
        pair_sections = [s for s in table.sections
                         if not (s.b1 == 0.0 and s.a1 == 0.0 and s.a2 == 0.0)]
        d_value = sum(s.b0 for s in table.sections
                      if s.b1 == 0.0 and s.a1 == 0.0 and s.a2 == 0.0)
        if len(pair_sections) > 14:
            raise ValueError("more than 14 recursive sections")
        if len(pair_sections) > table.n_loops:
            raise ValueError("section count exceeds n_loops")
        self.engine.iirc[:, :] = 0
        for i, s in enumerate(pair_sections):
            self.engine.iirc[i, 0] = quantize_coeff(s.b0)
            self.engine.iirc[i, 1] = quantize_coeff(s.b1)
            self.engine.iirc[i, 2] = quantize_coeff(s.a1)
            self.engine.iirc[i, 3] = quantize_coeff(s.a2)
        self._setS(K.R_NSECT, len(pair_sections))
        self._setS(K.R_NLOOPS, table.n_loops)
        self._setS(K.R_DCODE, quantize_coeff(d_value))
        if table.prefilter_hz > 0:
            self._setS(K.R_NAA, cutoff_to_shift(table.prefilter_hz))
        else:
            self._setS(K.R_NAA, 0)
        self.reset_state()
        self._setS(K.R_ON, 1)

    @property
    def overflowed(self) -> bool:
        """True if any section output ever clipped its 24-bit register."""
        return self._S(K.R_OVF) != 0

    def reset_state(self) -> None:
        for off in range(K.R_PHASE, K.R_Y2 + 14):
            if off not in (K.R_NLOOPS, K.R_NSECT, K.R_NAA, K.R_DCODE):
                self._setS(off, 0)


class ScopeModule(Module):
    """Two-channel 2^14-point acquisition with decimating average."""

    def _build_fields(self):
        def setter_src(offset):
            def s(v):
                self._setS(offset, SLOT_INDEX[v] if isinstance(v, str) else int(v))
            return s
        for nm, off in (("ch1_source", K.C_CH1), ("ch2_source", K.C_CH2),
                        ("trigger_source", K.C_TRIGSRC)):
            self.add_field(
                nm,
                lambda off=off: SLOT_NAMES[self._S(off)] if self._S(off) >= 0 else "off",
                setter_src(off),
                lambda off=off: _u32(self._S(off)),
                lambda c, off=off: self._setS(off, _s32(c)))
        self.raw_field("decimation_shift", K.C_DECSHIFT, 0, 16)
        self.raw_field("trigger_edge", K.C_TRIGEDGE, 0, 1)
        self.volts_field("trigger_threshold_volts", K.C_TRIGTHRESH)
        self.raw_field("trigger_hysteresis", K.C_TRIGHYST, 0, 8191)
        self.raw_field("pretrigger_samples", K.C_PRETRIG, 0, 16383)
        self.raw_field("rolling_mode", K.C_ROLLING, 0, 1)
        self.raw_field("mode", K.C_MODE, 0, 2, in_config=False)

    def arm(self, ch1="in1", ch2="in2", decimation_shift=0, trigger_source=None,
            trigger_edge="rising", threshold_volts=0.0, hysteresis=4,
            pretrigger_samples=0, rolling=False, timeout_ticks=0) -> None:
        self.set("ch1_source", ch1)
        self.set("ch2_source", ch2)
        self._setS(K.C_DECSHIFT, decimation_shift)
        self._setS(K.C_TRIGSRC, SLOT_INDEX[trigger_source] if trigger_source else -1)
        self._setS(K.C_TRIGEDGE, 0 if trigger_edge == "rising" else 1)
        self.set("trigger_threshold_volts", threshold_volts)
        self._setS(K.C_TRIGHYST, hysteresis)
        self._setS(K.C_PRETRIG, pretrigger_samples)
        self._setS(K.C_ROLLING, 1 if rolling else 0)
        self._setS(K.C_TIMEOUT, timeout_ticks)
        for off in (K.C_WPTR, K.C_ACC1, K.C_ACC2, K.C_ACCCNT, K.C_ARMED,
                    K.C_T0, K.C_WAITED, K.C_FILLED, K.C_POSTCNT):
            self._setS(off, 0)
        self._setS(K.C_TRIGSTATE,
                   K.TRIG_PREFILL if pretrigger_samples > 0 else K.TRIG_ARMED)
        self._setS(K.C_TSTART, self.engine.tick)
        self.engine.status[K.ST_SCOPE] = 0
        self._setS(K.C_MODE, K.SCOPE_RUNNING)

    @property
    def done(self) -> bool:
        return self._S(K.C_MODE) == K.SCOPE_DONE

    @property
    def timed_out(self) -> bool:
        return self.engine.status[K.ST_SCOPE] == 2

    @property
    def sample_interval(self) -> float:
        return TICK_SECONDS * (1 << self._S(K.C_DECSHIFT))

    @property
    def trigger_tick(self) -> int:
        return self._S(K.C_T0)

    def stop_rolling(self) -> None:
        self._setS(K.C_MODE, K.SCOPE_DONE)

    def traces(self) -> tuple[np.ndarray, np.ndarray, int]:
        """Unrolled (ch1, ch2) sample arrays plus the t0 trigger tick."""
        w = self._S(K.C_WPTR)
        buf = self.engine.scope_buf
        ch1 = np.concatenate([buf[0, w:], buf[0, :w]])
        ch2 = np.concatenate([buf[1, w:], buf[1, :w]])
        return ch1.copy(), ch2.copy(), self._S(K.C_T0)

    def traces_volts(self) -> tuple[np.ndarray, np.ndarray, int]:
        ch1, ch2, t0 = self.traces()
        return ch1 / 8191.0, ch2 / 8191.0, t0


def cutoff_to_shift(fc_hz: float) -> int:
    """Nearest power-of-two smoothing shift for a first-order cutoff."""
    if fc_hz <= 0:
        raise ValueError("cutoff must be positive")
    k = 2.0 * math.pi * fc_hz * TICK_SECONDS
    n = round(-math.log2(k))
    return max(0, min(30, n))


def shift_to_cutoff(n: int) -> float:
    """Exact cutoff (Hz) realized by the shift-n first-order filter."""
    k = 2.0 ** -n
    return -math.log(1.0 - k) / (2.0 * math.pi * TICK_SECONDS)


class Engine:
    """The simulated board: router, DSP slots, plant, and the tick loop."""

    def __init__(self, seed: int = 1):
        self.seed = seed
        self.tick = 0
        self.mod_type = np.zeros(K.N_SLOTS, np.int64)
        self.in_sel = np.full(K.N_SLOTS, -1, np.int64)
        self.out_sel = np.zeros(K.N_SLOTS, np.int64)
        self.S = np.zeros((K.N_SLOTS, 64), np.int64)
        self.sig = np.zeros(K.N_SLOTS, np.int64)
        self.dirout = np.zeros(K.N_SLOTS, np.int64)
        self.wave = np.zeros((2, 16384), np.int64)
        self.iirc = np.zeros((14, 4), np.int64)
        self.scope_buf = np.zeros((2, K.SCOPE_LEN), np.int64)
        self.adc = np.zeros(2, np.int64)
        self.dac = np.zeros(2, np.int64)
        self.status = np.zeros(K.N_STATUS, np.int64)
        self.plant_type = K.PLANT_NONE
        self.pcfg = np.zeros(64, np.float64)
        self.pderiv = np.zeros(64, np.float64)
        self.pf = np.zeros(64, np.float64)
        self.pi64 = np.zeros(16, np.int64)
        self.ring = np.zeros((4, K.RING_LEN), np.int64)
        self.lut = build_table()
        self.plant = None

        self.mod_type[SLOT_IN1] = K.TYPE_INPUT
        self.S[SLOT_IN1, 0] = 0
        self.mod_type[SLOT_IN2] = K.TYPE_INPUT
        self.S[SLOT_IN2, 0] = 1
        self.mod_type[SLOT_OUT1] = K.TYPE_DAC
        self.S[SLOT_OUT1, 0] = 0
        self.mod_type[SLOT_OUT2] = K.TYPE_DAC
        self.S[SLOT_OUT2, 0] = 1
        for s in (SLOT_ASG0, SLOT_ASG1):
            self.mod_type[s] = K.TYPE_ASG
        for s in (SLOT_PID0, SLOT_PID1, SLOT_PID2):
            self.mod_type[s] = K.TYPE_PID
            self.S[s, K.P_MIN] = -8191
            self.S[s, K.P_MAX] = 8191
        for s in (SLOT_IQ0, SLOT_IQ1, SLOT_IQ2):
            self.mod_type[s] = K.TYPE_IQ
        self.mod_type[SLOT_IIR] = K.TYPE_IIR
        self.S[SLOT_IIR, K.R_NLOOPS] = 1
        self.mod_type[SLOT_SCOPE] = K.TYPE_SCOPE
        self.S[SLOT_SCOPE, K.C_TRIGSRC] = -1

        self.in1 = InputModule(self, SLOT_IN1, "in1")
        self.in2 = InputModule(self, SLOT_IN2, "in2")
        self.out1 = DacModule(self, SLOT_OUT1, "out1")
        self.out2 = DacModule(self, SLOT_OUT2, "out2")
        self.asg0 = AsgModule(self, SLOT_ASG0, "asg0")
        self.asg1 = AsgModule(self, SLOT_ASG1, "asg1")
        self.pid0 = PidModule(self, SLOT_PID0, "pid0")
        self.pid1 = PidModule(self, SLOT_PID1, "pid1")
        self.pid2 = PidModule(self, SLOT_PID2, "pid2")
        self.iq0 = IqModule(self, SLOT_IQ0, "iq0")
        self.iq1 = IqModule(self, SLOT_IQ1, "iq1")
        self.iq2 = IqModule(self, SLOT_IQ2, "iq2")
        self.iir = IirModule(self, SLOT_IIR, "iir")
        self.scope = ScopeModule(self, SLOT_SCOPE, "scope")
        self.modules = {
            m.name: m for m in (
                self.in1, self.in2, self.out1, self.out2,
                self.asg0, self.asg1, self.pid0, self.pid1, self.pid2,
                self.iq0, self.iq1, self.iq2, self.iir, self.scope)
        }

    def power_down_unused(self, keep: list[str]) -> None:
        """Disable DSP slots not named in ``keep`` (inputs/outputs stay).

        An off slot outputs zero and skips its per-tick update, which is
        bit-identical to an idle module that was never configured, but much
        cheaper to emulate.  Purely a simulation-speed knob.
        """
        always = {"in1", "in2", "out1", "out2"}
        for name, m in self.modules.items():
            if name in always or name in keep:
                continue
            self.mod_type[m.slot] = K.TYPE_OFF

    # -- plant -------------------------------------------------------------
    def set_plant(self, plant) -> None:
        self.plant = plant
        if plant is None:
            self.plant_type = K.PLANT_NONE
            return
        plant.fill_arrays(self.pcfg, self.pderiv, self.pi64, self.seed)
        self.pf[:] = 0.0
        self.ring[:, :] = 0
        self.plant_type = plant.plant_type()

    def set_adc(self, ch: int, sample: int) -> None:
        """Pin an analog input (only meaningful without a plant)."""
        self.adc[ch] = sat14(int(sample))

    # -- time --------------------------------------------------------------
    @property
    def time_s(self) -> float:
        return self.tick * TICK_SECONDS

    def run(self, n_ticks: int, stop_flags: int = 0) -> int:
        """Advance up to n_ticks (exactly n_ticks when no stop flag fires)."""
        done = K.run_chunk(
            np.int64(n_ticks), np.int64(self.tick),
            self.mod_type, self.in_sel, self.out_sel, self.S,
            self.sig, self.dirout, self.wave, self.iirc, self.scope_buf,
            self.adc, self.dac, self.status,
            np.int64(self.plant_type), self.pcfg, self.pderiv, self.pf,
            self.pi64, self.ring, self.lut, np.int64(stop_flags))
        self.tick += int(done)
        return int(done)

    def run_seconds(self, seconds: float, stop_flags: int = 0) -> int:
        return self.run(int(round(seconds / TICK_SECONDS)), stop_flags)

    def run_until_scope(self, max_ticks: int = 1 << 34) -> None:
        self.run(max_ticks, stop_flags=K.STOP_ON_SCOPE)
        if not self.scope.done:
            raise TimeoutError("scope acquisition did not complete")
        if self.scope.timed_out:
            raise TimeoutError("scope trigger timeout")

    def run_until_na(self, max_ticks: int = 1 << 34) -> None:
        self.run(max_ticks, stop_flags=K.STOP_ON_NA)
        if not self.status[K.ST_NA_DONE]:
            raise TimeoutError("network-analyzer accumulation did not complete")

    # -- state I/O ---------------------------------------------------------
    def state_dict(self) -> dict:
        return {name: m.state_dict() for name, m in self.modules.items()
                if m.fields}

    def load_state(self, d: dict) -> None:
        for name, sub in d.items():
            if name not in self.modules:
                raise KeyError(f"unknown module {name!r}")
            self.modules[name].load_state(sub)

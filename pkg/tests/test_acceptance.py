"""Acceptance suite: one test per criterion, each printing a verdict line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; every tolerance is pinned here, none deferred.
"""

import cmath
import filecmp
import math
import os
import struct
import time

import numpy as np
import pytest

from lockboxsim import kernel as K
from lockboxsim.core.fixedpoint import TICK_SECONDS, frequency_word
from lockboxsim.core.lehmer import LEHMER_MODULUS
from lockboxsim.engine import Engine, shift_to_cutoff
from lockboxsim.instruments.netanalyzer import NaSweepConfig, na_sweep
from lockboxsim.instruments.spectrum import (
    SpectrumConfig,
    enbw,
    iq_mode_psd,
    welch_psd,
)
from lockboxsim.iir.design import (
    TransferSpec,
    discretize,
    eval_transfer,
    proper_sys,
    rescale,
    residues,
    round_coefficients,
    to_biquads,
)
from lockboxsim.kernel import cordic_update
from lockboxsim.lockbox.loopmath import (
    closed_from_open,
    nyquist_margins,
    open_loop_from_closed,
)
from lockboxsim.service import wire
from lockboxsim.service.regmap import SCOPE_CH1_BASE, RegisterMap, RegmapError
from lockboxsim.service.runners import RUNNERS, run_iir_compensation, run_loop_tf, run_pll
from lockboxsim.scenarios import build_cavity_lock

from test_iir_design import random_ladder_spec
from test_iir_runtime import oracle_sections, run_iir


def verdict(num: int, text: str) -> None:
    print(f"\n[ACCEPTANCE {num:2d}] PASS - {text}")


class TestCriterion01PipelineEquivalence:
    def test_criterion_01(self):
        rng = np.random.default_rng(2024)
        t0 = time.time()
        worst_pre = 0.0
        worst_excess = 0.0
        for _ in range(50):
            zeros, poles, t_eff = random_ladder_spec(rng)
            spec, _ = rescale(proper_sys(TransferSpec(zeros, poles, 1.0)))
            dr = residues(discretize(spec))
            table = to_biquads(dr)
            freqs = np.logspace(np.log10(1e-4 / t_eff),
                                np.log10(0.45 / t_eff), 200)
            ha = eval_transfer(table, freqs)
            hf = eval_transfer(dr, freqs)
            rel = np.abs(ha - hf) / np.maximum(np.abs(hf), 1e-30)
            worst_pre = max(worst_pre, float(rel.max()))
            # post-rounding deviation against the linear sensitivity bound
            rounded, report = round_coefficients(table)
            hq = eval_transfer(rounded, freqs)
            z1 = np.exp(-2j * np.pi * freqs * table.period)
            bound = np.zeros(len(freqs))
            for s, errs in zip(table.sections, report.errors):
                den = 1.0 + s.a1 * z1 + s.a2 * z1 * z1
                num = s.b0 + s.b1 * z1
                eps = 1e-12
                d_abs = [abs(s.b0) * errs[0], abs(s.b1) * errs[1],
                         abs(s.a1) * errs[2], abs(s.a2) * errs[3]]
                bound += (d_abs[0] + d_abs[1]) / np.abs(den)
                bound += (d_abs[2] + d_abs[3]) * np.abs(num) / np.abs(den) ** 2
            excess = np.abs(hq - ha) - (1.05 * bound + 1e-12)
            worst_excess = max(worst_excess, float(excess.max()))
        elapsed = time.time() - t0
        assert worst_pre < 1e-9
        assert worst_excess <= 0.0
        assert elapsed < 10.0
        verdict(1, f"pipeline equivalence: worst pre-rounding rel err "
                   f"{worst_pre:.2e} < 1e-9 over 50 specs, post-rounding "
                   f"within linear bound, {elapsed:.1f}s < 10s")


class TestCriterion02RuntimeFidelity:
    def test_criterion_02(self):
        from lockboxsim.iir.design import BiquadSection, BiquadTable
        rng = np.random.default_rng(123)
        n_pairs = 10                      # order 20
        t_eff = n_pairs * TICK_SECONDS
        sections = []
        for _ in range(n_pairs):
            f = 10 ** rng.uniform(math.log10(0.02 / t_eff),
                                  math.log10(0.25 / t_eff))
            q = rng.uniform(2, 20)
            p = np.exp(complex(-2 * math.pi * f / (2 * q), 2 * math.pi * f)
                       * t_eff)
            r = complex(rng.uniform(0.01, 0.05), rng.uniform(-0.03, 0.03))
            sections.append(BiquadSection(
                2 * r.real, -2 * (p * r.conjugate()).real,
                -2 * p.real, abs(p) ** 2, char_freq_hz=f))
        table = BiquadTable(sorted(sections, key=lambda s: s.char_freq_hz),
                            n_loops=n_pairs, period=t_eff)
        n_out = 100_000
        x14 = rng.integers(-2048, 2048, n_out)
        y = run_iir(table, np.repeat(x14, n_pairs))
        emitted = y[2 * n_pairs - 1::n_pairs][: n_out - 2]
        want = (oracle_sections(table, x14.astype(float) * 1024.0)
                / 1024.0)[: len(emitted)]
        rms = math.sqrt(np.mean((emitted - want) ** 2))
        limit = 2.0 ** -10 * 8191.0
        assert rms <= limit
        verdict(2, f"order-20 fixed-point RMS vs double oracle "
                   f"{rms:.3f} LSB <= {limit:.3f} over 1e5 samples")


class TestCriterion03BandpassFig4b:
    def test_criterion_03(self):
        t0 = time.time()
        eng = Engine(seed=4)
        eng.power_down_unused(["iq0", "iq1"])
        f0 = 15e6
        fc = shift_to_cutoff(13)          # 2.3 kHz requested cutoff
        centers = {}
        sweeps = {}
        for phi in (0.0, 120.0, 240.0):
            eng.iq1.setup(frequency_hz=f0, phase_degrees=phi, gain=1.0,
                          bandwidth_hz=(2.3e3,), output_mux="output_direct")
            eng.iq1.set("input_select", "iq0")
            cfg = NaSweepConfig(
                start_hz=f0 - 3 * fc, stop_hz=f0 + 3 * fc, points=9,
                logscale=False, amplitude_volts=0.4, input="iq1",
                na_cycles=250_000, sleep_cycles=150_000,
                bandwidth_hz=300.0, delay_ticks=2)
            res = na_sweep(eng, cfg, "iq0")
            sweeps[phi] = res
            centers[phi] = res[4][1]
        # Lorentzian magnitude within 5 percent
        for phi, res in sweeps.items():
            for f, g in res:
                delta = (frequency_word(f) - frequency_word(f0)) * 125e6 / 2**32
                ideal = 1.0 / math.hypot(1.0, delta / fc)
                assert abs(g) == pytest.approx(ideal, rel=0.05), (phi, f)
        d1 = math.degrees(cmath.phase(centers[120.0] / centers[0.0])) % 360
        d2 = math.degrees(cmath.phase(centers[240.0] / centers[120.0])) % 360
        assert d1 == pytest.approx(120.0, abs=2.0)
        assert d2 == pytest.approx(120.0, abs=2.0)
        elapsed = time.time() - t0
        assert elapsed < 60.0
        verdict(3, f"15 MHz / 2.3 kHz bandpass: Lorentzian within 5%, "
                   f"phase spacings {d1:.2f} and {d2:.2f} deg, "
                   f"{elapsed:.1f}s < 60s")


class TestCriterion04LoopIdentityAndMargins:
    def test_criterion_04(self):
        # synthetic round trip at 1e-12
        rng = np.random.default_rng(11)
        f = np.logspace(1, 5, 300)
        g_open = -1e3 / (1j * f) * (1 + 0.1 * rng.normal(size=300))
        back = open_loop_from_closed(closed_from_open(g_open))
        rel = np.max(np.abs(back - g_open) / np.abs(g_open))
        assert rel < 1e-12
        # measured loop: matched PI corner + 50 Hz low-pass on the default
        # plant; phase margin ~90, gain margin scaled to 2
        res = run_loop_tf(seed=5)
        m = res["measurement"].margins
        assert m.phase_margin_deg == pytest.approx(90.0, abs=3.0)
        assert m.gain_margin == pytest.approx(2.0, abs=0.1)
        verdict(4, f"Eq-identity round trip {rel:.1e} < 1e-12; measured "
                   f"PM {m.phase_margin_deg:.1f} deg (90+-3), "
                   f"GM {m.gain_margin:.2f} (2.0+-0.1)")


class TestCriterion05LockAcquisition:
    def test_criterion_05(self):
        # tune the demodulation phase once; it depends on chain delays only
        eng, box = build_cavity_lock(seed=0, theta0=0.0)
        phase = eng.iq0.get("phase_degrees")
        rng = np.random.default_rng(20240601)
        failures = []
        worst_refl = 0.0
        n_runs = 100
        for k in range(n_runs):
            theta0 = float(rng.uniform(-20, 20))
            eng, box = build_cavity_lock(seed=1000 + k, theta0=theta0,
                                         demod_phase=phase)
            report = box.run_sequence()
            if not report.locked:
                failures.append((k, theta0, "not locked"))
                continue
            refl = box.measure_dc("in1", decimation_shift=6)
            cal = box.calibrations["reflection"]
            want = cal.expected_volts(0.0)
            span = cal.scale * (1.0 - cal.r_min)
            dev = abs(refl - want) / span
            worst_refl = max(worst_refl, dev)
            if dev > 0.02:
                failures.append((k, theta0, f"reflection {dev:.3f}"))
        assert failures == [], failures
        verdict(5, f"lock acquired {n_runs}/{n_runs} runs, detuning "
                   f"+-20 bandwidths; worst final reflection deviation "
                   f"{worst_refl * 100:.2f}% of dip (< 2%)")


class TestCriterion06IirCompensation:
    def test_criterion_06(self):
        res = run_iir_compensation(seed=3)
        mu = res["margins_uncompensated"]
        mc = res["margins_compensated"]
        assert mu.gain_margin >= 1.9
        assert mc.gain_margin >= 1.9
        assert res["ugf_ratio"] is not None and res["ugf_ratio"] >= 10.0
        assert res["variance_ratio"] >= 4.0
        verdict(6, f"unity-gain {mu.unity_gain_hz:.0f} Hz -> "
                   f"{mc.unity_gain_hz:.0f} Hz (x{res['ugf_ratio']:.1f} "
                   f">= 10) at gain margins {mu.gain_margin:.2f}/"
                   f"{mc.gain_margin:.2f} >= 2; error variance drop "
                   f"x{res['variance_ratio']:.1f} >= 4")


class TestCriterion07Cordic:
    def test_criterion_07(self):
        rng = np.random.default_rng(5)
        worst = 0.0
        for _ in range(100_000):
            ang = rng.uniform(-math.pi, math.pi)
            i = int(round(4e6 * math.cos(ang)))
            q = int(round(4e6 * math.sin(ang)))
            p, *_ = cordic_update(np.int64(i), np.int64(q), np.int64(0),
                                  np.int64(0), np.int64(0), np.int64(0))
            got = (int(p) * 180.0 / (1 << 11)) % 360.0
            want = math.degrees(ang) % 360.0
            err = abs((got - want + 180.0) % 360.0 - 180.0)
            worst = max(worst, err)
        assert worst <= 0.15
        # scripted +-3.2-turn sweeps with reset at the +-4 pi overflow
        for sign in (+1, -1):
            state = (np.int64(0),) * 4
            regs = []
            for k in range(int(3.2 * 360)):
                ang = sign * math.radians(k)
                i = int(round(4e6 * math.cos(ang)))
                q = int(round(4e6 * math.sin(ang)))
                p, t, qd, v = cordic_update(
                    np.int64(i), np.int64(q), *state)
                state = (p, t, qd, v)
                regs.append(int(p))
            regs = np.array(regs)
            half = 1 << 11
            assert np.abs(regs).max() <= 4 * half
            jumps = np.diff(regs)
            big = jumps[np.abs(jumps) > half]
            assert len(big) == 2               # two resets over 3.2 turns
            assert (np.abs(np.abs(big) - 2 * half) <= 16).all()
        verdict(7, f"max CORDIC error {worst:.3f} deg <= 0.15 over 1e5 "
                   f"inputs; turn counting and +-2 pi resets correct over "
                   f"+-3.2-turn sweeps")


class TestCriterion08Pll:
    def test_criterion_08(self):
        res = run_pll(seed=7, initial_offset_hz=200e3)
        stds = res["step_phase_std_deg"]
        assert max(stds) <= 0.5
        # acquisition: trace starts saturated in the 2..4 pi band and
        # settles at the (zero) setpoint
        ph = res["acquisition_phase_v"]
        assert ph.max() > 0.5          # saturated band before lock-on
        assert abs(ph[-1]) < 0.02      # settled at the setpoint
        # unwrapping the register trace leaves no residual jumps: the
        # +-2 pi resets unwrap away and what remains is continuous
        rad = ph * 8191.0 * math.pi / (1 << 11)
        unwrapped = np.unwrap(rad)
        assert np.abs(np.diff(unwrapped)).max() < math.pi / 2
        verdict(8, f"PLL locks from 200 kHz offset; per-step phase std "
                   f"{max(stds):.3f} deg <= 0.5; unwrapped register trace "
                   f"continuous (max step "
                   f"{np.degrees(np.abs(np.diff(unwrapped)).max()):.1f} deg)")


class TestCriterion09Spectrum:
    def test_criterion_09(self):
        # boxcar ENBW exact
        for n in (256, 4096, 16384):
            assert enbw(np.ones(n)) == pytest.approx(1.0 / n, rel=1e-12)
        # white noise through the engine chain: integrated PSD = variance
        eng = Engine(seed=9)
        eng.power_down_unused(["asg0", "scope"])
        eng.asg0.setup(frequency_hz=0.0, prng=True, scale=1.0)
        traces = []
        for _ in range(13):
            eng.scope.arm(ch1="asg0", decimation_shift=0)
            eng.run_until_scope()
            tr, _, _ = eng.scope.traces_volts()
            traces.append(tr)
        x = np.concatenate(traces)[: 2048 * 100]
        var = float(np.var(x))
        for win in ("blackman", "flattop", "boxcar", "hamming", "gaussian"):
            f, psd, _ = welch_psd(x, TICK_SECONDS,
                                  SpectrumConfig(window=win, averages=100))
            total = float(psd.sum() * (f[1] - f[0]))
            assert total == pytest.approx(var, rel=0.05), win
        # IQ-mode peak bin
        eng2 = Engine(seed=9)
        eng2.power_down_unused(["asg0", "iq1", "iq2", "scope"])
        f0, delta = 2e6, 40e3
        eng2.asg0.load_sine(1.0)
        eng2.asg0.setup(frequency_hz=f0 + delta, scale=0.5)
        freqs, psd, _ = iq_mode_psd(eng2, f0, decimation_shift=6,
                                    source="asg0")
        df = freqs[1] - freqs[0]
        peak = freqs[np.argmax(psd)]
        assert abs(peak - (f0 + delta)) <= df
        verdict(9, f"boxcar ENBW exact; integrated white-noise PSD within "
                   f"5% of variance for all five windows; IQ-mode peak "
                   f"within one bin ({abs(peak - f0 - delta) / df:.2f})")


class TestCriterion10Regmap:
    def test_criterion_10(self):
        eng = Engine(seed=3)
        rm = RegisterMap(eng)
        # read-after-write for every mapped writable register
        n_regs = 0
        for info in rm.registers():
            if not info.writable:
                continue
            [old] = rm.read(info.address, 1)
            rm.write(info.address, [old])
            assert rm.read(info.address, 1) == [old], info.name
            n_regs += 1
        # block read equals the scope snapshot
        eng.set_adc(0, 2718)
        eng.run(1)
        eng.scope.arm(ch1="in1", decimation_shift=0)
        eng.run_until_scope()
        words = rm.read(SCOPE_CH1_BASE, 1 << 14)
        trace, _, _ = eng.scope.traces()
        assert words == [int(v) & 0xFFFFFFFF for v in trace]
        # million-frame fuzz through the protocol stack
        rng = np.random.default_rng(77)
        ops = rng.integers(0, 256, 1_000_000)
        addrs = rng.integers(0, 1 << 32, 1_000_000, dtype=np.uint64)
        counts = rng.integers(0, 40, 1_000_000)
        known = [i.address for i in rm.registers()[:32]]
        crashes = 0
        for k in range(1_000_000):
            addr = int(known[k % 32]) if k % 3 == 0 else int(addrs[k])
            frame = wire.HEADER.pack(int(ops[k]) & 0xFF, addr & 0xFFFFFFFF,
                                     int(counts[k]))
            try:
                op, address, count = wire.parse_header(frame)
            except wire.MalformedFrame:
                continue                      # connection would reset
            try:
                if op == wire.OP_READ:
                    rm.read(address, count)
                else:
                    rm.write(address, [0] * count)
            except RegmapError:
                pass                          # error frame path
            except Exception:
                crashes += 1
        assert crashes == 0
        verdict(10, f"read-after-write on {n_regs} registers; 2^14-word "
                    f"block read equals scope trace; 1e6-frame fuzz with "
                    f"zero crashes")


class TestCriterion11Determinism:
    def test_criterion_11(self, tmp_path):
        diffs = []
        for name, runner in RUNNERS.items():
            a = tmp_path / f"{name}-a"
            b = tmp_path / f"{name}-b"
            a.mkdir(), b.mkdir()
            runner(seed=7, out_dir=str(a))
            runner(seed=7, out_dir=str(b))
            for fn in sorted(os.listdir(a)):
                if not filecmp.cmp(a / fn, b / fn, shallow=False):
                    diffs.append(f"{name}/{fn}")
        assert diffs == [], diffs
        verdict(11, "all five scenarios byte-identical across two seeded runs")

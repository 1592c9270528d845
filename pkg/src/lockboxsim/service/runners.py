"""Scenario implementations behind the CLI: each returns plain data
structures (also consumed by the acceptance suite) and can write its
artifacts as CSV/text files.

All runs are deterministic for a fixed seed: plant noise comes from seeded
integer generators and no wall-clock values enter the outputs.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from lockboxsim import kernel as K
from lockboxsim.core.fixedpoint import TICK_SECONDS
from lockboxsim.engine import Engine
from lockboxsim.instruments.netanalyzer import NaSweepConfig, na_sweep
from lockboxsim.iir.design import design_filter, eval_transfer
from lockboxsim.lockbox.loopmath import nyquist_margins, open_loop_from_closed
from lockboxsim.plants import default_piezo_modes
from lockboxsim.scenarios import (
    build_cavity_lock,
    build_pll,
    fig6_stages,
    pll_enable_slow_locks,
    pll_set_phase_setpoint,
    tune_demod_phase,
)

SCENARIOS = ("pdh-sweep", "lock-sequence", "loop-tf", "iir-compensation", "pll")


def write_csv(path: str, header: list[str], columns: list[np.ndarray]) -> None:
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in zip(*columns):
            f.write(",".join(repr(float(v)) for v in row) + "\n")


# --------------------------------------------------------------- pdh-sweep
def run_pdh_sweep(seed: int, out_dir: str | None = None,
                  phases=(0.0, 45.0, 90.0, 135.0)) -> dict:
    """Error-signal shapes while sweeping the cavity, per demodulation phase."""
    eng, box = build_cavity_lock(seed=seed, theta0=0.0, demod_phase=0.0)
    cfg = box.config
    asg = eng.modules[cfg.sweep_asg]
    traces = {}
    drive = refl = None
    for phi in phases:
        eng.iq0.set("phase_degrees", float(phi))
        eng.pid0.set("output_select", "off")
        asg.load_ramp(-1.0, 1.0)
        asg.setup(frequency_hz=cfg.sweep_freq_hz, scale=1.0)
        asg.set("output_select", cfg.output)
        period = int(round(1.0 / cfg.sweep_freq_hz / TICK_SECONDS))
        dec = max(0, math.ceil(math.log2(max(1.0, period / 16384))))
        eng.run(1000)
        eng.scope.arm(ch1="iq0", ch2="in1", decimation_shift=dec)
        eng.run_until_scope()
        pdh, comb, _ = eng.scope.traces_volts()
        traces[phi] = pdh
        if drive is None:
            eng.scope.arm(ch1=cfg.sweep_asg, ch2="in1", decimation_shift=dec)
            eng.run_until_scope()
            drive, refl, _ = eng.scope.traces_volts()
    tsamp = eng.scope.sample_interval
    result = {"time_s": np.arange(len(drive)) * tsamp, "drive_v": drive,
              "reflection_v": refl, "pdh": traces}
    if out_dir:
        cols = [result["time_s"], drive, refl]
        hdr = ["time_s", "drive_v", "reflection_v"]
        for phi, tr in traces.items():
            hdr.append(f"pdh_phi{int(phi)}_v")
            cols.append(tr)
        write_csv(os.path.join(out_dir, "pdh_sweep.csv"), hdr, cols)
    return result


# ------------------------------------------------------------ lock-sequence
def run_lock_sequence(seed: int, out_dir: str | None = None,
                      theta0: float | None = None) -> dict:
    rng = np.random.default_rng(seed)
    if theta0 is None:
        theta0 = float(rng.uniform(-20, 20))
    eng, box = build_cavity_lock(seed=seed, theta0=theta0)
    report = box.run_sequence()
    refl = box.measure_dc("in1", decimation_shift=6)
    cal = box.calibrations["reflection"]
    refl_min = cal.expected_volts(0.0)
    # post-lock error/actuator traces
    eng.scope.arm(ch1="iq0", ch2="pid0", decimation_shift=5)
    eng.run_until_scope()
    err_tr, act_tr, _ = eng.scope.traces_volts()
    result = {
        "theta0": theta0,
        "report": report,
        "final_reflection_v": refl,
        "reflection_min_v": refl_min,
        "error_trace_v": err_tr,
        "actuator_trace_v": act_tr,
        "sample_interval_s": eng.scope.sample_interval,
    }
    if out_dir:
        t = np.arange(len(err_tr)) * eng.scope.sample_interval
        write_csv(os.path.join(out_dir, "lock_trace.csv"),
                  ["time_s", "pdh_error_v", "actuator_v"],
                  [t, err_tr, act_tr])
        with open(os.path.join(out_dir, "lock_report.txt"), "w") as f:
            f.write(f"seed: {seed}\n")
            f.write(f"initial_detuning_bw: {theta0!r}\n")
            f.write(f"locked: {report.locked}\n")
            f.write(f"attempts: {report.attempts}\n")
            for i, (a, b) in enumerate(report.stage_ticks):
                f.write(f"stage{i}_ticks: {a} {b}\n")
            f.write(f"final_error_units: {report.final_error_units!r}\n")
            f.write(f"final_error_std_units: {report.final_error_std_units!r}\n")
            f.write(f"final_reflection_v: {refl!r}\n")
            f.write(f"reflection_minimum_v: {refl_min!r}\n")
            for e in report.events:
                f.write(f"event: {e.tick} {e.kind} {e.detail}\n")
    return result


# ----------------------------------------------------------------- loop-tf
def loop_tf_grid(extra: list[float] | None = None) -> list[float]:
    base = list(np.logspace(math.log10(200.0), math.log10(20e3), 12))
    if extra:
        base += extra
    return sorted(base)


def mode_fine_grid(only_hz: float | None = None,
                   strongest: int = 0) -> list[float]:
    """Sampling points resolving piezo resonances (a few linewidths each).

    ``only_hz`` restricts the grid to one mode; ``strongest`` keeps the N
    modes with the largest peak-to-frequency ratio (the margin-binding
    ones).  Sampling every notched or weak resonance buys nothing but
    narrowband ringing noise and settling time.
    """
    modes = default_piezo_modes()
    if only_hz is not None:
        modes = [m for m in modes if abs(m.freq_hz - only_hz) <= 1.0]
    elif strongest > 0:
        modes = sorted(modes, key=lambda m: -m.weight * m.q / m.freq_hz)[:strongest]
    pts = []
    for m in modes:
        for j in range(-4, 5):
            pts.append(m.freq_hz * (1.0 + 0.8 * j / m.q))
    return pts


def drive_amplitude_profile(freqs, max_amp=0.1, swing_bw=0.25,
                            piezo_bw_per_volt=1.0) -> np.ndarray:
    """Excitation amplitude keeping the cavity excursion on its fringe.

    Near a mode the actuator displacement response gains the mode's
    quality factor; the drive is scaled so the worst-case detuning swing
    stays below ``swing_bw`` bandwidths, mirroring the bench habit of
    reducing drive around resonances.
    """
    from lockboxsim.plants import piezo_response
    resp = np.abs(piezo_response(default_piezo_modes(), freqs, direct=0.1))
    cap = swing_bw / (abs(piezo_bw_per_volt) * resp * 1.5)
    return np.minimum(max_amp, cap)


def measure_closed_loop(eng, freqs, amplitude=0.1, iq_name="iq1",
                        resonance_aware=True) -> np.ndarray:
    """Closed-loop response at the output summing node, per frequency.

    The accumulation window is rounded to a whole number of excitation
    periods, so the residual 2*w0 demodulation ripple integrates out and
    the averaged quadratures read the response cleanly even with few
    periods per point.
    """
    from lockboxsim.core.fixedpoint import frequency_word
    amps = (drive_amplitude_profile(np.asarray(freqs), max_amp=amplitude)
            if resonance_aware else np.full(len(freqs), amplitude))
    out = []
    for f, amp in zip(freqs, amps):
        word = frequency_word(f)
        period = 2.0**32 / word
        n_per = max(2, int(math.ceil(1e5 / period)))
        cycles = int(round(n_per * period))
        bw = max(min(f / 2.0, 5e4), 500.0)
        settle = int(5.0 / (2 * math.pi * bw) / TICK_SECONDS) + int(period)
        # a high-Q feature rings up with its own time constant Q/(pi*f)
        for m in default_piezo_modes():
            if abs(f - m.freq_hz) / m.freq_hz < 6.0 / m.q:
                tau = m.q / (math.pi * m.freq_hz)
                settle = max(settle, int(7.0 * tau / TICK_SECONDS))
                cycles = max(cycles, int(round(
                    math.ceil(3.0 * tau / TICK_SECONDS / period) * period)))
        cfg = NaSweepConfig(start_hz=f, stop_hz=f, points=1,
                            amplitude_volts=float(amp),
                            na_cycles=cycles, sleep_cycles=settle,
                            bandwidth_hz=bw,
                            input="out2", output_select="out2",
                            allow_feedback_sum=True, delay_ticks=1)
        [(_, g)] = na_sweep(eng, cfg, iq_name)
        out.append(g)
    eng.modules[iq_name].set("amplitude_volts", 0.0)
    return np.asarray(out)


def measure_background(eng, freqs, amplitude=0.02, iq_name="iq1") -> np.ndarray:
    """Measurement-chain response with the controller path disconnected.

    With no feedback the node should read exactly 1; the residual complex
    deviation is the measurement background subtracted from closed-loop
    sweeps.  Run before locking (it momentarily opens the loop).
    """
    pid_sel = eng.pid0.get("output_select")
    iir_sel = eng.iir.get("output_select")
    eng.pid0.set("output_select", "off")
    eng.iir.set("output_select", "off")
    bg = measure_closed_loop(eng, freqs, amplitude=amplitude, iq_name=iq_name)
    eng.pid0.set("output_select", pid_sel)
    eng.iir.set("output_select", iir_sel)
    return bg - 1.0


@dataclass
class LoopMeasurement:
    freqs: np.ndarray
    g_closed: np.ndarray
    g_open: np.ndarray
    margins: object


def run_loop_tf(seed: int, out_dir: str | None = None,
                target_gain_margin: float = 2.0) -> dict:
    """Closed-loop measurement, Eq-style open-loop recovery, margins.

    The loop is a PI controller whose corner matches a 50 Hz analog
    low-pass in the actuator path, so the open loop is a clean integrator
    (phase margin ~90 deg); the piezo resonances then set the gain margin.
    The controller gain is rescaled once so the worst zero-phase crossing
    sits at |G| = 0.5 (gain margin 2).
    """
    from lockboxsim.lockbox.sequence import LockStage
    stages = [
        LockStage(input=None, ival_preset_volts=0.0, duration_s=30e-3),
        LockStage(input="pdh", setpoint_theta=0.0, gain_factor=1.0,
                  duration_s=25e-3),
    ]
    eng, box = build_cavity_lock(seed=seed, theta0=0.25, with_modes=True,
                                 rc_fc=50.0, unity_gain_hz=600.0,
                                 stages=stages, demod_phase=45.0,
                                 disturbance_rms=1e-3, piezo_gain=-1.0,
                                 sweep_freq_hz=10.0)
    box.config.pi_corner_hz = 50.0
    freqs = np.asarray(loop_tf_grid(mode_fine_grid(strongest=2)))
    bg = measure_background(eng, freqs)
    report = box.run_sequence()
    if not report.locked:
        raise RuntimeError("loop-tf: lock failed")
    set_converter_noise(eng, 0.0, 0.0)
    g_closed = measure_closed_loop(eng, freqs) - bg
    g_open = open_loop_from_closed(g_closed)
    margins = nyquist_margins(freqs, g_open)
    # one rescale puts the worst resonance at |G| = 1/target
    if margins.gain_margin is not None:
        scale = margins.gain_margin / target_gain_margin
        gi = eng.pid0.get("gain_i")
        gp = eng.pid0.get("gain_p")
        eng.pid0.set("gain_i", gi * scale)
        eng.pid0.set("gain_p", gp * scale)
        eng.run(int(2e-3 / TICK_SECONDS))
        g_closed = measure_closed_loop(eng, freqs) - bg
        g_open = open_loop_from_closed(g_closed)
        margins = nyquist_margins(freqs, g_open)
    result = LoopMeasurement(freqs, g_closed, g_open, margins)
    if out_dir:
        write_csv(os.path.join(out_dir, "loop_tf.csv"),
                  ["freq_hz", "gclosed_re", "gclosed_im", "gopen_re",
                   "gopen_im"],
                  [freqs, g_closed.real, g_closed.imag, g_open.real,
                   g_open.imag])
        with open(os.path.join(out_dir, "margins.txt"), "w") as f:
            f.write(f"unity_gain_hz: {margins.unity_gain_hz!r}\n")
            f.write(f"phase_margin_deg: {margins.phase_margin_deg!r}\n")
            f.write(f"gain_margin: {margins.gain_margin!r}\n")
            f.write(f"gain_margin_hz: {margins.gain_margin_hz!r}\n")
    return {"measurement": result, "report": report}


# --------------------------------------------------------- iir-compensation
def design_compensator(prefilter_hz: float = 2e5, q_new: float = 2.0,
                       dc_gain: float = 0.125):
    """Notch the ten compensatable piezo modes (the 60 kHz one stays).

    Zeros sit on the plant's resonant poles; replacement pole pairs at the
    same frequencies with a low quality factor hand back a smooth
    roll-off, cutting each peak by Q_mode/q_new (~100x) without the huge
    partial-fraction residues a fully-flattening design would need.  This
    stands in for the interactive pole/zero placement done against a
    measured response.
    """
    zeros = []
    poles = []
    for m in default_piezo_modes():
        if abs(m.freq_hz - 60e3) < 1.0:
            continue                      # deliberately left uncompensated
        w0 = 2 * math.pi * m.freq_hz
        gamma = w0 / (2 * m.q)
        wd = w0 * math.sqrt(max(0.0, 1 - 1 / (4 * m.q**2)))
        zeros.append(complex(-gamma, wd))
        gn = w0 / (2 * q_new)
        wn = w0 * math.sqrt(max(0.0, 1 - 1 / (4 * q_new**2)))
        poles.append(complex(-gn, wn))
    table, report, _ = design_filter(zeros, poles, dc_gain=dc_gain,
                                     prefilter_hz=prefilter_hz)
    return table, report


DEBUG_MARGINS = False


def _rescale_to_margin(eng, freqs, bg, target: float, max_passes: int = 3):
    """Scale the controller until the measured gain margin hits the target."""
    g_open = margins = None
    for pass_no in range(max_passes):
        g_closed = measure_closed_loop(eng, freqs) - bg
        g_open = open_loop_from_closed(g_closed)
        margins = nyquist_margins(freqs, g_open)
        if DEBUG_MARGINS:
            print(f"  pass {pass_no}: {margins}")
            for f, g in zip(freqs, g_open):
                print(f"   f={f:9.1f} |G|={abs(g):8.4f} "
                      f"arg={np.degrees(np.angle(g)):+7.1f}")
        if margins.gain_margin is None:
            raise RuntimeError("no gain-margin crossing found")
        if abs(margins.gain_margin - target) <= 0.05 * target:
            break
        scale = margins.gain_margin / target
        eng.pid0.set("gain_i", eng.pid0.get("gain_i") * scale)
        eng.pid0.set("gain_p", eng.pid0.get("gain_p") * scale)
        eng.run(int(2e-3 / TICK_SECONDS))
    return g_open, margins


def set_converter_noise(eng, adc_lsb: float, dac_lsb: float) -> None:
    """Retune the converter noise injection (quiet sweeps vs noisy runs).

    The bench equivalent is averaging each point for minutes; compressed
    dwells cannot, so measurement phases run with converter noise muted
    and the noise returns for lock-acquisition and variance phases.
    """
    eng.pcfg[K.PC_ADC_NOISE] = adc_lsb
    eng.pcfg[K.PC_DAC_NOISE] = dac_lsb


def set_disturbance(eng, rms: float, fc: float = 2e3) -> None:
    """Retune the plant's seeded detuning-noise injection in place."""
    from lockboxsim.plants import one_pole_alpha
    eng.pcfg[K.PC_DIST_RMS] = rms
    eng.pcfg[K.PC_DIST_FC] = fc
    alpha = one_pole_alpha(fc)
    eng.pderiv[K.PD_DIST_ALPHA] = alpha
    eng.pderiv[K.PD_DIST_SCALE] = (rms / math.sqrt(alpha / (2.0 - alpha))
                                   if rms > 0 else 0.0)


def error_variance(eng, duration_shift: int = 7) -> float:
    eng.scope.arm(ch1="iq0", decimation_shift=duration_shift)
    eng.run_until_scope()
    tr, _, _ = eng.scope.traces_volts()
    return float(np.var(tr))


def run_iir_compensation(seed: int, out_dir: str | None = None) -> dict:
    """Uncompensated vs IIR-compensated loop at equal gain margin 2."""
    from lockboxsim.lockbox.sequence import LockStage
    stages = [
        LockStage(input=None, ival_preset_volts=0.0, duration_s=2e-3),
        LockStage(input="pdh", setpoint_theta=0.0, gain_factor=1.0,
                  duration_s=20e-3),
    ]
    # pure-integrator control on the bare actuator: the compensated loop
    # needs gains a 50 Hz PI corner could only reach with an absurd
    # proportional term
    eng, box = build_cavity_lock(seed=seed, theta0=0.25, with_modes=True,
                                 rc_fc=0.0, unity_gain_hz=400.0,
                                 stages=stages, disturbance_rms=0.02,
                                 piezo_gain=-1.0, demod_phase=45.0,
                                 sweep_freq_hz=100.0)
    freqs = np.asarray(loop_tf_grid(mode_fine_grid(strongest=2)))
    bg = measure_background(eng, freqs)
    report = box.run_sequence()
    if not report.locked:
        raise RuntimeError("iir-compensation: lock failed")

    # quiet sweeps: the margin measurement wants averaging the compressed
    # dwells cannot afford; the acoustic injection returns for the variance
    # comparison
    set_disturbance(eng, 0.0)
    set_converter_noise(eng, 0.0, 0.0)
    g_unc, m_unc = _rescale_to_margin(eng, freqs, bg, 2.0)
    set_disturbance(eng, 0.02, fc=800.0)
    set_converter_noise(eng, 4.0, 8.0)
    eng.run(int(2e-3 / TICK_SECONDS))
    var_unc = error_variance(eng)

    table, rounding = design_compensator()
    eng.iir.load_table(table)
    eng.iir.set("input_select", "pid0")
    eng.iir.set("output_select", "out2")
    eng.pid0.set("output_select", "off")
    eng.run(int(2e-3 / TICK_SECONDS))
    set_disturbance(eng, 0.0)
    set_converter_noise(eng, 0.0, 0.0)
    # pre-raise the gain into the newly opened range so the margin
    # crossings rise out of the measurement floor before fine-tuning
    eng.pid0.set("gain_i", eng.pid0.get("gain_i") * 10.0)
    eng.pid0.set("gain_p", eng.pid0.get("gain_p") * 10.0)
    eng.run(int(2e-3 / TICK_SECONDS))
    freqs_cmp = np.asarray(loop_tf_grid(mode_fine_grid(only_hz=60e3)))
    bg_cmp = measure_background(eng, freqs_cmp)
    g_cmp, m_cmp = _rescale_to_margin(eng, freqs_cmp, bg_cmp, 2.0)
    set_disturbance(eng, 0.02, fc=800.0)
    set_converter_noise(eng, 4.0, 8.0)
    eng.run(int(2e-3 / TICK_SECONDS))
    var_cmp = error_variance(eng)

    result = {
        "freqs": freqs,
        "freqs_compensated": freqs_cmp,
        "g_open_uncompensated": g_unc,
        "g_open_compensated": g_cmp,
        "margins_uncompensated": m_unc,
        "margins_compensated": m_cmp,
        "variance_uncompensated": var_unc,
        "variance_compensated": var_cmp,
        "ugf_ratio": (m_cmp.unity_gain_hz / m_unc.unity_gain_hz
                      if m_unc.unity_gain_hz and m_cmp.unity_gain_hz else None),
        "variance_ratio": var_unc / var_cmp if var_cmp > 0 else None,
        "rounding_max_error": rounding.max_error,
        "n_loops": table.n_loops,
    }
    if out_dir:
        write_csv(os.path.join(out_dir, "uncompensated.csv"),
                  ["freq_hz", "gopen_re", "gopen_im"],
                  [freqs, g_unc.real, g_unc.imag])
        write_csv(os.path.join(out_dir, "compensated.csv"),
                  ["freq_hz", "gopen_re", "gopen_im"],
                  [freqs_cmp, g_cmp.real, g_cmp.imag])
        with open(os.path.join(out_dir, "variance.txt"), "w") as f:
            f.write(f"ugf_uncompensated_hz: {m_unc.unity_gain_hz!r}\n")
            f.write(f"ugf_compensated_hz: {m_cmp.unity_gain_hz!r}\n")
            f.write(f"ugf_ratio: {result['ugf_ratio']!r}\n")
            f.write(f"gain_margin_uncompensated: {m_unc.gain_margin!r}\n")
            f.write(f"gain_margin_compensated: {m_cmp.gain_margin!r}\n")
            f.write(f"variance_uncompensated_v2: {var_unc!r}\n")
            f.write(f"variance_compensated_v2: {var_cmp!r}\n")
            f.write(f"variance_ratio: {result['variance_ratio']!r}\n")
        sections = np.array([s.as_tuple() for s in table.sections])
        write_csv(os.path.join(out_dir, "design.csv"),
                  ["b0", "b1", "a1", "a2"],
                  [sections[:, 0], sections[:, 1], sections[:, 2],
                   sections[:, 3]])
    return result


# ---------------------------------------------------------------------- pll
def run_pll(seed: int, out_dir: str | None = None,
            initial_offset_hz: float = 200e3,
            steps_deg=(60.0, 120.0, 180.0, 240.0)) -> dict:
    eng = build_pll(seed=seed, initial_offset_hz=initial_offset_hz)
    # before the lock is enabled the beat runs free: the phase register
    # saws through its saturated +-(2..4)pi band
    fast_gain_i = eng.pid0.get("gain_i")
    fast_gain_p = eng.pid0.get("gain_p")
    eng.pid0.set("gain_i", 0.0)
    eng.pid0.set("gain_p", 0.0)
    eng.run(int(0.2e-3 / TICK_SECONDS))
    # capture the acquisition on the scope at full rate: averaged
    # decimation would smear the +-2 pi register resets across samples
    eng.scope.arm(ch1="iq0", ch2="pid0", decimation_shift=0)
    eng.run(int(30e-6 / TICK_SECONDS))
    eng.pid0.set("gain_i", fast_gain_i)       # lock switched on
    eng.pid0.set("gain_p", fast_gain_p)
    pll_enable_slow_locks(eng)
    eng.run_until_scope()
    phase_tr, fast_tr, _ = eng.scope.traces_volts()
    acq_interval = eng.scope.sample_interval
    eng.run(int(1.0e-3 / TICK_SECONDS))

    # four phase-setpoint steps; record the quadrature pair per step
    blobs = []
    stds = []
    for step in steps_deg:
        pll_set_phase_setpoint(eng, step)
        eng.run(int(2.5e-3 / TICK_SECONDS))       # settle
        eng.scope.arm(ch1="iq1", ch2="iq2", decimation_shift=4)
        eng.run_until_scope()
        qi, qq, _ = eng.scope.traces_volts()
        ph = np.unwrap(np.arctan2(qq, qi))
        stds.append(float(np.degrees(ph.std())))
        blobs.append((qi, qq))
    result = {
        "acquisition_phase_v": phase_tr,
        "acquisition_fast_v": fast_tr,
        "acquisition_interval_s": acq_interval,
        "step_phase_std_deg": stds,
        "blobs": blobs,
        "steps_deg": list(steps_deg),
    }
    if out_dir:
        t = np.arange(len(phase_tr)) * acq_interval
        write_csv(os.path.join(out_dir, "pll_acquisition.csv"),
                  ["time_s", "cordic_phase_v", "fast_actuator_v"],
                  [t, phase_tr, fast_tr])
        cols, hdr = [], []
        for k, (qi, qq) in enumerate(blobs):
            hdr += [f"i{k}_v", f"q{k}_v"]
            cols += [qi, qq]
        write_csv(os.path.join(out_dir, "pll_quadratures.csv"), hdr, cols)
        with open(os.path.join(out_dir, "pll_steps.txt"), "w") as f:
            for step, std in zip(steps_deg, stds):
                f.write(f"setpoint_deg: {step!r} phase_std_deg: {std!r}\n")
    return result


RUNNERS = {
    "pdh-sweep": run_pdh_sweep,
    "lock-sequence": run_lock_sequence,
    "loop-tf": run_loop_tf,
    "iir-compensation": run_iir_compensation,
    "pll": run_pll,
}

"""Ready-made experiment setups: cavity lock, loop measurement, resonance
compensation, and the two-laser phase lock.

Each builder wires a fresh engine, plant and lockbox the way the bench
would be cabled; the CLI runner drives them and writes the artifacts.
Timings are compressed relative to a real bench (milliseconds instead of
hundreds of milliseconds) purely through gain/duration configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from lockboxsim import kernel as K
from lockboxsim.core.fixedpoint import TICK_SECONDS
from lockboxsim.engine import Engine
from lockboxsim.lockbox.calibration import CalibrationError, calibrate
from lockboxsim.lockbox.sequence import InputChain, Lockbox, LockboxConfig, LockStage
from lockboxsim.plants import CavityPlant, LaserPairPlant, default_piezo_modes

PDH_MOD_HZ = 25e6
PDH_BW_HZ = 1.5e6


def default_cavity_plant(theta0: float = 0.0, with_modes: bool = False,
                         noise: bool = True, disturbance_rms: float = 0.02,
                         rc_fc: float = 0.0,
                         piezo_gain: float = -30.0) -> CavityPlant:
    return CavityPlant(
        r_min=0.2,
        pdh_volts=0.5,
        reflection_volts=0.8,
        transmission_volts=0.8,
        eom_port=0,
        piezo_port=1,
        piezo_gain=piezo_gain,
        modes=default_piezo_modes() if with_modes else [],
        theta0=theta0,
        disturbance_rms=disturbance_rms if noise else 0.0,
        disturbance_fc=2e3,
        adc_noise=4.0 if noise else 0.0,
        dac_noise=8.0 if noise else 0.0,
        rc_fc=rc_fc,
    )


def fig6_stages() -> list[LockStage]:
    """Preset -> side-of-fringe at -3 bandwidths (gain 0.001) -> PDH at 0."""
    return [
        LockStage(input=None, ival_preset_volts=1.0, duration_s=100e-6),
        LockStage(input="reflection", setpoint_theta=-3.0, gain_factor=0.001,
                  duration_s=40e-3, exit_tolerance=0.05),
        LockStage(input="pdh", setpoint_theta=0.0, gain_factor=1.0,
                  duration_s=1.5e-3),
    ]


def setup_pdh_modulation(eng: Engine, phase_degrees: float = 0.0,
                         quadrature_factor: float = 4.0) -> None:
    """IQ0 generates the modulation tone on out1 and demodulates in1."""
    eng.iq0.setup(frequency_hz=PDH_MOD_HZ, phase_degrees=phase_degrees,
                  amplitude_volts=0.8, gain=0.0,
                  quadrature_factor=quadrature_factor,
                  bandwidth_hz=(PDH_BW_HZ,), output_mux="quadrature")
    eng.iq0.set("input_select", "in1")
    eng.iq0.set("output_select", "out1")


def cavity_lockbox(eng: Engine, unity_gain_hz: float = 2e5,
                   pi_corner_hz: float = 0.0,
                   stages: list[LockStage] | None = None,
                   actuator_theta_per_volt: float = -30.0,
                   sweep_freq_hz: float = 500.0) -> Lockbox:
    cfg = LockboxConfig(
        inputs={
            "reflection": InputChain(source="in1", prefilter_hz=3e5),
            "pdh": InputChain(source="iq0", prefilter_hz=1e6),
        },
        stages=stages if stages is not None else fig6_stages(),
        pid="pid0",
        output="out2",
        unity_gain_hz=unity_gain_hz,
        pi_corner_hz=pi_corner_hz,
        actuator_theta_per_volt=actuator_theta_per_volt,
        r_min=0.2,
        locked_tolerance=0.10,
        locked_dwell_s=1e-3,
        loss_tolerance=0.5,
        loss_dwell_s=1e-3,
        monitor_input="reflection",
        sweep_span_volts=1.0,
        sweep_freq_hz=sweep_freq_hz,
    )
    return Lockbox(eng, cfg)


def tune_demod_phase(box: Lockbox, candidates=None) -> float:
    """Pick the demodulation phase maximizing the dispersive signal slope.

    Mirrors the bench procedure of sweeping the cavity while stepping the
    phase register and keeping the strongest error signal.
    """
    eng = box.engine
    best_phase, best_scale = 0.0, -1.0
    if candidates is None:
        candidates = np.arange(0.0, 180.0, 22.5)
    for phi in candidates:
        eng.iq0.set("phase_degrees", float(phi))
        try:
            cal = box.calibrate_input("pdh")
        except CalibrationError:
            continue
        if abs(cal.scale) > best_scale:
            best_scale = abs(cal.scale)
            best_phase = float(phi)
    if best_scale <= 0:
        raise CalibrationError("no demodulation phase produced a usable "
                               "dispersive signal")
    eng.iq0.set("phase_degrees", best_phase)
    box.calibrate_input("pdh")
    return best_phase


def build_cavity_lock(seed: int, theta0: float, with_modes: bool = False,
                      unity_gain_hz: float = 2e5,
                      stages: list[LockStage] | None = None,
                      noise: bool = True, rc_fc: float = 0.0,
                      disturbance_rms: float = 0.02,
                      power_down: bool = True,
                      demod_phase: float | None = None,
                      piezo_gain: float = -30.0,
                      sweep_freq_hz: float = 500.0
                      ) -> tuple[Engine, Lockbox]:
    """Engine + calibrated lockbox for the Fabry-Perot experiments.

    Passing ``demod_phase`` skips the phase scan (the optimum depends only
    on the signal-chain delays, not on the seed), leaving one calibration
    sweep per input.
    """
    eng = Engine(seed=seed)
    eng.set_plant(default_cavity_plant(theta0=theta0, with_modes=with_modes,
                                       noise=noise, rc_fc=rc_fc,
                                       disturbance_rms=disturbance_rms,
                                       piezo_gain=piezo_gain))
    if power_down:
        eng.power_down_unused(["asg0", "pid0", "iq0", "iq1", "iir", "scope"])
    setup_pdh_modulation(eng)
    box = cavity_lockbox(eng, unity_gain_hz=unity_gain_hz, stages=stages,
                         actuator_theta_per_volt=piezo_gain,
                         sweep_freq_hz=sweep_freq_hz)
    box.calibrate_input("reflection")
    if demod_phase is None:
        tune_demod_phase(box)
    else:
        eng.iq0.set("phase_degrees", demod_phase)
        box.calibrate_input("pdh")
    return eng, box


def build_pll(seed: int, initial_offset_hz: float = 200e3,
              beat_hz: float = 9e6) -> Engine:
    """Two-laser phase lock: IQ demod + CORDIC -> cascaded PIDs.

    pid0 (fast piezo, out1) takes the CORDIC phase error; pid1 (slow piezo,
    out2) centers pid0's output; pid2 drives the crystal temperature from
    pid1's output.  A second pair of IQ slots taps the quadratures for
    monitoring.
    """
    eng = Engine(seed=seed)
    eng.set_plant(LaserPairPlant(
        beat_offset_hz=beat_hz + initial_offset_hz,
        fast_port=0, fast_gain=3e5, fast_fc=1e5,
        slow_port=1, slow_gain=2e6, slow_fc=10.0,
        temp_slot=8, temp_gain=2e4,
        amplitude_volts=0.5,
        adc_noise=4.0,
    ))
    eng.power_down_unused(["iq0", "iq1", "iq2", "pid0", "pid1", "pid2",
                           "scope"])
    eng.iq0.setup(frequency_hz=beat_hz, phase_degrees=0.0, gain=0.0,
                  bandwidth_hz=(3e5, 3e5), output_mux="cordic_phase")
    eng.iq0.set("input_select", "in1")
    # monitoring quadratures, 90 degrees apart
    for m, phase in ((eng.iq1, 90.0), (eng.iq2, 0.0)):
        m.setup(frequency_hz=beat_hz, phase_degrees=phase, gain=0.0,
                quadrature_factor=2.0, bandwidth_hz=(1e5,),
                output_mux="quadrature")
        m.set("input_select", "in1")
    # fast lock: CORDIC phase -> fast piezo; negative gains close the loop
    # against a positive beat-frequency offset
    eng.pid0.setup(gain_i=-1.2e5, gain_p=-1.0, setpoint_volts=0.0)
    eng.pid0.set("input_select", "iq0")
    eng.pid0.set("output_select", "out1")
    # slow lock: center the fast actuator
    eng.pid1.setup(gain_i=0.0)
    eng.pid1.set("input_select", "pid0")
    eng.pid1.set("output_select", "out2")
    # temperature: center the slow actuator
    eng.pid2.setup(gain_i=0.0)
    eng.pid2.set("input_select", "pid1")
    return eng


def pll_enable_slow_locks(eng: Engine) -> None:
    eng.pid1.set("gain_i", 1e2)
    eng.pid2.set("gain_i", 1e1)


def pll_set_phase_setpoint(eng: Engine, degrees: float) -> None:
    """Phase setpoint in degrees mapped onto the CORDIC register scale."""
    lsb_per_deg = (1 << 11) / 180.0
    eng.pid0._setS(K.P_SETPOINT, int(round(degrees * lsb_per_deg)))

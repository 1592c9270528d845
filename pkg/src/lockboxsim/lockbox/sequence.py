"""Staged lock acquisition with loss-of-lock monitoring and auto-relock.

A sequence is a list of stages; each stage picks a calibrated error
signal, a setpoint in detuning units, and a gain factor.  The controller
gain is normalized by the calibrated slope of the chosen signal at the
setpoint, so gain factors are dimensionless and transfer between inputs.
Stages hand over after a fixed duration or, optionally, as soon as the
calibrated error settles inside a threshold.

The supervisor advances the engine in short chunks and inspects registers
at tick boundaries only, mirroring a control process polling a live
device.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from lockboxsim.core.fixedpoint import TICK_SECONDS
from lockboxsim.lockbox.calibration import CalibrationError, InputCalibration, calibrate


@dataclass
class LockStage:
    input: str | None = None          # calibrated signal kind; None: hold
    setpoint_theta: float = 0.0
    gain_factor: float = 1.0
    duration_s: float = 10e-3         # dwell (maximum when exit_tolerance set)
    ival_preset_volts: float | None = None
    exit_tolerance: float | None = None   # early handover threshold, units
    exit_dwell_s: float = 200e-6


@dataclass
class InputChain:
    source: str                        # router slot feeding the PID
    prefilter_hz: float = 0.0


@dataclass
class LockboxConfig:
    inputs: dict[str, InputChain] = field(default_factory=dict)
    stages: list[LockStage] = field(default_factory=list)
    pid: str = "pid0"
    output: str = "out2"
    unity_gain_hz: float = 1e5         # slope-normalized loop rate at factor 1
    pi_corner_hz: float = 0.0          # 0: pure integrator
    actuator_theta_per_volt: float = -40.0
    r_min: float = 0.2
    locked_tolerance: float = 0.10     # calibrated error units
    locked_dwell_s: float = 1e-3
    loss_tolerance: float = 0.5
    loss_dwell_s: float = 5e-3
    relock_budget: int = 3
    monitor_period_s: float = 50e-6
    # loss detection watches this calibrated input; None falls back to the
    # active stage's own error signal.  The dispersive signal shrinks far
    # from resonance, so an even signal like the reflection makes a far
    # better watchdog.
    monitor_input: str | None = None
    sweep_asg: str = "asg0"
    sweep_span_volts: float = 1.0
    sweep_freq_hz: float = 500.0


@dataclass
class LockEvent:
    tick: int
    kind: str                          # stage | locked | loss | relock | fail
    detail: str = ""


@dataclass
class LockReport:
    locked: bool
    stage_ticks: list[tuple[int, int]]
    events: list[LockEvent]
    final_error_units: float
    final_error_std_units: float
    attempts: int = 1


_SHAPE_SLOPES = {
    "reflection": lambda th, rmin: (1.0 - rmin) * 2 * th / (1 + th * th) ** 2,
    "transmission": lambda th, rmin: -2 * th / (1 + th * th) ** 2,
    "pdh": lambda th, rmin: (1 - th * th) / (1 + th * th) ** 2,
}


class LockFailure(RuntimeError):
    pass


class Lockbox:
    """Supervisory layer: calibration, staged acquisition, auto-relock."""

    def __init__(self, engine, config: LockboxConfig, pump=None):
        self.engine = engine
        self.config = config
        self.calibrations: dict[str, InputCalibration] = {}
        self.events: list[LockEvent] = []
        self._active_stage: LockStage | None = None
        # called between engine chunks so external command queues stay live
        self.pump = pump or (lambda: None)
        # optional callable receiving every LockEvent as it is recorded
        self.event_sink = None

    def _emit(self, event: LockEvent) -> None:
        self.events.append(event)
        if self.event_sink is not None:
            self.event_sink(event)

    # -- calibration --------------------------------------------------------
    def calibrate_input(self, kind: str) -> InputCalibration:
        """Sweep the actuator across the resonance and fit the error shape."""
        eng = self.engine
        cfg = self.config
        chain = cfg.inputs[kind]
        pid = eng.modules[cfg.pid]
        asg = eng.modules[cfg.sweep_asg]
        pid.set("output_select", "off")
        asg.load_ramp(-cfg.sweep_span_volts, cfg.sweep_span_volts)
        asg.setup(frequency_hz=cfg.sweep_freq_hz, scale=1.0)
        asg.set("output_select", cfg.output)
        # cover at least two sweep periods so the dip is always present,
        # with enough decimation to average modulation ripple away
        period_ticks = int(round(1.0 / cfg.sweep_freq_hz / TICK_SECONDS))
        dec = max(0, math.ceil(math.log2(max(1.0, 2.0 * period_ticks / 16384))))
        eng.run(1000)
        eng.scope.arm(ch1=chain.source, ch2=cfg.sweep_asg, decimation_shift=dec)
        eng.run_until_scope()
        trace, drive, _ = eng.scope.traces_volts()
        asg.set("output_select", "off")
        asg._setS(3, 0)
        cal = calibrate(kind, trace, r_min=cfg.r_min, drive_volts=drive,
                        theta_per_volt_sign=int(math.copysign(
                            1.0, cfg.actuator_theta_per_volt)))
        self.calibrations[kind] = cal
        return cal

    def slope_volts_per_theta(self, kind: str, theta: float) -> float:
        cal = self.calibrations[kind]
        return cal.scale * _SHAPE_SLOPES[kind](theta, cal.r_min)

    # -- staged acquisition --------------------------------------------------
    def _apply_stage(self, stage: LockStage) -> None:
        eng = self.engine
        cfg = self.config
        pid = eng.modules[cfg.pid]
        if stage.ival_preset_volts is not None:
            pid.set("ival_volts", stage.ival_preset_volts)
        if stage.input is None:
            pid.set("gain_i", 0.0)
            pid.set("gain_p", 0.0)
            pid.set("output_select", cfg.output)
            self._active_stage = stage
            return
        if stage.input not in self.calibrations:
            raise LockFailure(f"input {stage.input!r} is not calibrated")
        cal = self.calibrations[stage.input]
        chain = cfg.inputs[stage.input]
        slope = self.slope_volts_per_theta(stage.input, stage.setpoint_theta)
        if slope == 0.0:
            raise LockFailure(
                f"setpoint {stage.setpoint_theta} sits on a zero-slope point "
                f"of {stage.input!r}")
        gain_i = -2.0 * math.pi * cfg.unity_gain_hz * stage.gain_factor / (
            slope * cfg.actuator_theta_per_volt)
        pid.set("input_select", chain.source)
        if chain.prefilter_hz > 0:
            pid.set_prefilter(0, "lowpass", chain.prefilter_hz)
        else:
            pid.set_prefilter(0, "off")
        pid.set("setpoint_volts", cal.expected_volts(stage.setpoint_theta))
        pid.set("gain_i", gain_i)
        gp = 0.0
        if cfg.pi_corner_hz > 0:
            gp = gain_i / (2.0 * math.pi * cfg.pi_corner_hz)
        pid.set("gain_p", gp)
        pid.set("output_select", cfg.output)
        self._active_stage = stage

    def error_units(self) -> float:
        """Calibrated error of the active stage, in model-shape units."""
        stage = self._active_stage
        if stage is None or stage.input is None:
            return 0.0
        cal = self.calibrations[stage.input]
        pid = self.engine.modules[self.config.pid]
        volts = pid.filtered_input / 8191.0
        return (volts - pid.get("setpoint_volts")) / cal.scale

    def monitor_error_units(self) -> float:
        """Deviation of the watched input from its locked value, in units."""
        kind = self.config.monitor_input
        stage = self._active_stage
        if kind is None or kind not in self.calibrations:
            return self.error_units()
        if stage is None:
            return 0.0
        cal = self.calibrations[kind]
        source = self.config.inputs[kind].source
        slot = self.engine.modules[source].slot
        volts = int(self.engine.sig[slot]) / 8191.0
        want = cal.expected_volts(stage.setpoint_theta
                                  if stage.input == kind else
                                  self.config.stages[-1].setpoint_theta)
        return (volts - want) / cal.scale

    def run_sequence(self) -> LockReport:
        cfg = self.config
        attempts = 0
        while True:
            attempts += 1
            report = self._run_stages()
            report.attempts = attempts
            if report.locked:
                return report
            if attempts > cfg.relock_budget:
                self._emit(LockEvent(self.engine.tick, "fail",
                                             "relock budget exhausted"))
                report.events = list(self.events)
                return report
            self._emit(LockEvent(self.engine.tick, "relock",
                                         f"attempt {attempts + 1}"))

    def _run_stages(self) -> LockReport:
        eng = self.engine
        cfg = self.config
        chunk = max(64, int(round(cfg.monitor_period_s / TICK_SECONDS)))
        stage_ticks: list[tuple[int, int]] = []
        for idx, stage in enumerate(cfg.stages):
            t_in = eng.tick
            self._apply_stage(stage)
            self._emit(LockEvent(t_in, "stage", f"stage {idx}"))
            max_ticks = int(round(stage.duration_s / TICK_SECONDS))
            waited = 0
            settle = 0
            need = max(1, int(round(stage.exit_dwell_s / TICK_SECONDS / chunk)))
            while waited < max_ticks:
                eng.run(min(chunk, max_ticks - waited))
                waited += chunk
                self.pump()
                if stage.exit_tolerance is not None and stage.input is not None:
                    if abs(self.error_units()) < stage.exit_tolerance:
                        settle += 1
                        if settle >= need:
                            break
                    else:
                        settle = 0
            stage_ticks.append((t_in, eng.tick))
        locked, err_mean, err_std = self._locked_check()
        if locked:
            self._emit(LockEvent(eng.tick, "locked"))
        return LockReport(locked=locked, stage_ticks=stage_ticks,
                          events=list(self.events),
                          final_error_units=err_mean,
                          final_error_std_units=err_std)

    def _locked_check(self) -> tuple[bool, float, float]:
        """Dwell test: the error must hold inside tolerance AND the watched
        auxiliary signal must sit at its locked level.  The dispersive
        error alone is blind far off resonance, where it is small simply
        because the signal has died out."""
        cfg = self.config
        eng = self.engine
        chunk = max(64, int(round(cfg.monitor_period_s / TICK_SECONDS)))
        n = max(2, int(round(cfg.locked_dwell_s / TICK_SECONDS / chunk)))
        errs = []
        aux = []
        for _ in range(n):
            eng.run(chunk)
            self.pump()
            errs.append(self.error_units())
            aux.append(self.monitor_error_units())
        errs = np.asarray(errs)
        ok = bool(np.all(np.abs(errs) < cfg.locked_tolerance))
        ok &= bool(np.mean(np.abs(aux)) < cfg.loss_tolerance)
        return ok, float(errs.mean()), float(errs.std())

    # -- monitoring ----------------------------------------------------------
    def monitor(self, duration_s: float, auto_relock: bool = True
                ) -> list[LockEvent]:
        """Watch the lock; on sustained loss, optionally relock.

        Returns the events recorded during this watch window.
        """
        cfg = self.config
        eng = self.engine
        chunk = max(64, int(round(cfg.monitor_period_s / TICK_SECONDS)))
        need = max(1, int(round(cfg.loss_dwell_s / TICK_SECONDS / chunk)))
        t_end = eng.tick + int(round(duration_s / TICK_SECONDS))
        start_idx = len(self.events)
        bad = 0
        while eng.tick < t_end:
            eng.run(chunk)
            self.pump()
            if abs(self.monitor_error_units()) > cfg.loss_tolerance:
                bad += 1
                if bad >= need:
                    self._emit(LockEvent(eng.tick, "loss"))
                    if auto_relock:
                        self._emit(LockEvent(eng.tick, "relock",
                                                     "auto"))
                        self.run_sequence()
                    bad = 0
            else:
                bad = 0
        return self.events[start_idx:]

    def measure_dc(self, source: str, decimation_shift: int = 4) -> float:
        """Decimated scope average of a signal, in volts."""
        eng = self.engine
        eng.scope.arm(ch1=source, decimation_shift=decimation_shift)
        eng.run_until_scope()
        tr, _, _ = eng.scope.traces_volts()
        return float(tr.mean())

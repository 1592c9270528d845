"""Error-signal calibration against the model line shapes.

Sweeping the actuator across at least one full resonance gives the raw
signal trace; the vertical offset comes from the off-resonance baseline
and the scale from the peak-to-peak excursion, matched to the model shape
so the lockbox can translate any setpoint in detuning units into volts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lockboxsim.plants import cavity_outputs


@dataclass
class InputCalibration:
    kind: str                  # reflection | transmission | pdh
    offset_volts: float        # y0
    scale: float               # g, volts per unit model signal
    theta_span: float          # detuning range covered by the sweep

    def expected_volts(self, theta: float) -> float:
        r, t, p = cavity_outputs(r_min=self.r_min, theta=theta)
        shape = {"reflection": r, "transmission": t, "pdh": p}[self.kind]
        return self.offset_volts + self.scale * shape

    def error_units(self, volts: float) -> float:
        """Calibrated signal: (raw - y0)/g, in model-shape units."""
        return (volts - self.offset_volts) / self.scale

    r_min: float = 0.2


class CalibrationError(RuntimeError):
    pass


def calibrate(kind: str, trace_volts, r_min: float = 0.2,
              theta_span: float = 40.0, drive_volts=None,
              theta_per_volt_sign: int = 1) -> InputCalibration:
    """Fit offset and scale of a swept error-signal trace.

    The sweep must cross the resonance: detected by requiring the trace
    excursion to stand out from the baseline.  For the reflection signal
    the baseline is the off-resonance plateau (the high quantile) and the
    scale comes from the depth of the dip; for transmission the baseline is
    the floor and the scale from the peak.  The dispersive signal is odd in
    the detuning, so its scale carries a sign, recovered by correlating the
    positions of its extremes with the recorded drive voltage (the detuning
    is a static map of the drive, so the extremes sit at fixed drive values
    regardless of sweep direction).
    """
    x = np.asarray(trace_volts, dtype=np.float64)
    if len(x) < 64:
        raise CalibrationError("sweep trace too short")
    lo, hi = np.quantile(x, [0.02, 0.98])
    span = hi - lo
    noise = np.std(np.diff(x)) + 1e-12
    if span < 8 * noise or span <= 0:
        raise CalibrationError(f"no resonance found in sweep ({kind})")

    if kind == "reflection":
        base = np.quantile(x, 0.9)       # off-resonance plateau
        dip = x.min()
        # model: base = y0 + g*1, dip = y0 + g*r_min
        g = (base - dip) / (1.0 - r_min)
        y0 = base - g
    elif kind == "transmission":
        base = np.quantile(x, 0.1)       # off-resonance floor ~ 0
        peak = x.max()
        g = peak - base                  # model peak is 1
        y0 = base
    elif kind == "pdh":
        mid = np.median(x)
        # model peaks are +-1/2 at theta = -+1: peak-to-peak is 1.0
        g = np.quantile(x, 0.999) - np.quantile(x, 0.001)
        y0 = mid
        if drive_volts is None:
            raise CalibrationError(
                "dispersive calibration needs the drive trace to fix the "
                "slope sign")
        v = np.asarray(drive_volts, dtype=np.float64)
        i_max, i_min = int(np.argmax(x)), int(np.argmin(x))
        dv = v[i_max] - v[i_min]
        if abs(dv) < 1e-6:
            raise CalibrationError("sweep extremes indistinguishable in drive")
        # positive model slope: signal maximum on the positive-detuning side
        g *= float(np.sign(dv)) * float(np.sign(theta_per_volt_sign))
    else:
        raise ValueError(f"unknown input kind {kind!r}")
    if abs(g) < 8 * noise:
        raise CalibrationError(f"no resonance found in sweep ({kind})")
    return InputCalibration(kind=kind, offset_volts=float(y0),
                            scale=float(g), theta_span=theta_span,
                            r_min=r_min)

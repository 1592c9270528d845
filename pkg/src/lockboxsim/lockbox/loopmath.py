"""Loop algebra: closed-to-open-loop conversion and Nyquist margins.

Measuring at the summing node where excitation and feedback meet gives the
closed-loop response G_closed = 1/(1 - G_open); inverting it pointwise,
G_open = 1 - 1/G_closed.  In this convention the loop is unstable when the
locus encircles (1, 0): gain margins live at the zero-phase crossings and
phase margin is measured from the negative real axis at unity gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class StabilityMargins:
    unity_gain_hz: float | None
    phase_margin_deg: float | None
    gain_margin: float | None
    gain_margin_hz: float | None

    def stable(self) -> bool:
        ok = True
        if self.phase_margin_deg is not None:
            ok &= self.phase_margin_deg > 0
        if self.gain_margin is not None:
            ok &= self.gain_margin > 1
        return ok


def open_loop_from_closed(g_closed, background=None, floor: float = 1e-12):
    """Pointwise G_open = 1 - 1/G_closed after background subtraction.

    Points where |G_closed| falls below ``floor`` cannot be inverted and
    come back as NaN; callers decide whether that is an error.
    """
    g = np.asarray(g_closed, dtype=np.complex128).copy()
    if background is not None:
        g = g - np.asarray(background, dtype=np.complex128)
    out = np.full(len(g), np.nan + 0j, dtype=np.complex128)
    ok = np.abs(g) > floor
    out[ok] = 1.0 - 1.0 / g[ok]
    return out


def closed_from_open(g_open):
    g = np.asarray(g_open, dtype=np.complex128)
    return 1.0 / (1.0 - g)


def nyquist_margins(freqs, g_open) -> StabilityMargins:
    """Margins of an open-loop locus sampled on an increasing frequency grid.

    Unity-gain frequency: log-interpolated |G| = 1 crossing (the highest
    one, where stability is decided).  Phase margin: angular distance of
    arg G there from the zero-phase critical direction, in [0, 180]; a pure
    integrator loop reads 90 and a matched first-order pole at crossover
    takes it to 45.  Gain margin: 1/|G| at the zero-phase crossing closest
    to instability (smallest 1/|G|), log-interpolated.
    """
    f = np.asarray(freqs, dtype=np.float64)
    g = np.asarray(g_open, dtype=np.complex128)
    ok = np.isfinite(g)
    f, g = f[ok], g[ok]
    if len(f) < 2:
        return StabilityMargins(None, None, None, None)
    mag = np.abs(g)
    phase = np.unwrap(np.angle(g))

    ugf = None
    pm = None
    lm = np.log(mag)
    cross = np.nonzero(np.sign(lm[:-1]) * np.sign(lm[1:]) < 0)[0]
    if len(cross):
        i = cross[-1]
        t = lm[i] / (lm[i] - lm[i + 1])
        ugf = float(np.exp(np.log(f[i]) + t * (np.log(f[i + 1]) - np.log(f[i]))))
        ph = math.degrees(phase[i] + t * (phase[i + 1] - phase[i]))
        pm = abs((ph + 180.0) % 360.0 - 180.0)

    gm = None
    gm_f = None
    # zero-phase crossings (mod 2 pi) are where the locus crosses the
    # positive real axis toward the (1, 0) critical point
    wrapped = (np.angle(g) + np.pi) % (2 * np.pi) - np.pi
    zc = np.nonzero((np.sign(wrapped[:-1]) != np.sign(wrapped[1:]))
                    & (np.abs(np.diff(wrapped)) < np.pi))[0]
    for i in zc:
        t = wrapped[i] / (wrapped[i] - wrapped[i + 1])
        m = math.exp(np.log(mag[i]) + t * (np.log(mag[i + 1]) - np.log(mag[i])))
        if m <= 0.02:
            continue      # far from the critical point: not a margin

        margin = 1.0 / m
        if gm is None or margin < gm:
            gm = margin
            gm_f = float(np.exp(np.log(f[i])
                                + t * (np.log(f[i + 1]) - np.log(f[i]))))
    return StabilityMargins(ugf, pm, gm, gm_f)

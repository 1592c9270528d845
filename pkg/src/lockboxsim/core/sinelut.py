"""Quarter-wave sine lookup table.

A 2^11-entry table of 17-bit signed magnitudes covers one quarter period;
full-wave values are reconstructed by quadrant symmetry from the top 13
bits of a 32-bit phase accumulator (2 quadrant bits + 11 index bits).
Entry i holds round((2^16-1) * sin(pi/2 * (i+1)/2048)), with the exact
zero at quadrant starts hardwired, so the folded output equals the ideal
rounded sine at every one of the 2^13 distinct phases.
"""

from __future__ import annotations

import math

import numpy as np

LUT_BITS = 11
LUT_SIZE = 1 << LUT_BITS                 # 2048
LUT_AMPLITUDE = (1 << 16) - 1            # 65535, peak of the 17-bit signed output
QUARTER_TURN = 1 << 30                   # phase word for +90 degrees


def build_table() -> np.ndarray:
    """17-bit magnitudes of sin over (0, pi/2], 2048 entries."""
    i = np.arange(1, LUT_SIZE + 1, dtype=np.float64)
    return np.rint(LUT_AMPLITUDE * np.sin(math.pi / 2 * i / LUT_SIZE)).astype(np.int64)


_TABLE = build_table()


def lut_sin(phase: int, shift: int = 0) -> int:
    """Folded sine sample for a 32-bit phase word plus an offset word.

    Matches the arithmetic used in the engine kernel bit for bit; the
    phase-shifted outputs needed for quadrature demodulation come from
    adding quarter-turn multiples to ``shift``.
    """
    p = (phase + shift) & 0xFFFFFFFF
    idx13 = p >> 19
    quadrant = idx13 >> LUT_BITS
    idx = idx13 & (LUT_SIZE - 1)
    if quadrant == 0:
        return 0 if idx == 0 else int(_TABLE[idx - 1])
    if quadrant == 1:
        return int(_TABLE[LUT_SIZE - 1 - idx])
    if quadrant == 2:
        return 0 if idx == 0 else -int(_TABLE[idx - 1])
    return -int(_TABLE[LUT_SIZE - 1 - idx])


def lut_cos(phase: int, shift: int = 0) -> int:
    return lut_sin(phase, shift + QUARTER_TURN)

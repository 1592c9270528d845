"""Fixed-point primitives shared by every DSP block.

All inter-module signals are signed 14-bit samples in [-8192, 8191] with
8191 representing +1.0 V.  Arithmetic on them saturates, never wraps.
Filter coefficients use a signed 3.29 fixed-point format (3 integer bits,
29 fractional bits), quantized with round-to-nearest-even.
"""

from __future__ import annotations

CLOCK_HZ = 125_000_000
TICK_SECONDS = 8e-9

SAMPLE_MIN = -(1 << 13)          # -8192
SAMPLE_MAX = (1 << 13) - 1       # +8191
FULL_SCALE_VOLTS = 1.0           # SAMPLE_MAX <-> +1.0 V

COEFF_FRAC_BITS = 29
COEFF_INT_BITS = 3
COEFF_SCALE = 1 << COEFF_FRAC_BITS
COEFF_CODE_MAX = (1 << (COEFF_FRAC_BITS + COEFF_INT_BITS - 1)) - 1   # 2^31 - 1
COEFF_CODE_MIN = -(1 << (COEFF_FRAC_BITS + COEFF_INT_BITS - 1))

ACCUMULATOR_BITS = 62
ACC_MAX = (1 << (ACCUMULATOR_BITS - 1)) - 1
ACC_MIN = -(1 << (ACCUMULATOR_BITS - 1))


def sat14(value: int) -> int:
    """Clamp an integer to the signed 14-bit sample range."""
    if value > SAMPLE_MAX:
        return SAMPLE_MAX
    if value < SAMPLE_MIN:
        return SAMPLE_MIN
    return value


def sat_add(a: int, b: int) -> int:
    """Saturating sum of two 14-bit samples (output summation semantics)."""
    return sat14(a + b)


def volts_to_sample(volts: float) -> int:
    """Quantize a voltage to a 14-bit sample (round-half-even, saturating)."""
    return sat14(round_half_even(volts * SAMPLE_MAX))


def sample_to_volts(sample: int) -> float:
    return sample / SAMPLE_MAX


def round_half_even(x: float) -> int:
    """Round to nearest integer, ties to even (Python round() semantics)."""
    return int(round(x))


def quantize_coeff(value: float) -> int:
    """Quantize a filter coefficient to its 3.29 integer code.

    Raises ValueError when the magnitude falls outside the representable
    (-4, 4) range instead of saturating: a clipped coefficient silently
    changes the filter, which is never acceptable.
    """
    code = round_half_even(value * COEFF_SCALE)
    if code > COEFF_CODE_MAX or code < COEFF_CODE_MIN:
        raise ValueError(
            f"coefficient {value!r} outside representable 3.29 range (-4, 4)"
        )
    return code


def coeff_to_float(code: int) -> float:
    return code / COEFF_SCALE


def frequency_word(freq_hz: float) -> int:
    """32-bit phase-increment word for a tone at freq_hz (round-half-even)."""
    word = round_half_even(freq_hz / CLOCK_HZ * (1 << 32))
    return word & 0xFFFFFFFF


def word_to_frequency(word: int) -> float:
    return (word & 0xFFFFFFFF) * CLOCK_HZ / (1 << 32)

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lockboxsim.core.fixedpoint import (
    SAMPLE_MAX,
    SAMPLE_MIN,
    coeff_to_float,
    frequency_word,
    quantize_coeff,
    sat_add,
    volts_to_sample,
)
from lockboxsim.core.lehmer import LEHMER_MODULUS, lehmer_next, seed_stream
from lockboxsim.core.sinelut import LUT_AMPLITUDE, QUARTER_TURN, lut_cos, lut_sin

samples = st.integers(min_value=SAMPLE_MIN, max_value=SAMPLE_MAX)


class TestSatAdd:
    def test_identity(self):
        assert sat_add(0, 0) == 0

    def test_ceiling(self):
        assert sat_add(8191, 8191) == 8191

    def test_plain_sum(self):
        assert sat_add(5000, -2000) == 3000

    def test_floor(self):
        assert sat_add(-8192, -8192) == -8192

    @given(samples, samples)
    def test_saturation_matches_exact_sum_in_range(self, a, b):
        r = sat_add(a, b)
        assert SAMPLE_MIN <= r <= SAMPLE_MAX
        if SAMPLE_MIN <= a + b <= SAMPLE_MAX:
            assert r == a + b
        else:
            assert r in (SAMPLE_MIN, SAMPLE_MAX)


class TestSineLut:
    def test_phase_zero(self):
        assert lut_sin(0) == 0

    def test_quarter_turn_peak(self):
        # round((2^16-1) * sin(pi/2))
        assert lut_sin(QUARTER_TURN) == 65535

    def test_half_turn(self):
        assert lut_sin(2 * QUARTER_TURN) == 0

    def test_three_quarter_turn(self):
        assert lut_sin(3 * QUARTER_TURN) == -65535

    def test_cos_is_shifted_sin(self):
        for p in (0, 123456789, 2**31 + 12345):
            assert lut_cos(p) == lut_sin(p + QUARTER_TURN)

    def test_accuracy_at_all_folded_indices(self):
        # ideal rounded sine at each of the 2^13 distinct folded phases
        k = np.arange(1 << 13)
        ideal = np.rint(LUT_AMPLITUDE * np.sin(2 * np.pi * k / (1 << 13)))
        got = np.array([lut_sin(int(kk) << 19) for kk in k])
        assert np.abs(got - ideal).max() <= 1

    def test_low_phase_bits_ignored(self):
        assert lut_sin(123 << 19) == lut_sin((123 << 19) + 0x7FFFF)


class TestLehmer:
    def test_first_step_from_one(self):
        # one multiply-mod step: 16807 * 1 mod (2^31 - 1)
        _, state = lehmer_next(1)
        assert state == 16807

    def test_step_from_m_minus_one(self):
        # (-1 * 16807) mod m
        _, state = lehmer_next(LEHMER_MODULUS - 1)
        assert state == LEHMER_MODULUS - 16807

    def test_zero_seed_rejected(self):
        with pytest.raises(ValueError):
            lehmer_next(0)

    def test_sample_range(self):
        state = 12345
        lo, hi = 0, 0
        for _ in range(10000):
            s, state = lehmer_next(state)
            lo, hi = min(lo, s), max(hi, s)
        assert lo >= -8192 and hi <= 8191
        assert lo < -7000 and hi > 7000    # spans most of the range

    def test_no_repeat_within_million_steps(self):
        seed = 987654321 % LEHMER_MODULUS
        state = seed
        for _ in range(10**6):
            _, state = lehmer_next(state)
            assert state != seed

    def test_seed_stream_valid_and_distinct(self):
        states = {seed_stream(7, k) for k in range(16)}
        assert len(states) == 16
        for s in states:
            assert 1 <= s < LEHMER_MODULUS


class TestCoefficients:
    def test_powers_of_two_exact(self):
        for v in (1.0, -0.75, 0.125, -2.5):
            assert coeff_to_float(quantize_coeff(v)) == v

    def test_range_limits(self):
        with pytest.raises(ValueError):
            quantize_coeff(4.0)
        with pytest.raises(ValueError):
            quantize_coeff(-4.0 - 2.0**-29)
        quantize_coeff(-4.0)            # exactly representable
        quantize_coeff(4.0 - 2.0**-29)  # largest positive code

    @given(st.floats(min_value=-3.999, max_value=3.999, allow_nan=False))
    def test_quantization_error_bound(self, v):
        err = abs(coeff_to_float(quantize_coeff(v)) - v)
        assert err <= 2.0**-30 + 1e-18

    def test_round_half_even(self):
        # exact ties round to the even code
        lsb = 2.0**-29
        assert quantize_coeff(2.5 * lsb) == 2
        assert quantize_coeff(3.5 * lsb) == 4


class TestFrequencyWord:
    def test_round_trip(self):
        w = frequency_word(15e6)
        assert w == round(15e6 / 125e6 * 2**32)

    def test_unit_word_resolution(self):
        # word of 1 <-> 125 MHz / 2^32
        assert frequency_word(125e6 / 2**32) == 1

    def test_volts_quantization(self):
        assert volts_to_sample(1.0) == SAMPLE_MAX
        assert volts_to_sample(-1.0) == -SAMPLE_MAX
        assert volts_to_sample(0.0) == 0
        assert volts_to_sample(2.0) == SAMPLE_MAX

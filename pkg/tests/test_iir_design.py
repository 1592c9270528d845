"""Design-pipeline tests: every expected value comes from an independent
computation (direct algebra at probe points, polynomial division, or the
quantization grid) rather than from the code under test."""

import cmath
import math

import numpy as np
import pytest

from lockboxsim.core.fixedpoint import TICK_SECONDS
from lockboxsim.iir.design import (
    BiquadSection,
    BiquadTable,
    DesignError,
    DiscreteRational,
    TransferSpec,
    design_filter,
    discretize,
    eval_transfer,
    expansion_value,
    factored_value,
    proper_sys,
    rescale,
    residues,
    round_coefficients,
    to_biquads,
)

TWO_PI = 2.0 * math.pi


class TestProperSys:
    def test_single_real_pole_unchanged(self):
        spec = proper_sys(TransferSpec([], [complex(-TWO_PI * 1e3)], 1.0))
        assert spec.zeros == []
        assert spec.poles == [complex(-TWO_PI * 1e3)]
        assert spec.n_loops == 1

    def test_conjugate_closure(self):
        p = complex(-100.0, TWO_PI * 1e4)
        spec = proper_sys(TransferSpec([], [p], 1.0))
        assert spec.poles == [p, p.conjugate()]
        assert spec.n_loops == 1

    def test_existing_pair_not_duplicated(self):
        p = complex(-100.0, TWO_PI * 1e4)
        spec = proper_sys(TransferSpec([], [p, p.conjugate()], 1.0))
        assert len(spec.poles) == 2

    def test_excess_zeros_padded_with_fast_pole(self):
        wa, wb, wc = (-TWO_PI * 1e3, -TWO_PI * 2e3, -TWO_PI * 5e2)
        spec = proper_sys(TransferSpec([complex(wa), complex(wb)], [complex(wc)], 1.0))
        assert len(spec.poles) == 2
        assert len(spec.zeros) <= len(spec.poles)
        pad = spec.poles[1]
        assert pad.imag == 0.0
        # a decade above the effective Nyquist rate
        assert pad.real < -TWO_PI / (2 * spec.n_loops * TICK_SECONDS)

    def test_empty_poles_rejected(self):
        with pytest.raises(DesignError):
            proper_sys(TransferSpec([], [], 1.0))

    def test_n_loops_is_half_order_rounded_up(self):
        poles = [complex(-TWO_PI * (k + 1) * 1e3) for k in range(5)]
        spec = proper_sys(TransferSpec([], poles, 1.0))
        assert spec.n_loops == 3


class TestRescale:
    def test_single_pole_dc_normalization(self):
        spec = proper_sys(TransferSpec([], [complex(-TWO_PI * 1e3)], 1.0))
        spec, k = rescale(spec)
        # oracle: |H(0)| = k / |p| must equal 1
        assert k == pytest.approx(TWO_PI * 1e3, rel=1e-12)

    def test_zero_gain(self):
        spec = proper_sys(TransferSpec([], [complex(-1.0)], 0.0))
        _, k = rescale(spec)
        assert k == 0.0

    def test_pole_at_origin_rejected(self):
        spec = TransferSpec([], [complex(0.0)], 1.0, n_loops=1)
        with pytest.raises(DesignError):
            rescale(spec)

    def test_two_pole_dc_gain_through_full_pipeline(self):
        poles = [complex(-TWO_PI * 3e5), complex(-TWO_PI * 1.5e6)]
        spec, _ = rescale(proper_sys(TransferSpec([], poles, 10.0)))
        exact = to_biquads(residues(discretize(spec)))
        assert abs(eval_transfer(exact, [0.0])[0]) == pytest.approx(10.0, rel=1e-9)
        # after 3.29 coefficient rounding the DC gain only moves by the
        # quantization leakage through 1 + a1 + a2
        rounded, _, _ = design_filter([], poles, 10.0)
        assert abs(eval_transfer(rounded, [0.0])[0]) == pytest.approx(10.0, rel=1e-4)


class TestDiscretize:
    def test_pole_at_zero_maps_to_one(self):
        spec = TransferSpec([], [complex(0.0)], 0.0, n_loops=1)
        dr = discretize(spec)
        assert dr.poles[0] == pytest.approx(1.0)
        assert not dr.stable

    def test_exponential_mapping(self):
        t = TICK_SECONDS
        spec = TransferSpec([], [complex(-1.0 / t)], 0.0, n_loops=1)
        dr = discretize(spec)
        assert dr.poles[0].real == pytest.approx(math.exp(-1.0), rel=1e-12)

    def test_nyquist_pole_maps_to_minus_one(self):
        t = TICK_SECONDS
        spec = TransferSpec([], [complex(0.0, math.pi / t)], 0.0, n_loops=1)
        dr = discretize(spec)
        assert dr.poles[0].real == pytest.approx(-1.0, abs=1e-9)
        assert abs(dr.poles[0].imag) < 1e-6

    def test_stability_preserved(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            re = -10 ** rng.uniform(1, 6)
            im = 10 ** rng.uniform(1, 6)
            spec = proper_sys(TransferSpec([], [complex(re, im)], 1.0))
            dr = discretize(spec)
            assert all(abs(p) < 1.0 for p in dr.poles)
            assert dr.stable


class TestResidues:
    def test_two_real_poles_known_expansion(self):
        # H = 1/((1-0.5/z)(1-0.25/z)): cover-up by hand gives r=2 at p=0.5,
        # r=-1 at p=0.25, D=0
        dr = DiscreteRational([], [0.5 + 0j, 0.25 + 0j], 1.0, period=1.0)
        dr = residues(dr)
        assert dr.residues[0] == pytest.approx(2.0)
        assert dr.residues[1] == pytest.approx(-1.0)
        assert dr.feedthrough == 0.0
        # both forms must agree away from the poles
        for z in [2.0 + 0j, 1.3 + 0.7j, -3.0 + 0.2j]:
            assert expansion_value(dr, z) == pytest.approx(factored_value(dr, z))

    def test_single_pole_identity(self):
        dr = residues(DiscreteRational([], [0.5 + 0j], 3.0, period=1.0))
        assert dr.residues[0] == pytest.approx(3.0)
        assert dr.feedthrough == 0.0

    def test_equal_degree_feedthrough_polynomial_division(self):
        # H = (1 - 0.8/z)/(1 - 0.5/z).  In w = 1/z: (1-0.8w)/(1-0.5w)
        # = 1.6 + (-0.6)/(1-0.5w)  [long division oracle]
        dr = residues(DiscreteRational([0.8 + 0j], [0.5 + 0j], 1.0, period=1.0))
        assert dr.feedthrough == pytest.approx(1.6)
        assert dr.residues[0] == pytest.approx(-0.6)
        for z in [2.0 + 0j, 0.1 + 0.9j]:
            assert expansion_value(dr, z) == pytest.approx(factored_value(dr, z))

    def test_repeated_poles_rejected(self):
        dr = DiscreteRational([], [0.5 + 0j, 0.5 + 0j], 1.0, period=1.0)
        with pytest.raises(DesignError):
            residues(dr)

    def test_random_expansions_agree_with_factored_form(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            n = int(rng.integers(2, 8))
            rad = rng.uniform(0.3, 0.95, n)
            ang = rng.uniform(0.05, math.pi - 0.05, n)
            poles = []
            for rr, aa in zip(rad, ang):
                p = rr * cmath.exp(1j * aa)
                poles += [p, p.conjugate()]
            dr = residues(DiscreteRational([], poles, 1.0, period=1.0))
            for _ in range(10):
                z = 2.0 * cmath.exp(1j * rng.uniform(0, TWO_PI))
                hv = factored_value(dr, z)
                assert abs(expansion_value(dr, z) - hv) < 1e-9 * max(1.0, abs(hv))


class TestToBiquads:
    def test_real_pair_coefficients_by_formula(self):
        dr = DiscreteRational([], [0.5 + 0j, 0.25 + 0j], 1.0, period=1.0)
        dr = residues(dr)
        table = to_biquads(dr)
        assert len(table.sections) == 1
        s = table.sections[0]
        # plug (p, p', r, r') = (0.5, 0.25, 2, -1) into the four formulas
        assert s.b0 == pytest.approx(1.0)
        assert s.b1 == pytest.approx(0.0, abs=1e-15)
        assert s.a1 == pytest.approx(-0.75)
        assert s.a2 == pytest.approx(0.125)
        # independent check: evaluate the section at z=2 against the product
        z = 2.0
        sec = (s.b0 + s.b1 / z) / (1 + s.a1 / z + s.a2 / z**2)
        assert sec == pytest.approx(factored_value(dr, z))

    def test_conjugate_pair_gives_real_coefficients(self):
        p = 0.9 * cmath.exp(1j * 0.3)
        dr = residues(DiscreteRational([], [p, p.conjugate()], 1.0, period=1.0))
        table = to_biquads(dr)
        s = table.sections[0]
        for c in s.as_tuple():
            assert isinstance(c, float)
        assert s.a1 == pytest.approx(-2 * p.real)
        assert s.a2 == pytest.approx(abs(p) ** 2)

    def test_feedthrough_section(self):
        dr = DiscreteRational([0.8 + 0j], [0.5 + 0j], 1.0, period=1.0)
        dr = residues(dr)
        table = to_biquads(dr)
        d_sections = [s for s in table.sections if s.a1 == 0 and s.a2 == 0 and s.b1 == 0]
        assert any(s.b0 == pytest.approx(1.6) for s in d_sections)

    def test_sections_sorted_ascending_in_frequency(self):
        t = 80e-9
        freqs = [50e3, 5e3, 500e3]
        poles = []
        for f in freqs:
            p = cmath.exp(complex(-TWO_PI * f / 20, TWO_PI * f) * t)
            poles += [p, p.conjugate()]
        dr = residues(DiscreteRational([], poles, 1.0, period=t))
        table = to_biquads(dr)
        got = [s.char_freq_hz for s in table.sections]
        assert got == sorted(got)
        assert got == pytest.approx(sorted(freqs), rel=1e-9)


class TestRoundCoefficients:
    def test_exactly_representable(self):
        table = BiquadTable(
            [BiquadSection(1.0, 0.0, -0.75, 0.125)], n_loops=1, period=1.0
        )
        rounded, report = round_coefficients(table)
        assert rounded.sections[0].as_tuple() == (1.0, 0.0, -0.75, 0.125)
        assert report.max_error == 0.0
        assert not report.warning

    def test_third_quantization_error_bound(self):
        # 1/3 is not representable; error bounded by half an LSB of 2^-29
        table = BiquadTable(
            [BiquadSection(1 / 3, 0.0, 1 / 3, 0.0)], n_loops=1, period=1.0
        )
        _, report = round_coefficients(table)
        assert report.max_error <= (2.0**-30) / (1 / 3) + 1e-15
        assert report.max_error > 0.0

    def test_out_of_range_rejected(self):
        table = BiquadTable([BiquadSection(4.0, 0.0, 0.0, 0.0)], n_loops=1, period=1.0)
        with pytest.raises(ValueError):
            round_coefficients(table)


class TestEvalTransfer:
    def test_identity_table(self):
        table = BiquadTable([BiquadSection(1.0, 0.0, 0.0, 0.0)], n_loops=1, period=1e-7)
        h = eval_transfer(table, [0.0, 1e3, 1e6])
        assert np.allclose(h, 1.0 + 0j)

    def test_single_pole_dc_gain(self):
        p = math.exp(-TWO_PI * 1e3 * 1e-7)
        table = BiquadTable(
            [BiquadSection(0.5, 0.0, -p, 0.0)], n_loops=1, period=1e-7
        )
        h = eval_transfer(table, [0.0])
        assert h[0] == pytest.approx(0.5 / (1 - p))

    def test_conjugate_symmetry(self):
        table = BiquadTable(
            [BiquadSection(0.3, 0.1, -1.2, 0.5)], n_loops=1, period=1e-7
        )
        hp = eval_transfer(table, [12345.0])
        hm = eval_transfer(table, [-12345.0])
        assert hm[0] == pytest.approx(hp[0].conjugate())


def random_ladder_spec(rng):
    """Random interleaved pole/zero ladder, the resonance-compensation shape.

    Orders 2..28, distinct stable poles, M in {N, N-2}.  Characteristic
    frequencies sit between 2% and 30% of the effective sample rate so the
    partial-fraction arithmetic stays well conditioned in double precision.
    """
    n_pairs = int(rng.integers(1, 15))
    t_eff = n_pairs * TICK_SECONDS
    f_lo, f_hi = 0.02 / t_eff, 0.30 / t_eff
    edges = np.logspace(np.log10(f_lo), np.log10(f_hi), n_pairs + 1)
    zeros, poles = [], []
    drop = int(rng.integers(0, 2))
    for j in range(n_pairs):
        fp = edges[j] * (edges[j + 1] / edges[j]) ** rng.uniform(0.1, 0.45)
        qp = rng.uniform(2, 30)
        poles.append(complex(-TWO_PI * fp / (2 * qp), TWO_PI * fp))
        if j >= drop:
            fz = edges[j] * (edges[j + 1] / edges[j]) ** rng.uniform(0.55, 0.9)
            qz = rng.uniform(2, 10)
            zeros.append(complex(-TWO_PI * fz / (2 * qz), TWO_PI * fz))
    return zeros, poles, t_eff


class TestPipelineEquivalence:
    def test_assembled_equals_factored_for_random_specs(self):
        rng = np.random.default_rng(42)
        for _ in range(15):
            zeros, poles, t_eff = random_ladder_spec(rng)
            spec = proper_sys(TransferSpec(zeros, poles, 1.0))
            spec, _ = rescale(spec)
            dr = residues(discretize(spec))
            table = to_biquads(dr)
            freqs = np.logspace(np.log10(1e-4 / t_eff), np.log10(0.45 / t_eff), 200)
            ha = eval_transfer(table, freqs)
            hf = eval_transfer(dr, freqs)
            rel = np.abs(ha - hf) / np.maximum(np.abs(hf), 1e-30)
            assert rel.max() < 1e-9

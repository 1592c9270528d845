"""High-order IIR synthesis from continuous-time pole/zero specifications.

The designer turns a list of Laplace-domain zeros and poles (s = gamma + i*omega,
rad/s, stable entries have Re < 0) plus a DC gain into an ordered table of
second-order sections that the sequential-biquad runtime executes, one
section per clock tick, at an effective sample period of n_loops ticks.

Pipeline: proper_sys -> rescale -> discretize -> residues -> to_biquads ->
round_coefficients.  The partial-fraction expansion is done in the z domain
after the exponential (matched-Z) mapping, so the assembled section sum is
algebraically identical to the factored discrete-time transfer function.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace

import numpy as np

from lockboxsim.core.fixedpoint import (
    TICK_SECONDS,
    coeff_to_float,
    quantize_coeff,
)

MAX_SECTIONS = 14          # order <= 28
CONJUGATE_TOL = 1e-6       # relative tolerance when matching conjugate partners
ROUNDING_WARN_THRESHOLD = 1e-3


class DesignError(ValueError):
    pass


@dataclass
class TransferSpec:
    """Continuous-time filter description: zeros/poles in rad/s plus DC gain."""

    zeros: list[complex]
    poles: list[complex]
    dc_gain: float
    n_loops: int | None = None      # set by proper_sys
    gain: float | None = None       # continuous-time prefactor, set by rescale

    @property
    def effective_period(self) -> float:
        if self.n_loops is None:
            raise DesignError("n_loops not determined yet; run proper_sys first")
        return self.n_loops * TICK_SECONDS


@dataclass
class DiscreteRational:
    """z-domain rational function in factored and expanded form.

    H(z) = gain * prod(1 - z_i/z) / prod(1 - p_j/z)
         = feedthrough + sum(residues_j / (1 - p_j/z))
    """

    zeros: list[complex]
    poles: list[complex]
    gain: float
    period: float
    residues: list[complex] = field(default_factory=list)
    feedthrough: float = 0.0
    stable: bool = True


@dataclass(frozen=True)
class BiquadSection:
    """One second-order section: (b0 + b1/z) / (1 + a1/z + a2/z^2)."""

    b0: float
    b1: float
    a1: float
    a2: float
    char_freq_hz: float = 0.0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.b0, self.b1, self.a1, self.a2)


@dataclass
class BiquadTable:
    """Ordered second-order sections plus the runtime scheduling parameters."""

    sections: list[BiquadSection]
    n_loops: int
    period: float
    prefilter_hz: float = 0.0       # anti-alias first-order low-pass, 0 = off

    def __post_init__(self) -> None:
        if len(self.sections) > MAX_SECTIONS + 1:
            raise DesignError(
                f"{len(self.sections)} sections exceed the {MAX_SECTIONS}-section budget"
            )


@dataclass
class RoundingReport:
    """Per-coefficient relative quantization error of a rounded table."""

    errors: list[tuple[float, float, float, float]]
    max_error: float
    warning: bool


def proper_sys(spec: TransferSpec) -> TransferSpec:
    """Close conjugate pairs, enforce M <= N, and fix the loop count.

    Non-real zeros/poles missing a conjugate partner get one appended.  If
    zeros then still outnumber poles, fast real poles far beyond the
    effective Nyquist frequency are appended until M <= N.  n_loops is
    ceil(N/2): one FPGA cycle per second-order section.
    """
    if not spec.poles:
        raise DesignError("at least one pole is required")
    zeros = _close_conjugates(spec.zeros)
    poles = _close_conjugates(spec.poles)

    n_extra = max(0, len(zeros) - len(poles))
    n_total = len(poles) + n_extra
    n_loops = max(1, math.ceil(n_total / 2))
    if n_total > 2 * MAX_SECTIONS:
        raise DesignError(
            f"filter order {n_total} exceeds maximum {2 * MAX_SECTIONS}"
        )
    # padding poles: a decade above the effective Nyquist rate, staggered to
    # keep them distinct
    nyquist_eff = 1.0 / (2.0 * n_loops * TICK_SECONDS)
    for k in range(n_extra):
        poles.append(complex(-10.0 * 2.0 * math.pi * nyquist_eff * (1.0 + 0.25 * k), 0.0))
    return replace(spec, zeros=zeros, poles=poles, n_loops=n_loops)


def rescale(spec: TransferSpec) -> tuple[TransferSpec, float]:
    """Choose the factored-form prefactor k so the DC gain equals dc_gain.

    H(s) = k * prod(s - z_i) / prod(s - p_j); at s = 0 the products reduce
    to prod(-z_i)/prod(-p_j).  Zeros at exactly s = 0 force a DC null and
    are excluded from the normalization (the gain then applies to the
    remaining factors); a pole at s = 0 with a nonzero requested DC gain is
    rejected since no finite k can realize it.
    """
    if spec.dc_gain == 0.0:
        return replace(spec, gain=0.0), 0.0
    num = 1.0 + 0.0j
    den = 1.0 + 0.0j
    for p in spec.poles:
        if p == 0:
            raise DesignError("pole at s = 0 with finite requested DC gain")
        num *= -p
    for z in spec.zeros:
        if z == 0:
            continue
        den *= -z
    k = spec.dc_gain * num / den
    if abs(k.imag) > 1e-9 * max(abs(k.real), 1e-300):
        raise DesignError("prefactor came out complex; conjugate closure missing?")
    return replace(spec, gain=k.real), k.real


def discretize(spec: TransferSpec, period: float | None = None) -> DiscreteRational:
    """Map zeros and poles through z = exp(s * T_IIR).

    The discrete gain is renormalized so that H(z=1) equals the requested
    DC gain exactly (the exponential map alone would only approximate it).
    Poles on or outside the unit circle mark the result unstable.
    """
    t = spec.effective_period if period is None else period
    zd = [cmath.exp(z * t) for z in spec.zeros]
    pd = [cmath.exp(p * t) for p in spec.poles]
    stable = all(abs(p) < 1.0 for p in pd)

    if spec.dc_gain == 0.0:
        gain = 0.0
    else:
        num = 1.0 + 0.0j
        den = 1.0 + 0.0j
        for p in pd:
            num *= 1.0 - p
        for z in zd:
            f = 1.0 - z
            if abs(f) < 1e-14:
                continue          # differentiator factor, excluded like rescale
            den *= f
        g = spec.dc_gain * num / den
        gain = g.real
    return DiscreteRational(zeros=zd, poles=pd, gain=gain, period=t, stable=stable)


def residues(dr: DiscreteRational) -> DiscreteRational:
    """Partial-fraction expansion of the factored z-domain form.

    Heaviside cover-up at each pole:
        r_j = gain * prod_i(1 - z_i/p_j) / prod_{l != j}(1 - p_l/p_j)
    and for M = N a constant feedthrough D = gain * prod(z_i) / prod(p_j)
    (the value of H as 1/z -> infinity).  Multiplications and divisions are
    interleaved so widely spread pole magnitudes cannot overflow doubles.
    Repeated poles are rejected; perturb them upstream instead.
    """
    zeros, poles = dr.zeros, dr.poles
    if len(zeros) > len(poles):
        raise DesignError("improper function: run proper_sys first")
    n = len(poles)
    for i in range(n):
        for j in range(i + 1, n):
            scale = max(abs(poles[i]), abs(poles[j]), 1e-300)
            if abs(poles[i] - poles[j]) <= 1e-12 * scale:
                raise DesignError(
                    f"repeated pole {poles[i]!r}; cover-up expansion undefined"
                )
    res: list[complex] = []
    for j, pj in enumerate(poles):
        r = complex(dr.gain)
        others = [pl for l, pl in enumerate(poles) if l != j]
        for idx in range(max(len(zeros), len(others))):
            if idx < len(zeros):
                r *= 1.0 - zeros[idx] / pj
            if idx < len(others):
                r /= 1.0 - others[idx] / pj
        res.append(r)

    d = 0.0
    if len(zeros) == n and n > 0:
        dc = complex(dr.gain)
        for idx in range(n):
            dc *= zeros[idx]
            dc /= poles[idx]
        if abs(dc.imag) > 1e-9 * max(abs(dc.real), 1e-300):
            raise DesignError("feedthrough came out complex")
        d = dc.real
    dr.residues = res
    dr.feedthrough = d
    return dr


def to_biquads(dr: DiscreteRational) -> BiquadTable:
    """Pair pole/residue terms into real second-order sections.

    Complex poles pair with their conjugates (b0 = r + r', b1 = -p*r' - p'*r,
    a1 = -(p + p'), a2 = p*p'), leftover real poles pair among themselves,
    an odd real pole forms a degenerate section with a2 = 0, and a nonzero
    feedthrough becomes the extra section {D, 0, 0, 0}.  Sections are
    ordered by ascending characteristic frequency so the fastest section is
    evaluated last, right before the output sample is emitted.
    """
    if not dr.residues and dr.poles:
        raise DesignError("residues missing; run residues() first")
    t = dr.period
    complex_pairs: list[tuple[complex, complex]] = []
    real_terms: list[tuple[float, float]] = []

    pool = list(zip(dr.poles, dr.residues))
    while pool:
        p, r = pool.pop(0)
        if p.imag == 0.0:
            real_terms.append((p.real, r.real))
            continue
        best = None
        best_d = math.inf
        for idx, (pc, _) in enumerate(pool):
            d = abs(pc - p.conjugate())
            if d < best_d:
                best_d = d
                best = idx
        scale = max(abs(p), 1e-300)
        if best is None or best_d > CONJUGATE_TOL * scale:
            raise DesignError(f"complex pole {p!r} has no conjugate partner")
        pool.pop(best)
        complex_pairs.append((p, r))

    sections: list[BiquadSection] = []
    for p, r in complex_pairs:
        # exact symmetry: the partner is p.conjugate() / r.conjugate()
        b0 = 2.0 * r.real
        b1 = -2.0 * (p * r.conjugate()).real
        a1 = -2.0 * p.real
        a2 = abs(p) ** 2
        sections.append(BiquadSection(b0, b1, a1, a2, _pair_freq(p, t)))

    real_terms.sort(key=lambda pr: pr[0])
    while len(real_terms) >= 2:
        (p1, r1), (p2, r2) = real_terms.pop(0), real_terms.pop(0)
        sections.append(
            BiquadSection(
                b0=r1 + r2,
                b1=-(p1 * r2 + p2 * r1),
                a1=-(p1 + p2),
                a2=p1 * p2,
                char_freq_hz=max(_real_freq(p1, t), _real_freq(p2, t)),
            )
        )
    if real_terms:
        p1, r1 = real_terms.pop()
        sections.append(BiquadSection(r1, 0.0, -p1, 0.0, _real_freq(p1, t)))

    sections.sort(key=lambda s: s.char_freq_hz)
    if dr.feedthrough != 0.0:
        sections.insert(0, BiquadSection(dr.feedthrough, 0.0, 0.0, 0.0, 0.0))

    n_loops = max(1, math.ceil(len(dr.poles) / 2))
    return BiquadTable(sections=sections, n_loops=n_loops, period=t)


def round_coefficients(table: BiquadTable) -> tuple[BiquadTable, RoundingReport]:
    """Quantize every coefficient to 3.29 fixed point and report the damage.

    The report lists |quantized - exact| / max(|exact|, eps) per coefficient;
    any entry above 1e-3 sets the warning flag.  Magnitudes >= 4 are
    unrepresentable and raise.
    """
    eps = 1e-12
    rounded: list[BiquadSection] = []
    errors: list[tuple[float, float, float, float]] = []
    max_err = 0.0
    for s in table.sections:
        quantized = []
        errs = []
        for c in s.as_tuple():
            code = quantize_coeff(c)
            cq = coeff_to_float(code)
            quantized.append(cq)
            e = abs(cq - c) / max(abs(c), eps)
            errs.append(e)
            max_err = max(max_err, e)
        rounded.append(
            BiquadSection(*quantized, char_freq_hz=s.char_freq_hz)
        )
        errors.append(tuple(errs))
    report = RoundingReport(
        errors=errors, max_error=max_err, warning=max_err > ROUNDING_WARN_THRESHOLD
    )
    out = BiquadTable(
        sections=rounded,
        n_loops=table.n_loops,
        period=table.period,
        prefilter_hz=table.prefilter_hz,
    )
    return out, report


def design_filter(
    zeros: list[complex],
    poles: list[complex],
    dc_gain: float,
    prefilter_hz: float = 0.0,
) -> tuple[BiquadTable, RoundingReport, DiscreteRational]:
    """Full pipeline from a continuous-time spec to a rounded section table."""
    spec = proper_sys(TransferSpec(list(zeros), list(poles), dc_gain))
    spec, _ = rescale(spec)
    dr = residues(discretize(spec))
    if not dr.stable:
        raise DesignError("unstable design: a pole maps on or outside the unit circle")
    table = to_biquads(dr)
    table.prefilter_hz = prefilter_hz
    rounded, report = round_coefficients(table)
    rounded.prefilter_hz = prefilter_hz
    return rounded, report, dr


def eval_transfer(obj, frequencies, period: float | None = None) -> np.ndarray:
    """Exact rational response at z = exp(i 2 pi f T) for any pipeline stage.

    Accepts a BiquadTable (section sum), a DiscreteRational (factored form),
    or a rescaled TransferSpec (continuous-time factored form at s = i w).
    """
    f = np.asarray(frequencies, dtype=np.float64)
    if isinstance(obj, BiquadTable):
        z1 = np.exp(-2j * np.pi * f * obj.period)        # z^-1
        h = np.zeros(len(f), dtype=np.complex128)
        for s in obj.sections:
            h += (s.b0 + s.b1 * z1) / (1.0 + s.a1 * z1 + s.a2 * z1 * z1)
        return h
    if isinstance(obj, DiscreteRational):
        z1 = np.exp(-2j * np.pi * f * obj.period)
        h = np.full(len(f), obj.gain, dtype=np.complex128)
        for i in range(max(len(obj.zeros), len(obj.poles))):
            if i < len(obj.zeros):
                h *= 1.0 - obj.zeros[i] * z1
            if i < len(obj.poles):
                h /= 1.0 - obj.poles[i] * z1
        return h
    if isinstance(obj, TransferSpec):
        if obj.gain is None:
            raise DesignError("TransferSpec has no gain; run rescale first")
        s = 2j * np.pi * f
        h = np.full(len(f), obj.gain, dtype=np.complex128)
        for i in range(max(len(obj.zeros), len(obj.poles))):
            if i < len(obj.zeros):
                h *= s - obj.zeros[i]
            if i < len(obj.poles):
                h /= s - obj.poles[i]
        return h
    raise TypeError(f"cannot evaluate transfer of {type(obj)!r}")


def expansion_value(dr: DiscreteRational, z: complex) -> complex:
    """Evaluate the expanded form D + sum r_j/(1 - p_j/z) at one point."""
    h = complex(dr.feedthrough)
    for r, p in zip(dr.residues, dr.poles):
        h += r / (1.0 - p / z)
    return h


def factored_value(dr: DiscreteRational, z: complex) -> complex:
    h = complex(dr.gain)
    for i in range(max(len(dr.zeros), len(dr.poles))):
        if i < len(dr.zeros):
            h *= 1.0 - dr.zeros[i] / z
        if i < len(dr.poles):
            h /= 1.0 - dr.poles[i] / z
    return h


def _close_conjugates(values: list[complex]) -> list[complex]:
    out: list[complex] = []
    pending = [complex(v) for v in values]
    while pending:
        v = pending.pop(0)
        out.append(v)
        if v.imag == 0.0:
            continue
        found = None
        for idx, c in enumerate(pending):
            scale = max(abs(v), 1e-300)
            if abs(v.conjugate() - c) <= CONJUGATE_TOL * scale:
                found = idx
                break
        if found is not None:
            pending.pop(found)
            out.append(v.conjugate())   # snap to the exact conjugate
        else:
            out.append(v.conjugate())
    return out


def _pair_freq(p: complex, t: float) -> float:
    return abs(cmath.log(p).imag) / (2.0 * math.pi * t)


def _real_freq(p: float, t: float) -> float:
    # a real section has no oscillation frequency; rank it by its decay rate
    if p == 0.0:
        return 0.0
    if p < 0.0:
        return 0.5 / t      # alternating-sign pole sits at the Nyquist rate
    return abs(math.log(p)) / (2.0 * math.pi * t)

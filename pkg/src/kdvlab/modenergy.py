"""Modified Sobolev energies with exact cancellation of resonant terms.

For the flow u_t + d_x^{2l+1} u = u d_x^{2l-1} u on the torus, the growth of
the H^s norm is driven by a finite list of cubic "resonant" integrals

    B_m = int d_x^{2(l-m)-1} u (D^s d_x^m u)^2 ,   m = 1 .. l-1.

This module constructs an energy E^s(u) = 1/2 |u|_{H^s}^2 + sum gamma_T T(u)
whose time derivative contains no resonant term at any polynomial order: each
correction T is chosen so that the linear part of dT/dt cancels one resonant
bucket exactly, the cascade is repeated through the (l+1)-linear stage, and
everything left over is either manifestly bounded (strictly negative net
D-order, or no derivative transfer at all) or carried as an exactly evaluable
remainder functional.  All coefficients are exact polynomials in the symbolic
Sobolev index s.

The working basis for energy terms is the bundled form

    coeff(s) * int d_x^A( prod_i d_x^{q_i} u ) . D^{s+off} d_x^b u . D^{s+off} d_x^c u

with b <= c and off even; squares (b == c) are normalized through the parity
rewrite d_x^2 = -D^2, which is sign-free inside a square.  The reduction of a
non-square pair runs on the gap c - b: even gaps integrate by parts once, odd
gaps apply the exact trilinear identity whose alpha coefficients come from
ibpcalc, so every rewrite in the pipeline is an identity rather than an
estimate.  Two remainder species are not polynomial integrals of derivatives
and are kept as marker objects with exact numeric evaluation: the J^{2s}-D^{2s}
norm-gap term and the tails of the para-Leibniz expansion

    D^sigma(fg) = sum_i C(sigma, i) d_x^i f D^sigma d_x^{-i} g + tail.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from math import comb

import numpy as np

from .diffpoly import DiffMonomial, DiffPoly, split_exact
from .ibpcalc import alpha_coeffs
from .spectral import TAU, SpectralField, sobolev_norm
from .spoly import SPoly, binom_s

__all__ = [
    "OddOffset",
    "SingularSystem",
    "ThresholdViolation",
    "SobTerm",
    "SobTriple",
    "PTerm",
    "pterm",
    "NormGapTerm",
    "CommutatorTail",
    "Correction",
    "StageReport",
    "CorrectionDerivative",
    "EnergyBlueprint",
    "reduce_triple",
    "quadratic_derivative",
    "correction_derivative",
    "solve_gammas",
    "higher_corrections",
    "build_energy",
    "regularity_threshold",
    "evaluate_energy",
    "energy_time_derivative",
]

_ZERO = SPoly()
_ONE = SPoly.const(1)


class OddOffset(ValueError):
    """A rewrite would require an odd power of D relative to D^s."""


class SingularSystem(RuntimeError):
    """A cancellation stage failed to eliminate a resonant bucket."""


class ThresholdViolation(ValueError):
    """Requested Sobolev index at or below the construction's threshold."""


def regularity_threshold(l: int) -> Fraction:
    """Smallest s excluded by the construction: evaluation needs s > 4l - 9/2."""
    return Fraction(8 * l - 9, 2)


def _spoly(c) -> SPoly:
    return c if isinstance(c, SPoly) else SPoly.const(c)


# ---------------------------------------------------------------------------
# term types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PTerm:
    """coeff(s) * int d^a_out(prod_i d^{q_i}u) . D^{s+off}d^b u . D^{s+off}d^c u.

    inner lists the plain derivative orders q_i inside the bundle, sorted
    ascending; a single plain factor is always folded into a_out so that
    inner == (0,).  b <= c.  Squares have b == c.
    """

    coeff: SPoly
    a_out: int
    inner: tuple[int, ...]
    off: int
    b: int
    c: int

    @property
    def degree(self) -> int:
        return len(self.inner) + 2

    @property
    def is_square(self) -> bool:
        return self.b == self.c

    @property
    def is_resonant(self) -> bool:
        return self.is_square and self.off == 0 and self.b >= 1

    @property
    def is_bounded(self) -> bool:
        return self.is_square and (self.off < 0 or (self.off == 0 and self.b == 0))

    def bucket(self) -> tuple[int, tuple[int, ...], int]:
        return (self.a_out, self.inner, self.b)

    def evaluate(self, fieldval: SpectralField, s: float) -> float:
        return _pterm_value(self, s, fieldval)

    def to_obj(self) -> dict:
        return {
            "coeff": self.coeff.to_obj(),
            "a_out": self.a_out,
            "inner": list(self.inner),
            "off": self.off,
            "b": self.b,
            "c": self.c,
        }


def pterm(coeff, a_out: int, inner, off: int, b: int, c: int) -> PTerm:
    """Canonicalizing constructor: sorts inner, folds single factors, b <= c."""
    cp = _spoly(coeff)
    inn = tuple(sorted(inner))
    if len(inn) == 1:
        a_out += inn[0]
        inn = (0,)
    if b > c:
        b, c = c, b
    if a_out < 0 or b < 0 or any(q < 0 for q in inn):
        raise ValueError("negative derivative order in term")
    return PTerm(cp, a_out, inn, off, b, c)


@dataclass(frozen=True)
class SobTerm:
    """coeff(s) * int d^a u (D^{s+off} d^j u)^2, the single-factor square."""

    coeff: SPoly
    a: int
    off: int
    j: int

    @property
    def is_resonant(self) -> bool:
        return self.off == 0 and self.j >= 1

    @property
    def is_bounded(self) -> bool:
        return self.off < 0 or (self.off == 0 and self.j == 0)

    def as_pterm(self) -> PTerm:
        return pterm(self.coeff, self.a, (0,), self.off, self.j, self.j)

    def evaluate(self, fieldval: SpectralField, s: float) -> float:
        return _pterm_value(self.as_pterm(), s, fieldval)

    def to_obj(self) -> dict:
        return {"coeff": self.coeff.to_obj(), "a": self.a, "off": self.off, "j": self.j}


@dataclass(frozen=True)
class SobTriple:
    """coeff(s) * int d^a u . D^{s+off} d^b u . D^{s+off} d^c u with b <= c."""

    coeff: SPoly
    a: int
    off: int
    b: int
    c: int

    def __post_init__(self):
        object.__setattr__(self, "coeff", _spoly(self.coeff))
        if self.b > self.c:
            b, c = self.c, self.b
            object.__setattr__(self, "b", b)
            object.__setattr__(self, "c", c)
        if self.a < 0 or self.b < 0:
            raise ValueError("negative derivative order in triple")


# ---------------------------------------------------------------------------
# marker functionals (exact remainders that are not derivative polynomials)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormGapTerm:
    """coeff(s) * int u d^{2l-1}u ((J^{2s} - D^{2s})u): the J-vs-D norm gap."""

    coeff: SPoly
    l: int

    def evaluate(self, fieldval: SpectralField, s: float) -> float:
        k = np.arange(fieldval.modes.size, dtype=float)
        gap = (1.0 + k * k) ** s - k ** (2.0 * s)
        m = _quad_grid(3, fieldval.band_limit())
        vals = _mult_values(fieldval, np.ones_like(k), 0, m)
        vals = vals * _mult_values(fieldval, np.ones_like(k), 2 * self.l - 1, m)
        vals = vals * _mult_values(fieldval, gap, 0, m)
        return float(self.coeff(float(s))) * TAU * float(vals.mean())

    def to_obj(self) -> dict:
        return {"kind": "norm_gap", "coeff": self.coeff.to_obj(), "l": self.l}


@dataclass(frozen=True)
class CommutatorTail:
    """Tail of the para-Leibniz expansion, paired with its bundle context.

    Represents coeff(s) * int d^{a_out}(prod(inner)) . tail . D^{s+off}d^{other_b}u
    where tail = D^{s+off}(d^rho u . d^{m_high} u)
                 - sum_{i=0}^{i_max} C(s+off, i) d^{rho+i}u . D^{s+off}d^{m_high-i}u.
    """

    coeff: SPoly
    a_out: int
    inner: tuple[int, ...]
    off: int
    rho: int
    m_high: int
    i_max: int
    other_b: int

    def evaluate(self, fieldval: SpectralField, s: float) -> float:
        sigma = float(s) + self.off
        band = fieldval.band_limit()
        m = _quad_grid(len(self.inner) + 4, band)
        half = m // 2 + 1
        k = np.arange(half, dtype=float)
        dsig = _d_weights(k, sigma)

        f = _deriv_values(fieldval, self.rho, m)
        g = _deriv_values(fieldval, self.m_high, m)
        prod_modes = np.fft.rfft(f * g) / m
        tail = np.fft.irfft(dsig * prod_modes * m, n=m)
        for i in range(self.i_max + 1):
            w = float(binom_s(self.off, i)(float(s)))
            tail = tail - w * _deriv_values(fieldval, self.rho + i, m) * _mult_values(
                fieldval, _d_weights(_field_k(fieldval), sigma), self.m_high - i, m
            )

        vals = _bundle_values(fieldval, self.a_out, self.inner, m)
        vals = vals * tail
        vals = vals * _mult_values(fieldval, _d_weights(_field_k(fieldval), sigma), self.other_b, m)
        return float(self.coeff(float(s))) * TAU * float(vals.mean())

    def to_obj(self) -> dict:
        return {
            "kind": "commutator_tail",
            "coeff": self.coeff.to_obj(),
            "a_out": self.a_out,
            "inner": list(self.inner),
            "off": self.off,
            "rho": self.rho,
            "m_high": self.m_high,
            "i_max": self.i_max,
            "other_b": self.other_b,
        }


# ---------------------------------------------------------------------------
# numeric evaluation helpers (exact quadrature on padded grids)
# ---------------------------------------------------------------------------


def _quad_grid(n_factors: int, band: int) -> int:
    m = n_factors * max(band, 1) + 2
    return m + (m % 2)


def _field_k(fieldval: SpectralField) -> np.ndarray:
    return np.arange(fieldval.modes.size, dtype=float)


def _d_weights(k: np.ndarray, sigma: float) -> np.ndarray:
    """|k|^sigma with the k=0 value 0 for sigma != 0 (projection convention)."""
    w = np.zeros_like(k)
    if sigma == 0.0:
        return np.ones_like(k)
    np.power(k, sigma, out=w, where=k > 0)
    return w


def _pad_modes(modes: np.ndarray, m: int) -> np.ndarray:
    half = np.zeros(m // 2 + 1, dtype=complex)
    take = min(modes.size, half.size)
    half[:take] = modes[:take]
    return half


def _mult_values(fieldval: SpectralField, weights: np.ndarray, order: int, m: int) -> np.ndarray:
    """Values of (weights(k) * (ik)^order) applied to the field, on an m-grid."""
    k = _field_k(fieldval)
    modes = fieldval.modes * weights * (1j * k) ** order
    return np.fft.irfft(_pad_modes(modes, m) * m, n=m)


def _deriv_values(fieldval: SpectralField, order: int, m: int) -> np.ndarray:
    return _mult_values(fieldval, np.ones(fieldval.modes.size), order, m)


def _bundle_values(fieldval: SpectralField, a_out: int, inner: tuple[int, ...], m: int) -> np.ndarray:
    """Values of d^{a_out}(prod_q d^q u) on an m-grid (1 for an empty bundle)."""
    if not inner:
        if a_out:
            return np.zeros(m)
        return np.ones(m)
    vals = np.ones(m)
    for q in inner:
        vals = vals * _deriv_values(fieldval, q, m)
    if a_out:
        km = np.arange(m // 2 + 1, dtype=float)
        vals = np.fft.irfft((1j * km) ** a_out * (np.fft.rfft(vals) / m) * m, n=m)
    return vals


def _pterm_value(pt: PTerm, s: float, fieldval: SpectralField) -> float:
    band = fieldval.band_limit()
    m = _quad_grid(len(pt.inner) + 2, band)
    k = _field_k(fieldval)
    w = _d_weights(k, float(s) + pt.off)
    vals = _bundle_values(fieldval, pt.a_out, pt.inner, m)
    vals = vals * _mult_values(fieldval, w, pt.b, m)
    vals = vals * _mult_values(fieldval, w, pt.c, m)
    return float(pt.coeff(float(s))) * TAU * float(vals.mean())


# ---------------------------------------------------------------------------
# exact reduction to normalized squares
# ---------------------------------------------------------------------------


def _normalize_square(pt: PTerm) -> PTerm:
    """Canonical (off, j) for a square via d^2 = -D^2; sign-free inside squares."""
    if pt.b != pt.c:
        raise ValueError("normalize_square requires b == c")
    if pt.off % 2:
        raise OddOffset(f"odd D-offset {pt.off} in square term")
    net = pt.off + pt.b
    if net >= 1:
        off2, j2 = 0, net
    else:
        j2 = net % 2
        off2 = net - j2
    return pterm(pt.coeff, pt.a_out, pt.inner, off2, j2, j2)


def _merge(terms) -> list[PTerm]:
    acc: dict[tuple, SPoly] = {}
    for t in terms:
        key = (t.a_out, t.inner, t.off, t.b, t.c)
        acc[key] = acc.get(key, _ZERO) + t.coeff
    out = []
    for key in sorted(acc):
        if not acc[key].is_zero():
            a_out, inner, off, b, c = key
            out.append(PTerm(acc[key], a_out, inner, off, b, c))
    return out


def _reduce_pair(pt: PTerm) -> list[PTerm]:
    """Rewrite a D-pair term as normalized squares, exactly.

    Even gaps integrate by parts once; odd gaps 2m+1 apply the trilinear
    identity I_{2m+1}(W, phi, phi) with W the whole bundle.
    """
    if pt.coeff.is_zero():
        return []
    gap = pt.c - pt.b
    if gap == 0:
        return [_normalize_square(pt)]
    if gap % 2 == 0:
        left = pterm(-pt.coeff, pt.a_out + 1, pt.inner, pt.off, pt.b, pt.c - 1)
        right = pterm(-pt.coeff, pt.a_out, pt.inner, pt.off, pt.b + 1, pt.c - 1)
        return _reduce_pair(left) + _reduce_pair(right)
    m = (gap - 1) // 2
    out = []
    if m >= 1:
        table = alpha_coeffs(m)
        for i in range(1, m + 1):
            out.append(
                _normalize_square(
                    pterm(
                        pt.coeff * (table[i] / 2),
                        pt.a_out + 2 * (m - i) + 1,
                        pt.inner,
                        pt.off,
                        pt.b + i,
                        pt.b + i,
                    )
                )
            )
    out.append(
        _normalize_square(pterm(pt.coeff * Fraction(-1, 2), pt.a_out + gap, pt.inner, pt.off, pt.b, pt.b))
    )
    return out


def reduce_triple(t: SobTriple, l: int) -> list[SobTerm]:
    """Exact rewrite of int d^a u D^{s+off}d^b u D^{s+off}d^c u as squares.

    Returns normalized single-factor squares sorted deterministically; the
    resonant/bounded split is read off each term's flags.  l fixes the ambient
    flow for context only; the rewrite itself is driven by the gap c - b.
    """
    if l < 1:
        raise ValueError("l must be >= 1")
    if t.off % 2:
        raise OddOffset(f"odd D-offset {t.off}")
    if t.coeff.is_zero():
        return []
    squares = _merge(_reduce_pair(pterm(t.coeff, t.a, (0,), t.off, t.b, t.c)))
    out = [SobTerm(q.coeff, q.a_out, q.off, q.b) for q in squares]
    return sorted(out, key=lambda x: (x.a, x.off, x.j))


# ---------------------------------------------------------------------------
# quadratic stage: d/dt of 1/2 |u|_{H^s}^2 along u_t = -d^{2l+1}u + u d^{2l-1}u
# ---------------------------------------------------------------------------


def quadratic_derivative(l: int) -> tuple[list, list[SobTerm]]:
    """Main terms of d/dt (1/2 |u|_{H^s}^2): (bounded-with-markers, resonant).

    The linear flow contributes nothing (odd operator).  The nonlinear part
    splits into the J/D norm-gap marker, the para-Leibniz main terms with
    weights C(s, j), and the commutator tail marker; the main-term triples are
    reduced to squares and classified.  Resonant output carries the beta
    weights as polynomials in s.
    """
    if l < 2:
        raise ValueError("model flow requires l >= 2")
    bounded: list = [
        NormGapTerm(_ONE, l),
        CommutatorTail(_ONE, 0, (), 0, 0, 2 * l - 1, 2 * l - 2, 0),
    ]
    squares: list[SobTerm] = []
    for j in range(0, 2 * l - 1):
        squares.extend(reduce_triple(SobTriple(binom_s(0, j), j, 0, 0, 2 * l - 1 - j), l))
    acc: dict[tuple[int, int, int], SPoly] = {}
    for q in squares:
        key = (q.a, q.off, q.j)
        acc[key] = acc.get(key, _ZERO) + q.coeff
    resonant: list[SobTerm] = []
    for key in sorted(acc):
        if acc[key].is_zero():
            continue
        term = SobTerm(acc[key], *key)
        (resonant if term.is_resonant else bounded).append(term)
    return bounded, resonant


# ---------------------------------------------------------------------------
# correction terms and their time derivatives
# ---------------------------------------------------------------------------


def _correction_shape(bucket: tuple[int, tuple[int, ...], int], l: int) -> PTerm:
    """The unit-coefficient correction whose linear d/dt hits bucket exactly."""
    a_out, inner, m = bucket
    if a_out < 1:
        raise ValueError("correction requires an outer derivative to remove")
    t = m - l
    jj = t % 2
    offp = t - jj
    return pterm(_ONE, a_out - 1, inner, offp, jj, jj)


def _expand_linear(corr: PTerm, l: int) -> list[PTerm]:
    """Normalized squares of d/dt corr along u_t = -d^{2l+1}u (exact)."""
    table = alpha_coeffs(l)
    out = []
    for i in range(1, l + 1):
        out.append(
            _normalize_square(
                pterm(-table[i] * corr.coeff, corr.a_out + 2 * (l - i) + 1, corr.inner, corr.off, corr.b + i, corr.b + i)
            )
        )
    out.append(_normalize_square(pterm(corr.coeff, corr.a_out + 2 * l + 1, corr.inner, corr.off, corr.b, corr.b)))
    for idx, q in enumerate(corr.inner):
        raised = corr.inner[:idx] + (q + 2 * l + 1,) + corr.inner[idx + 1 :]
        out.append(_normalize_square(pterm(-corr.coeff, corr.a_out, raised, corr.off, corr.b, corr.b)))
    return _merge(out)


def _expand_nonlinear(corr: PTerm, l: int) -> tuple[list[PTerm], list[PTerm], list[CommutatorTail]]:
    """d/dt corr along u_t = u d^{2l-1}u: (pair terms, bounded squares, tails).

    Plain-factor hits stay inside the bundle (Leibniz, exact) and keep the
    strictly negative net D-order, hence bounded.  D-factor hits para-expand;
    the loose low-frequency factor is folded back into the bundle through
    d^n(P).G = sum_w (-1)^w C(n, w) d^{n-w}(P . d^w G).
    """
    pairs: list[PTerm] = []
    squares: list[PTerm] = []
    tails: list[CommutatorTail] = []
    jj = corr.b

    for idx, q in enumerate(corr.inner):
        base = corr.inner[:idx] + corr.inner[idx + 1 :]
        for r in range(q + 1):
            new_inner = base + (r, 2 * l - 1 + q - r)
            squares.append(
                _normalize_square(pterm(corr.coeff * comb(q, r), corr.a_out, new_inner, corr.off, jj, jj))
            )

    for r in range(jj + 1):
        m_high = 2 * l - 1 + jj - r
        i_max = corr.off + m_high - 1
        lead = corr.coeff * (2 * comb(jj, r))
        for i in range(max(i_max + 1, 0)):
            cpoly = lead * binom_s(corr.off, i)
            loose = r + i
            for w in range(corr.a_out + 1):
                cw = cpoly * (Fraction(-1) ** w * comb(corr.a_out, w))
                pairs.append(
                    pterm(cw, corr.a_out - w, corr.inner + (loose + w,), corr.off, jj, m_high - i)
                )
        tails.append(
            CommutatorTail(lead, corr.a_out, corr.inner, corr.off, r, m_high, i_max, jj)
        )
    return _merge(pairs), _merge(squares), tails


@dataclass(frozen=True)
class CorrectionDerivative:
    """Exact d/dt of one unit-coefficient cubic correction term."""

    resonant: tuple[SobTerm, ...]
    bounded: tuple[SobTerm, ...]
    higher: tuple  # PTerm pairs feeding the next stage, then tail markers


def correction_derivative(l: int, j: int) -> CorrectionDerivative:
    """d/dt of the cubic correction with index j (0 <= j <= l-2), gamma = 1.

    The resonant part contains the diagonal hit on B_{l-1-j} plus lower
    buckets; bounded squares and the quartic pair/tail terms are returned
    separately.
    """
    if l < 2:
        raise ValueError("model flow requires l >= 2")
    if not 0 <= j <= l - 2:
        raise ValueError(f"correction index must be in 0..{l - 2}")
    m = l - 1 - j
    corr = _correction_shape((2 * j + 1, (0,), m), l)
    linear = _expand_linear(corr, l)
    pairs, squares, tails = _expand_nonlinear(corr, l)
    res = tuple(
        SobTerm(t.coeff, t.a_out, t.off, t.b) for t in linear if t.is_resonant
    )
    bnd = tuple(
        SobTerm(t.coeff, t.a_out, t.off, t.b) for t in linear if not t.is_resonant
    )
    return CorrectionDerivative(res, bnd, tuple(pairs + squares) + tuple(tails))


# ---------------------------------------------------------------------------
# the cancellation cascade
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Correction:
    """One energy correction: gamma(s) times the stored unit integral."""

    stage: int
    index: int
    term: PTerm
    gamma: SPoly
    bucket: tuple[int, tuple[int, ...], int]

    def to_obj(self) -> dict:
        return {
            "stage": self.stage,
            "index": self.index,
            "gamma": self.gamma.to_obj(),
            "term": self.term.to_obj(),
            "bucket": [self.bucket[0], list(self.bucket[1]), self.bucket[2]],
        }


@dataclass(frozen=True)
class StageReport:
    stage: int
    buckets: int
    diagonal: Fraction

    def to_obj(self) -> dict:
        return {"stage": self.stage, "buckets": self.buckets, "diagonal": str(self.diagonal)}


@dataclass
class EnergyBlueprint:
    """Complete bookkeeping of E^s(u) and its exactly decomposed derivative.

    corrections carry the solved gamma(s); bounded_remainder and markers hold
    every surviving piece of d/dt E^s; resonant_residue lists resonant terms
    the basis failed to absorb (empty for a sound construction) and pending
    holds not-yet-processed input when the cascade is stopped early.
    """

    l: int
    max_stage: int
    corrections: list[Correction] = field(default_factory=list)
    resonant_residue: list[PTerm] = field(default_factory=list)
    bounded_remainder: list[PTerm] = field(default_factory=list)
    markers: list = field(default_factory=list)
    stages: list[StageReport] = field(default_factory=list)
    pending: list[PTerm] = field(default_factory=list)

    def gammas(self) -> list[SPoly]:
        return [c.gamma for c in self.corrections]

    def to_obj(self) -> dict:
        return {
            "l": self.l,
            "max_stage": self.max_stage,
            "gammas": [c.gamma.to_obj() for c in self.corrections],
            "corrections": [c.to_obj() for c in self.corrections],
            "resonant_residue": [t.to_obj() for t in self.resonant_residue],
            "diagnostics": {
                "stages": [r.to_obj() for r in self.stages],
                "bounded_terms": len(self.bounded_remainder),
                "markers": len(self.markers),
                "pending_terms": len(self.pending),
                "regularity_threshold": str(regularity_threshold(self.l)),
            },
        }


def _bucketize(squares: list[PTerm]) -> tuple[dict, list[PTerm]]:
    resonant: dict[tuple, SPoly] = {}
    bounded: list[PTerm] = []
    for t in squares:
        if t.coeff.is_zero():
            continue
        if t.is_resonant:
            key = t.bucket()
            resonant[key] = resonant.get(key, _ZERO) + t.coeff
        else:
            bounded.append(t)
    return {k: v for k, v in resonant.items() if not v.is_zero()}, bounded


def _peel_zero_outer(resonant: dict) -> tuple[dict, list[PTerm]]:
    """Rewrite resonant buckets with no outer derivative via the exact peel.

    int P (D^s d^m u)^2 with P a bare product is correctable only if P is a
    total derivative; the exact part becomes (A=1, inner) buckets, any
    non-exact residue is reported instead of silently dropped.
    """
    out: dict[tuple, SPoly] = {}
    residue: list[PTerm] = []
    by_m: dict[int, list[tuple[tuple[int, ...], SPoly]]] = {}
    for (a_out, inner, m), cp in sorted(resonant.items()):
        if a_out >= 1:
            out[(a_out, inner, m)] = out.get((a_out, inner, m), _ZERO) + cp
        else:
            by_m.setdefault(m, []).append((inner, cp))
    for m in sorted(by_m):
        deg = max(len(cp.coeffs) for _, cp in by_m[m])
        for d in range(deg):
            poly = DiffPoly(
                DiffMonomial(cp.coeffs[d], tuple(("u", q) for q in inner))
                for inner, cp in by_m[m]
                if d < len(cp.coeffs) and cp.coeffs[d] != 0
            )
            if poly.is_zero():
                continue
            anti, res = split_exact(poly)
            sd = SPoly((0,) * d + (1,))
            for monoterm in anti.monomials:
                t = pterm(sd * monoterm.coeff, 1, tuple(k for _, k in monoterm.factors), 0, m, m)
                key = t.bucket()
                out[key] = out.get(key, _ZERO) + t.coeff
            for monoterm in res.monomials:
                residue.append(pterm(sd * monoterm.coeff, 0, tuple(k for _, k in monoterm.factors), 0, m, m))
    return {k: v for k, v in out.items() if not v.is_zero()}, residue


def _solve_stage(l: int, stage: int, resonant: dict, bp: EnergyBlueprint) -> list[PTerm]:
    """Cancel every resonant bucket of one stage; returns next-stage pairs.

    Buckets are processed in descending m: the correction's diagonal hit
    cancels its own bucket exactly (verified symbolically, SingularSystem on
    failure) and pollutes only strictly smaller m.
    """
    diag = alpha_coeffs(l).diagonal
    load = dict(resonant)
    next_pairs: list[PTerm] = []
    index = 0
    while True:
        live = [k for k, v in load.items() if not v.is_zero()]
        if not live:
            break
        bucket = max(live, key=lambda k: (k[2], -k[0], tuple(-q for q in k[1])))
        gamma = load[bucket] / diag
        corr = _correction_shape(bucket, l)
        bp.corrections.append(Correction(stage, index, corr, gamma, bucket))
        index += 1
        scaled = replace(corr, coeff=gamma)
        for piece in _expand_linear(scaled, l):
            if piece.is_resonant:
                key = piece.bucket()
                if key != bucket and key[2] >= bucket[2]:
                    raise SingularSystem(f"stage {stage}: pollution into bucket {key} from {bucket}")
                load[key] = load.get(key, _ZERO) + piece.coeff
            else:
                bp.bounded_remainder.append(piece)
        if not load[bucket].is_zero():
            raise SingularSystem(f"stage {stage}: bucket {bucket} not cancelled")
        del load[bucket]
        pairs, squares, tails = _expand_nonlinear(scaled, l)
        next_pairs.extend(pairs)
        bp.bounded_remainder.extend(squares)
        bp.markers.extend(tails)
    bp.stages.append(StageReport(stage, len(resonant), diag))
    return _merge(next_pairs)


def build_energy(l: int, max_stage: int | None = None) -> EnergyBlueprint:
    """Run the cancellation cascade through max_stage (default l+1).

    Stage k cancels the k-linear resonant terms; the spill of the final
    stage's corrections is reduced and must land entirely in bounded terms,
    otherwise it is reported in resonant_residue.  Stopping early leaves the
    unprocessed input in pending.
    """
    if l < 2:
        raise ValueError("model flow requires l >= 2")
    full = l + 1
    if max_stage is None:
        max_stage = full
    if not 3 <= max_stage <= full:
        raise ValueError(f"stage must be in 3..{full}")

    bp = EnergyBlueprint(l=l, max_stage=max_stage)
    qbounded, qresonant = quadratic_derivative(l)
    for item in qbounded:
        if isinstance(item, SobTerm):
            bp.bounded_remainder.append(item.as_pterm())
        else:
            bp.markers.append(item)
    squares = [t.as_pterm() for t in qresonant]

    for stage in range(3, max_stage + 1):
        resonant, bounded = _bucketize(_merge(squares))
        bp.bounded_remainder.extend(bounded)
        resonant, residue = _peel_zero_outer(resonant)
        bp.resonant_residue.extend(residue)
        pairs = _solve_stage(l, stage, resonant, bp)
        squares = []
        for p in pairs:
            squares.extend(_reduce_pair(p))

    resonant, bounded = _bucketize(_merge(squares))
    bp.bounded_remainder.extend(bounded)
    if max_stage == full:
        # spill of the last stage must be non-resonant; report otherwise
        for key in sorted(resonant):
            a_out, inner, m = key
            bp.resonant_residue.append(PTerm(resonant[key], a_out, inner, 0, m, m))
    else:
        for key in sorted(resonant):
            a_out, inner, m = key
            bp.pending.append(PTerm(resonant[key], a_out, inner, 0, m, m))
    bp.bounded_remainder = _merge(bp.bounded_remainder)
    return bp


def solve_gammas(l: int) -> EnergyBlueprint:
    """Cubic-stage blueprint: gammas cancelling the quadratic stage's resonants."""
    return build_energy(l, 3)


def higher_corrections(l: int, order: int) -> EnergyBlueprint:
    """Blueprint with cancellation stages through the given polynomial order."""
    return build_energy(l, order)


# ---------------------------------------------------------------------------
# numeric evaluation of the energy and its predicted derivative
# ---------------------------------------------------------------------------


def _check_threshold(l: int, s) -> None:
    thr = regularity_threshold(l)
    val = Fraction(s).limit_denominator(10**9) if isinstance(s, float) else Fraction(s)
    if val <= thr:
        raise ThresholdViolation(f"need s > {thr} for l = {l}, got {s}")


def evaluate_energy(bp: EnergyBlueprint, s, fieldval: SpectralField) -> float:
    """E^s(u) = 1/2 |u|_{H^s}^2 + sum gamma(s) * correction integrals."""
    _check_threshold(bp.l, s)
    sf = float(s)
    total = 0.5 * sobolev_norm(fieldval, sf) ** 2
    for c in bp.corrections:
        total += float(c.gamma(sf)) * _pterm_value(c.term, sf, fieldval)
    return total


def energy_time_derivative(bp: EnergyBlueprint, s, fieldval: SpectralField) -> float:
    """Predicted d/dt E^s(u) along the flow, from the stored decomposition.

    For a complete blueprint this is an exact identity: the sum of all
    bounded terms, marker functionals, and any reported residue or pending
    input (included for honesty; empty when the construction succeeded).
    """
    _check_threshold(bp.l, s)
    sf = float(s)
    total = 0.0
    for t in bp.bounded_remainder:
        total += _pterm_value(t, sf, fieldval)
    for mk in bp.markers:
        total += mk.evaluate(fieldval, sf)
    for t in bp.resonant_residue:
        total += _pterm_value(t, sf, fieldval)
    for t in bp.pending:
        total += _pterm_value(t, sf, fieldval)
    return total

"""Trilinear integration-by-parts identities on the torus.

For odd order 2l+1 define
I_{2l+1}(w, f, g) = int d^{2l+1}w f g + int w d^{2l+1}f g + int w f d^{2l+1}g.
I_1 vanishes and in general the symmetrized derivative load collapses to
I_{2l+1} = sum_{j=1}^{l} alpha_{j,l} int d^{2(l-j)+1}w d^j f d^j g
with integer alpha computed here by the full structural recursion
alpha_{m,l} = C(2l+1, m) - sum_{j=1}^{m-1} C(2l+1, j) alpha_{m-j, l-j}.
The diagonal alpha_{l,l} = (-1)^{l+1}(2l+1) is asserted by tests, not assumed.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

from .diffpoly import DiffPoly, IntegralExpr, is_exact, mono, multiply, sym

__all__ = ["AlphaTable", "IbpIdentity", "alpha_coeffs", "reduce_integral", "verify_identity"]


@dataclass(frozen=True)
class AlphaTable:
    """Coefficients alpha_{j,l}, j = 1..l, for the order-(2l+1) identity."""

    l: int
    alphas: tuple[Fraction, ...]

    def __getitem__(self, j: int) -> Fraction:
        if not 1 <= j <= self.l:
            raise IndexError(f"j must be in 1..{self.l}")
        return self.alphas[j - 1]

    @property
    def diagonal(self) -> Fraction:
        return self.alphas[-1]

    def to_obj(self) -> dict:
        return {"l": self.l, "alphas": [str(a) for a in self.alphas]}


_TABLES: dict[int, AlphaTable] = {}


def alpha_coeffs(l: int) -> AlphaTable:
    if l < 0:
        raise ValueError("l must be nonnegative")
    if l not in _TABLES:
        for ll in range(l + 1):
            if ll in _TABLES:
                continue
            row = []
            for m in range(1, ll + 1):
                val = Fraction(comb(2 * ll + 1, m))
                for j in range(1, m):
                    val -= comb(2 * ll + 1, j) * _TABLES[ll - j][m - j]
                row.append(val)
            _TABLES[ll] = AlphaTable(ll, tuple(row))
    return _TABLES[l]


def _identity_sides(l: int) -> tuple[DiffPoly, DiffPoly]:
    w, f, g = sym("w"), sym("f"), sym("g")
    n = 2 * l + 1
    lhs = (
        multiply(multiply(sym("w", n), f), g)
        + multiply(multiply(w, sym("f", n)), g)
        + multiply(multiply(w, f), sym("g", n))
    )
    table = alpha_coeffs(l)
    rhs = DiffPoly.zero()
    for j in range(1, l + 1):
        term = multiply(multiply(sym("w", 2 * (l - j) + 1), sym("f", j)), sym("g", j))
        rhs = rhs + mono(table[j]) * term
    return lhs, rhs


@dataclass(frozen=True)
class IbpIdentity:
    """I_{2l+1}(w,f,g) = sum_j alpha_{j,l} int d^{2(l-j)+1}w d^j f d^j g."""

    l: int
    alphas: AlphaTable
    lhs: IntegralExpr
    rhs: IntegralExpr

    @property
    def holds(self) -> bool:
        return self.lhs == self.rhs


def reduce_integral(l: int) -> IbpIdentity:
    """The order-(2l+1) identity with both sides as canonical integrals."""
    lhs, rhs = _identity_sides(l)
    return IbpIdentity(l=l, alphas=alpha_coeffs(l), lhs=IntegralExpr(lhs), rhs=IntegralExpr(rhs))


def verify_identity(l: int) -> bool:
    """Independent check: lhs - rhs integrand is a total derivative.

    Uses the Euler-operator oracle in all three symbols, which shares no code
    path with the alpha recursion or with the canonical-form reduction.
    """
    lhs, rhs = _identity_sides(l)
    return is_exact(lhs - rhs)

"""The KdV hierarchy generated by the Lenard recursion.

Level 0 is G_0 = u and each next integrand solves
d/dx G_{l+1} = (d^3 + (2/3) u d + (1/3) u_x) G_l,
which is exact at every level, so the antiderivative engine produces G_{l+1}
with exact rational coefficients. The flow at level l is u_t = d/dx G_l and
its Hamiltonian comes from the line homotopy.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .diffpoly import (
    DiffPoly,
    IntegralExpr,
    euler_operator,
    homotopy_hamiltonian,
    ibp_normal_form,
    integrate_exact,
    mono,
    poly_from_obj,
    poly_to_obj,
    rank_of,
    sym,
    total_derivative,
)

__all__ = [
    "HierarchyLevel",
    "RankViolation",
    "lenard_step",
    "generate",
    "classify",
    "involution_residue",
    "level_to_obj",
    "level_from_obj",
]


class RankViolation(ValueError):
    """Raised when a hierarchy level breaks the degree/weight bookkeeping."""


@dataclass(frozen=True)
class HierarchyLevel:
    """One level of the hierarchy: flow u_t = d/dx g."""

    l: int
    g: DiffPoly
    rhs: DiffPoly
    hamiltonian: IntegralExpr


def lenard_step(g: DiffPoly) -> DiffPoly:
    """Next integrand: the exact antiderivative of (d^3 + 2/3 u d + 1/3 u_x) g."""
    u = sym("u")
    ux = sym("u", 1)
    rhs_next = (
        total_derivative(g, 3)
        + mono(Fraction(2, 3)) * u * total_derivative(g)
        + mono(Fraction(1, 3)) * ux * g
    )
    return integrate_exact(rhs_next)


# idempotent module cache; concurrent fills recompute the same exact values
_LEVELS: list[HierarchyLevel] = []


def _build_level(l: int, g: DiffPoly) -> HierarchyLevel:
    return HierarchyLevel(
        l=l,
        g=g,
        rhs=total_derivative(g),
        hamiltonian=homotopy_hamiltonian(g),
    )


def generate(l: int) -> tuple[HierarchyLevel, ...]:
    """Levels 0..l inclusive, memoized."""
    if l < 0:
        raise ValueError("level must be nonnegative")
    if not _LEVELS:
        _LEVELS.append(_build_level(0, sym("u")))
    while len(_LEVELS) <= l:
        _LEVELS.append(_build_level(len(_LEVELS), lenard_step(_LEVELS[-1].g)))
    return tuple(_LEVELS[: l + 1])


def level(l: int) -> HierarchyLevel:
    return generate(l)[l]


def classify(h: HierarchyLevel) -> dict[int, dict]:
    """Audit the rhs monomials by degree.

    Every degree-k group must carry total derivative weight 2(l-k)+3, or
    equivalently rank l + 3/2; violations raise RankViolation. Returns the
    coefficient table {degree: {"weight": w, "rank": r, "monomials": [...]}}.
    """
    want_rank = Fraction(h.l) + Fraction(3, 2)
    table: dict[int, dict] = {}
    for m in h.rhs:
        k = m.degree
        want_weight = 2 * (h.l - k) + 3
        if m.weight != want_weight:
            raise RankViolation(
                f"level {h.l}: degree-{k} monomial {m!r} has weight {m.weight}, "
                f"expected {want_weight}"
            )
        if rank_of(m) != want_rank:
            raise RankViolation(
                f"level {h.l}: monomial {m!r} has rank {rank_of(m)}, expected {want_rank}"
            )
        entry = table.setdefault(k, {"weight": want_weight, "rank": want_rank, "monomials": []})
        entry["monomials"].append((str(m.coeff), [[s, o] for s, o in m.factors]))
    return table


def involution_residue(m: int, l: int) -> DiffPoly:
    """Normal form of the integrand grad H_m * (d/dx G_l); zero iff in involution."""
    levels = generate(max(m, l))
    gm = euler_operator(levels[m].hamiltonian.integrand)
    return ibp_normal_form(gm * levels[l].rhs)


def level_to_obj(h: HierarchyLevel) -> dict:
    return {
        "l": h.l,
        "g": poly_to_obj(h.g),
        "rhs": poly_to_obj(h.rhs),
        "hamiltonian": poly_to_obj(h.hamiltonian.canonical),
    }


def level_from_obj(obj: dict) -> HierarchyLevel:
    g = poly_from_obj(obj["g"])
    return _build_level(int(obj["l"]), g)

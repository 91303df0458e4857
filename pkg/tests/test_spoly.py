"""Exact univariate polynomials in the regularity parameter."""

from fractions import Fraction

from kdvlab.spoly import SPoly, binom_s


def test_construction_and_normalization():
    p = SPoly([1, 2, 0])
    assert p.degree == 1
    assert p.coeffs == (Fraction(1), Fraction(2))
    assert SPoly([0, 0]).is_zero()
    assert SPoly().is_zero()


def test_const_and_s():
    assert SPoly.const(3)(10) == 3
    assert SPoly.s()(Fraction(7, 2)) == Fraction(7, 2)
    assert SPoly.const(0).is_zero()


def test_arithmetic():
    s = SPoly.s()
    p = (s + SPoly.const(1)) * (s - SPoly.const(1))
    assert p == SPoly([-1, 0, 1])
    assert (p - p).is_zero()
    assert (-p)(2) == -3
    assert (p / 2)(3) == Fraction(8, 2)


def test_evaluation_is_exact_for_fractions_and_float_aware():
    p = SPoly([Fraction(1, 3), Fraction(1, 6)])
    assert p(Fraction(2)) == Fraction(2, 3)
    out = p(0.5)
    assert isinstance(out, float)
    assert abs(out - (1 / 3 + 1 / 12)) < 1e-15


def test_constant_value_guard():
    assert SPoly.const(5).constant_value() == 5
    try:
        SPoly.s().constant_value()
    except ValueError:
        pass
    else:
        raise AssertionError("non-constant polynomial must refuse constant_value")


def test_binom_s():
    # binom(s + a, j) as a polynomial in s, checked at integer points
    # against math.comb
    import math

    for off in (0, 1, 3):
        for j in (0, 1, 2, 3):
            p = binom_s(off, j)
            for sv in range(j + 4, j + 9):
                assert p(sv) == math.comb(sv + off, j)


def test_roundtrip_serialization():
    p = SPoly([Fraction(-3, 10), Fraction(1, 5)])
    q = SPoly.from_obj(p.to_obj())
    assert p == q

"""Acceptance checklist: ten end-to-end checks at their stated tolerances.

Each test computes its verdict, prints one PASS/FAIL line straight to the
real stdout (bypassing capture so the line always shows in the run log), and
only then asserts.  Thresholds here restate the package-level contract; the
experiment pipelines run at their documented default configurations.
"""

import time
from fractions import Fraction

import pytest

from kdvlab.experiments import (
    exp_bona_smith,
    exp_conservation,
    exp_energy_drift,
    exp_mu_cauchy,
    exp_scaling,
)
from kdvlab.hierarchy import classify, level
from kdvlab.ibpcalc import alpha_coeffs, verify_identity
from kdvlab.modenergy import build_energy, energy_time_derivative, evaluate_energy
from kdvlab.spectral import SpectralField, model_flow, random_decay_field, rhs_field
from kdvlab.diffpoly import mono, sym


_CAPSYS = None


@pytest.fixture(autouse=True)
def _terminal_bridge(capsys):
    # keep the checklist lines visible on the real terminal even though
    # pytest captures at the file-descriptor level
    global _CAPSYS
    _CAPSYS = capsys
    yield
    _CAPSYS = None


def _report(tag: str, ok: bool, elapsed: float, detail: str = "") -> None:
    line = f"{tag}: {'PASS' if ok else 'FAIL'} ({elapsed:.2f}s)"
    if detail:
        line += f"  [{detail}]"
    if _CAPSYS is not None:
        with _CAPSYS.disabled():
            print(line, flush=True)
    else:
        print(line, flush=True)


def test_criterion_01_exact_diagonal_law():
    t0 = time.monotonic()
    ok = True
    for l in range(1, 13):
        table = alpha_coeffs(l)
        ok = ok and table.alphas[l - 1] == Fraction((-1) ** (l + 1) * (2 * l + 1))
        ok = ok and table.diagonal == table.alphas[l - 1]
    elapsed = time.monotonic() - t0
    ok = ok and elapsed < 1.0
    _report("C01 exact diagonal law l<=12", ok, elapsed)
    assert ok


def test_criterion_02_identity_certification():
    t0 = time.monotonic()
    ok = all(verify_identity(l) for l in range(0, 7))
    elapsed = time.monotonic() - t0
    ok = ok and elapsed < 30.0
    _report("C02 variational certification l<=6", ok, elapsed)
    assert ok


def test_criterion_03_hierarchy_golden_and_rank_audit():
    t0 = time.monotonic()
    u = sym("u")
    u1 = sym("u", 1)
    u2 = sym("u", 2)
    u4 = sym("u", 4)
    expected = (
        u4
        + mono(Fraction(5, 3)) * u * u2
        + mono(Fraction(5, 6)) * u1 * u1
        + mono(Fraction(5, 18)) * u * u * u
    )
    ok = level(2).g == expected
    for l in range(9):
        table = classify(level(l))  # raises on any rank break
        for degree, row in table.items():
            ok = ok and row["weight"] == 2 * (l - degree) + 3
            ok = ok and row["rank"] == Fraction(2 * l + 3, 2)
    elapsed = time.monotonic() - t0
    _report("C03 hierarchy values + rank audit l<=8", ok, elapsed)
    assert ok


def test_criterion_04_cancellation_all_orders():
    t0 = time.monotonic()
    ok = True
    for l in (2, 3, 4, 5):
        bp = build_energy(l)
        ok = ok and bp.resonant_residue == [] and bp.pending == []
        diag = Fraction((-1) ** (l + 1) * (2 * l + 1))
        ok = ok and all(sr.diagonal != 0 for sr in bp.stages)
        cubic = [sr for sr in bp.stages if sr.stage == 3]
        ok = ok and len(cubic) == 1 and cubic[0].diagonal == diag
    elapsed = time.monotonic() - t0
    ok = ok and elapsed < 120.0
    _report("C04 modified-energy cancellation l=2..5", ok, elapsed)
    assert ok


def test_criterion_05_symbolic_numeric_agreement():
    t0 = time.monotonic()
    l, s, n = 2, 4.0, 128
    bp = build_energy(l)
    flow = model_flow(l)
    u = random_decay_field(n, decay=s + 1.0, seed=20260819, amplitude=0.25, kmax=n // 4)
    predicted = energy_time_derivative(bp, s, u)
    f = rhs_field(flow, u, dealias=1.0)

    def central(h):
        up = SpectralField(n, u.modes + h * f.modes)
        um = SpectralField(n, u.modes - h * f.modes)
        return (evaluate_energy(bp, s, up) - evaluate_energy(bp, s, um)) / (2 * h)

    measured = (4.0 * central(5e-6) - central(1e-5)) / 3.0
    rel = abs(predicted - measured) / max(1.0, abs(measured))
    ok = rel < 1e-6
    elapsed = time.monotonic() - t0
    _report("C05 dE/dt symbolic vs finite difference", ok, elapsed, f"rel={rel:.2e}")
    assert ok


def test_criterion_06_conservation():
    t0 = time.monotonic()
    res = exp_conservation()
    drifts = {k: v for k, v in res.metrics.items() if k.startswith("drift_H")}
    ratios = {k: v for k, v in res.metrics.items() if k.startswith("ratio_H")}
    p = res.config["order"]
    ok = all(v < 1e-8 for v in drifts.values())
    ok = ok and all(0.7 * 2**p <= r <= 1.3 * 2**p for r in ratios.values())
    ok = ok and res.verdict
    elapsed = time.monotonic() - t0
    ok = ok and elapsed < 60.0
    worst = max(drifts.values())
    _report("C06 Hamiltonian conservation + refinement", ok, elapsed, f"max drift={worst:.2e}")
    assert ok


def test_criterion_07_mu_cauchy_rate():
    t0 = time.monotonic()
    res = exp_mu_cauchy()
    slope = res.metrics["slope"]
    ok = res.verdict and 0.8 <= slope <= 1.2
    ok = ok and list(res.config["mus"]) == [1e-2, 5e-3, 2.5e-3, 1.25e-3, 6.25e-4]
    elapsed = time.monotonic() - t0
    _report("C07 mu-Cauchy contraction rate", ok, elapsed, f"slope={slope:.3f}")
    assert ok


def test_criterion_08_mollifier_rates():
    t0 = time.monotonic()
    res = exp_bona_smith()
    m = res.metrics
    ok = res.verdict
    for nu in (0.5, 1.0):
        ok = ok and abs(m[f"growth_slope_nu_{nu}"] - (-nu)) <= 0.2 * nu
    for beta in (0.5, 1.0):
        ok = ok and m[f"conv_slope_beta_{beta}"] >= beta - 0.2
    elapsed = time.monotonic() - t0
    detail = f"growth(1.0)={m['growth_slope_nu_1.0']:.3f}"
    _report("C08 mollifier growth/convergence rates", ok, elapsed, detail)
    assert ok


def test_criterion_09_scaling_symmetry():
    t0 = time.monotonic()
    res = exp_scaling()
    err = res.metrics["max_rel_grid_error"]
    ok = res.verdict and err < 1e-6 and abs(res.metrics["scaled_T"] - 0.1) < 1e-12
    elapsed = time.monotonic() - t0
    _report("C09 scaling symmetry two-solve match", ok, elapsed, f"err={err:.2e}")
    assert ok


def test_criterion_10_frequency_growth_contrast():
    t0 = time.monotonic()
    res = exp_energy_drift()
    rows = res.tables["contrast"][1]
    ratios = [row[3] for row in rows]
    k0s = [row[0] for row in rows]
    ok = k0s == [8, 16, 32, 64]
    ok = ok and all(b > a for a, b in zip(ratios, ratios[1:]))
    ok = ok and ratios[-1] / ratios[0] >= 5.0
    ok = ok and res.verdict
    elapsed = time.monotonic() - t0
    detail = f"ratios {ratios[0]:.1f}->{ratios[-1]:.1f}"
    _report("C10 frequency-growth contrast ladder", ok, elapsed, detail)
    assert ok

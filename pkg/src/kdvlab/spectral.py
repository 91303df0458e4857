"""Pseudospectral calculus and exponential integrators on the 2pi torus.

Fields are real, sampled on x_m = 2pi m/N, and carried as the rfft half
spectrum normalized so that modes[k] = (1/2pi) int f(x) e^{-ikx} dx. With
this convention spectral sums match integrals: int fg = 2pi sum_k f_k
conj(g_k) over the full (mirrored) range, and norms computed from modes
agree bit-for-bit with quadrature of the corresponding integrands.

Nonlinear terms are evaluated by zero-padded products (alias-free), then
truncated to a configurable fraction of the Nyquist band. Time stepping
uses exponential integrators so the stiff linear symbol, up to k^{2l+1}
dispersion plus k^{2l+2} dissipation, is integrated exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from .diffpoly import DiffPoly, IntegralExpr, mono, total_derivative
from . import hierarchy

__all__ = [
    "BlowUp",
    "Diagnostics",
    "FlowSpec",
    "SolverConfig",
    "SpectralField",
    "cosine_field",
    "custom_flow",
    "eval_diffpoly",
    "functional_eval",
    "hierarchy_flow",
    "l2_inner",
    "model_flow",
    "mollify",
    "multiplier",
    "random_decay_field",
    "regularized_flow",
    "scale_field",
    "sobolev_norm",
    "solve",
    "step",
]

TAU = 2.0 * math.pi


class BlowUp(RuntimeError):
    """A mode became non-finite: instability or genuine blow-up."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class SpectralField:
    """Real periodic field; immutable; modes in rfft layout, Nyquist zeroed."""

    __slots__ = ("n", "modes")

    def __init__(self, n: int, modes: np.ndarray):
        if n < 4 or n % 2:
            raise ValueError("grid size must be even and >= 4")
        if modes.shape != (n // 2 + 1,):
            raise ValueError("mode array does not match grid size")
        m = np.array(modes, dtype=np.complex128)
        m[0] = m[0].real
        m[-1] = 0.0
        m.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "modes", m)

    def __setattr__(self, *_):
        raise AttributeError("SpectralField is immutable")

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "SpectralField":
        v = np.asarray(values, dtype=np.float64)
        return cls(v.size, np.fft.rfft(v) / v.size)

    @classmethod
    def from_function(cls, f: Callable[[np.ndarray], np.ndarray], n: int) -> "SpectralField":
        return cls.from_values(f(grid(n)))

    @classmethod
    def zero(cls, n: int) -> "SpectralField":
        return cls(n, np.zeros(n // 2 + 1, dtype=np.complex128))

    def values(self) -> np.ndarray:
        return np.fft.irfft(self.modes * self.n, n=self.n)

    def wavenumbers(self) -> np.ndarray:
        return np.arange(self.n // 2 + 1, dtype=np.float64)

    def band_limit(self) -> int:
        nz = np.nonzero(np.abs(self.modes) > 0.0)[0]
        return int(nz[-1]) if nz.size else 0

    def with_modes(self, modes: np.ndarray) -> "SpectralField":
        return SpectralField(self.n, modes)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        if self.n != other.n:
            raise ValueError("grid mismatch")
        return SpectralField(self.n, self.modes + other.modes)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        if self.n != other.n:
            raise ValueError("grid mismatch")
        return SpectralField(self.n, self.modes - other.modes)

    def __mul__(self, c) -> "SpectralField":
        return SpectralField(self.n, self.modes * float(c))

    __rmul__ = __mul__


def grid(n: int) -> np.ndarray:
    return TAU * np.arange(n) / n


def multiplier(f: SpectralField, kind: str, sigma: float | int = 0) -> SpectralField:
    """Fourier multiplier: kind in {"D", "J", "d", "P_low", "P_high"}.

    D: |k|^sigma with the k=0 mode sent to 0 unless sigma = 0 (negative
    powers of |k| act only away from the mean; the convention is inert
    because every use here is on mean-free quantities). J: (1+k^2)^(sigma/2).
    d: (ik)^m, m = sigma a nonnegative integer. P_low keeps the mean,
    P_high its complement.
    """
    k = f.wavenumbers()
    if kind == "D":
        w = np.zeros_like(k, dtype=np.complex128)
        if sigma == 0:
            w[:] = 1.0
        else:
            w[1:] = k[1:] ** float(sigma)
    elif kind == "J":
        w = (1.0 + k * k) ** (float(sigma) / 2.0) + 0j
    elif kind == "d":
        m = int(sigma)
        if m < 0 or m != sigma:
            raise ValueError("derivative order must be a nonnegative integer")
        w = (1j * k) ** m
    elif kind == "P_low":
        w = np.zeros_like(k, dtype=np.complex128)
        w[0] = 1.0
    elif kind == "P_high":
        w = np.ones_like(k, dtype=np.complex128)
        w[0] = 0.0
    else:
        raise ValueError(f"unknown multiplier kind {kind!r}")
    return f.with_modes(f.modes * w)


def d_power(f: SpectralField, sigma: float) -> SpectralField:
    return multiplier(f, "D", sigma)


def j_power(f: SpectralField, sigma: float) -> SpectralField:
    return multiplier(f, "J", sigma)


def derivative(f: SpectralField, order: int = 1) -> SpectralField:
    return multiplier(f, "d", order)


def sobolev_norm(f: SpectralField, s: float = 0.0) -> float:
    k = f.wavenumbers()
    w = (1.0 + k * k) ** float(s)
    a2 = np.abs(f.modes) ** 2
    total = w[0] * a2[0] + 2.0 * np.sum(w[1:] * a2[1:])
    return math.sqrt(TAU * total)


def l2_inner(f: SpectralField, g: SpectralField) -> float:
    if f.n != g.n:
        raise ValueError("grid mismatch")
    prod = f.modes * np.conj(g.modes)
    return TAU * float(prod[0].real + 2.0 * np.sum(prod[1:].real))


def _padded_values(modes: np.ndarray, orders: Sequence[int], m: int) -> list[np.ndarray]:
    """Physical samples of each requested derivative on an m-point grid.

    The caller guarantees every nonzero mode index fits below m//2, so
    trimming or padding the stored half-spectrum loses nothing.
    """
    take = min(modes.size, m // 2 + 1)
    k = np.arange(take, dtype=np.float64)
    out = []
    for order in orders:
        padded = np.zeros(m // 2 + 1, dtype=np.complex128)
        padded[:take] = modes[:take] * (1j * k) ** order
        out.append(np.fft.irfft(padded * m, n=m))
    return out


def _product_grid(degree: int, band: int) -> int:
    # mean of a degree-d product of band-K fields is exact once m > d*K
    m = degree * band + 2
    return m + (m % 2)


def eval_diffpoly(p: DiffPoly, f: SpectralField, dealias: float = 2.0 / 3.0) -> SpectralField:
    """Evaluate a single-symbol differential polynomial pointwise.

    The input is first truncated to |k| <= dealias*N/2; every monomial is
    then formed on a zero-padded grid large enough that its product is
    alias-free, and the result is truncated back to the same band.
    """
    syms = p.symbols()
    if len(syms) > 1:
        raise ValueError("pointwise evaluation needs a single-symbol polynomial")
    if not (0.0 < dealias <= 1.0):
        raise ValueError("dealias fraction must lie in (0, 1]")
    cut = int(dealias * (f.n // 2))
    modes = f.modes.copy()
    modes[cut + 1 :] = 0.0
    out = np.zeros(f.n // 2 + 1, dtype=np.complex128)
    const = 0.0
    for monomial in p.monomials:
        if not monomial.factors:
            const += float(monomial.coeff)
            continue
        orders = [k for _, k in monomial.factors]
        m = max(_product_grid(len(orders), cut), f.n)
        vals = _padded_values(modes, orders, m)
        prod = np.full(m, float(monomial.coeff))
        for v in vals:
            prod = prod * v
        spec = np.fft.rfft(prod) / m
        take = min(cut, f.n // 2 - 1)
        out[: take + 1] += spec[: take + 1]
    out[0] += const
    out[min(cut, f.n // 2) + 1 :] = 0.0
    return SpectralField(f.n, out)


def functional_eval(e: IntegralExpr | DiffPoly, f: SpectralField) -> float:
    """int p(u, u_x, ...) dx by exact spectral quadrature (padded products)."""
    p = e.integrand if isinstance(e, IntegralExpr) else e
    syms = p.symbols()
    if len(syms) > 1:
        raise ValueError("numeric evaluation needs a single-symbol integrand")
    band = f.band_limit()
    total = 0.0
    for monomial in p.monomials:
        if not monomial.factors:
            total += float(monomial.coeff)
            continue
        orders = [k for _, k in monomial.factors]
        m = max(_product_grid(len(orders), band), 4)
        vals = _padded_values(f.modes, orders, m)
        prod = np.ones(m)
        for v in vals:
            prod = prod * v
        total += float(monomial.coeff) * float(np.mean(prod))
    return TAU * total


def mollify(f: SpectralField, eps: float, m: int = 3) -> SpectralField:
    """Smoothing by a Fourier window exp(-(eps k)^{2m}).

    The window equals 1 at k=0 with 2m-1 vanishing derivatives, so the
    kernel has unit mass and 2m-1 vanishing moments; m is chosen so that
    2m-1 exceeds the Sobolev indices exercised in the rate studies.
    """
    if eps <= 0 or m < 1:
        raise ValueError("need eps > 0 and m >= 1")
    k = f.wavenumbers()
    return f.with_modes(f.modes * np.exp(-((eps * k) ** (2 * m))))


def scale_field(f: SpectralField, lam: int) -> SpectralField:
    """u(x) -> lam^2 u(lam x); mode k of the output is lam^2 * mode(k/lam).

    Spatial half of the two-parameter symmetry; the matched time for flow
    level l is t/lam^{2l+1}, applied by the caller. Integer lam keeps the
    result 2pi-periodic; the grid is refined by the same factor so no band
    is lost.
    """
    if lam < 1 or int(lam) != lam:
        raise ValueError("scaling factor must be a positive integer")
    lam = int(lam)
    n2 = f.n * lam
    out = np.zeros(n2 // 2 + 1, dtype=np.complex128)
    out[:: lam][: f.n // 2 + 1] = lam * lam * f.modes
    return SpectralField(n2, out)


def cosine_field(n: int, wavenumber: int = 1, amplitude: float = 1.0) -> SpectralField:
    """amplitude * cos(wavenumber x), constructed exactly in mode space."""
    if not 1 <= wavenumber < n // 2:
        raise ValueError("wavenumber must lie in [1, N/2)")
    modes = np.zeros(n // 2 + 1, dtype=np.complex128)
    modes[wavenumber] = amplitude / 2.0
    return SpectralField(n, modes)


def random_decay_field(
    n: int,
    decay: float,
    seed: int,
    amplitude: float = 1.0,
    kmax: int | None = None,
) -> SpectralField:
    """Random-phase field with |mode k| = amplitude * k^(-decay), 1 <= k <= kmax."""
    rng = np.random.default_rng(seed)
    half = n // 2
    if kmax is None:
        kmax = half - 1
    if not 1 <= kmax <= half - 1:
        raise ValueError("kmax must lie in [1, N/2 - 1]")
    modes = np.zeros(half + 1, dtype=np.complex128)
    k = np.arange(1, kmax + 1, dtype=np.float64)
    phases = rng.uniform(0.0, TAU, size=kmax)
    modes[1 : kmax + 1] = amplitude * k ** (-decay) * np.exp(1j * phases)
    return SpectralField(n, modes)


# ---------------------------------------------------------------------------
# flows


@dataclass(frozen=True)
class FlowSpec:
    """u_t = (linear multiplier) u + (nonlinear differential polynomial)(u)."""

    name: str
    symbol: Callable[[np.ndarray], np.ndarray]
    nonlinear: DiffPoly | None
    l: int

    def linear_on(self, n: int) -> np.ndarray:
        k = np.arange(n // 2 + 1, dtype=np.float64)
        sym = np.asarray(self.symbol(k), dtype=np.complex128)
        sym[-1] = 0.0
        return sym


def model_flow(l: int) -> FlowSpec:
    """u_t + d^{2l+1} u = u d^{2l-1} u."""
    if l < 2:
        raise ValueError("the model flow needs l >= 2")
    nl = mono(1, [("u", 0), ("u", 2 * l - 1)])
    return FlowSpec("model", lambda k: -((1j * k) ** (2 * l + 1)), nl, l)


def regularized_flow(l: int, mu: float) -> FlowSpec:
    """Model flow plus parabolic damping, Fourier symbol -mu k^{2l+2}."""
    if l < 2:
        raise ValueError("the model flow needs l >= 2")
    if mu < 0:
        raise ValueError("mu must be >= 0")
    nl = mono(1, [("u", 0), ("u", 2 * l - 1)])
    return FlowSpec(
        "regularized",
        lambda k: -((1j * k) ** (2 * l + 1)) - mu * k ** (2 * l + 2),
        nl,
        l,
    )


def hierarchy_flow(l: int) -> FlowSpec:
    """u_t = d/dx G_l(u); linear symbol +(ik)^{2l+1}, the rest pointwise."""
    if l < 1:
        raise ValueError("hierarchy flows need l >= 1")
    g = hierarchy.level(l).g
    nl = total_derivative(g - mono(1, [("u", 2 * l)]))
    return FlowSpec("hierarchy", lambda k: (1j * k) ** (2 * l + 1), nl, l)


def custom_flow(rhs: DiffPoly, l: int = 0) -> FlowSpec:
    return FlowSpec("custom", lambda k: np.zeros_like(k, dtype=np.complex128), rhs, l)


def rhs_field(flow: FlowSpec, f: SpectralField, dealias: float = 1.0) -> SpectralField:
    """Full right-hand side of the flow at a state, alias-free products."""
    out = f.modes * flow.linear_on(f.n)
    if flow.nonlinear is not None:
        out = out + eval_diffpoly(flow.nonlinear, f, dealias).modes
    return SpectralField(f.n, out)


# ---------------------------------------------------------------------------
# exponential time stepping


def _phi(j: int, z: np.ndarray) -> np.ndarray:
    """phi_j(z) = sum_{n>=0} z^n/(n+j)!; Taylor near 0, closed form away."""
    z = np.asarray(z, dtype=np.complex128)
    out = np.empty_like(z)
    small = np.abs(z) <= 1.0
    zs = z[small]
    acc = np.zeros_like(zs)
    # 30 terms: remainder below double precision on |z| <= 1
    for n in range(29, -1, -1):
        acc = acc * zs + 1.0 / math.factorial(n + j)
    out[small] = acc
    zb = z[~small]
    ez = np.exp(zb)
    if j == 0:
        val = ez
    elif j == 1:
        val = (ez - 1.0) / zb
    elif j == 2:
        val = (ez - 1.0 - zb) / zb**2
    elif j == 3:
        val = (ez - 1.0 - zb - zb**2 / 2.0) / zb**3
    else:
        raise ValueError("phi_j implemented for j <= 3")
    out[~small] = val
    return out


class _Stepper:
    """Precomputed exponential one-step scheme for a fixed flow/grid/dt."""

    def __init__(self, flow: FlowSpec, n: int, dt: float, dealias: float, order: int):
        if order not in (2, 4):
            raise ValueError("integrator order must be 2 or 4")
        self.flow = flow
        self.n = n
        self.dt = dt
        self.dealias = dealias
        self.order = order
        cut = int(dealias * (n // 2))
        mask = np.zeros(n // 2 + 1)
        mask[: cut + 1] = 1.0
        mask[-1] = 0.0
        self.mask = mask
        lin = flow.linear_on(n)
        z = dt * lin
        self.e_full = np.exp(z)
        if order == 2:
            self.phi1 = _phi(1, z)
            self.phi2 = _phi(2, z)
        else:
            self.e_half = np.exp(z / 2.0)
            self.phi1_half = _phi(1, z / 2.0)
            p1, p2, p3 = _phi(1, z), _phi(2, z), _phi(3, z)
            self.w1 = p1 - 3.0 * p2 + 4.0 * p3
            self.w2 = 2.0 * p2 - 4.0 * p3
            self.w3 = -p2 + 4.0 * p3
        self._nl_poly = flow.nonlinear

    def _nl(self, modes: np.ndarray) -> np.ndarray:
        if self._nl_poly is None:
            return np.zeros_like(modes)
        f = SpectralField(self.n, modes)
        return eval_diffpoly(self._nl_poly, f, self.dealias).modes

    def advance(self, modes: np.ndarray, t: float) -> np.ndarray:
        h = self.dt
        u = modes * self.mask
        if self.order == 2:
            nu = self._nl(u)
            a = self.e_full * u + h * self.phi1 * nu
            na = self._nl(a)
            new = a + h * self.phi2 * (na - nu)
        else:
            nu = self._nl(u)
            a = self.e_half * u + (h / 2.0) * self.phi1_half * nu
            na = self._nl(a)
            b = self.e_half * u + (h / 2.0) * self.phi1_half * na
            nb = self._nl(b)
            c = self.e_half * a + (h / 2.0) * self.phi1_half * (2.0 * nb - nu)
            nc = self._nl(c)
            new = self.e_full * u + h * (self.w1 * nu + self.w2 * (na + nb) + self.w3 * nc)
        new = new * self.mask
        if not np.all(np.isfinite(new)):
            raise BlowUp(f"non-finite mode at t = {t + h:.6g}", t + h)
        return new


@dataclass
class SolverConfig:
    n: int = 256
    dt: float = 1e-3
    t_final: float = 1.0
    dealias: float = 2.0 / 3.0
    order: int = 4
    diagnostics_every: int = 1
    diagnostics_s: float | None = None
    hamiltonians: tuple[int, ...] = (0, 1, 2)
    store_states: bool = False

    def __post_init__(self):
        if self.dt <= 0 or self.t_final < 0:
            raise ValueError("need dt > 0 and t_final >= 0")
        if self.n < 16 or self.n % 2:
            raise ValueError("grid size must be even and >= 16")
        if not (0.0 < self.dealias <= 1.0):
            raise ValueError("dealias fraction must lie in (0, 1]")


@dataclass
class Diagnostics:
    times: list[float] = dc_field(default_factory=list)
    l2: list[float] = dc_field(default_factory=list)
    hs: list[float] = dc_field(default_factory=list)
    hams: dict[int, list[float]] = dc_field(default_factory=dict)
    energy: list[float] = dc_field(default_factory=list)
    states: list[SpectralField] = dc_field(default_factory=list)

    def rows(self) -> list[dict]:
        out = []
        for i, t in enumerate(self.times):
            row = {"t": t, "l2": self.l2[i]}
            row["hs"] = self.hs[i] if self.hs else ""
            for m in sorted(self.hams):
                row[f"H{m}"] = self.hams[m][i]
            row["Es"] = self.energy[i] if self.energy else ""
            out.append(row)
        return out


def step(state: SpectralField, flow: FlowSpec, cfg: SolverConfig, t: float = 0.0) -> SpectralField:
    stepper = _Stepper(flow, state.n, cfg.dt, cfg.dealias, cfg.order)
    return SpectralField(state.n, stepper.advance(state.modes.copy(), t))


def solve(
    u0: SpectralField,
    flow: FlowSpec,
    cfg: SolverConfig,
    energy: Callable[[SpectralField], float] | None = None,
) -> tuple[SpectralField, Diagnostics]:
    """March to t_final recording norms, Hamiltonian values, and E^s."""
    n_steps = int(round(cfg.t_final / cfg.dt))
    if abs(n_steps * cfg.dt - cfg.t_final) > 1e-9 * max(1.0, cfg.t_final):
        raise ValueError("t_final must be an integer number of steps")
    stepper = _Stepper(flow, u0.n, cfg.dt, cfg.dealias, cfg.order)
    ham_integrands = {
        m: hierarchy.level(m).hamiltonian for m in cfg.hamiltonians
    }
    diag = Diagnostics(hams={m: [] for m in cfg.hamiltonians})

    def record(t: float, f: SpectralField):
        diag.times.append(t)
        diag.l2.append(sobolev_norm(f, 0.0))
        if cfg.diagnostics_s is not None:
            diag.hs.append(sobolev_norm(f, cfg.diagnostics_s))
        for m, integrand in ham_integrands.items():
            diag.hams[m].append(functional_eval(integrand, f))
        if energy is not None:
            diag.energy.append(energy(f))
        if cfg.store_states:
            diag.states.append(f)

    modes = u0.modes.copy() * stepper.mask
    f = SpectralField(u0.n, modes)
    record(0.0, f)
    for i in range(n_steps):
        t = i * cfg.dt
        modes = stepper.advance(modes, t)
        if (i + 1) % cfg.diagnostics_every == 0 or i + 1 == n_steps:
            f = SpectralField(u0.n, modes)
            record((i + 1) * cfg.dt, f)
    return SpectralField(u0.n, modes), diag

"""Inhomogeneous problem ``u' + A u = P f``, ``u(0) = 0``, pressure recovery and
maximal-regularity ratios.

Everything is computed in eigen-coordinates.  For the box these are the modal
coefficients; for dense operators they are ``V^{-1} c``.  Raw grid forcings are
Helmholtz-split at every time sample, giving the solenoidal part ``P f`` that
drives ``u`` and the Neumann potential ``chi`` that is the pressure.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .funcalc import power_operator
from .operator_core import (
    DomainError,
    GridField,
    SlipStokesSpectrum,
    build_box_stokes,
    gradient_family,
    helmholtz_split,
    lp_norm,
)

SCHEMES = ("duhamel_exact", "implicit_euler", "crank_nicolson")
SCALES = ("strong", "weak", "very_weak")


class QuadratureWarning(RuntimeWarning):
    """Time sampling too coarse for the fastest populated mode."""


# ---------------------------------------------------------------------------
# forcings
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Forcing:
    """Right-hand side in one of three representations.

    * ``analytic``: ``f_k(t) = sum_j amplitudes[j, k] * exp(rates[j] t)``.
    * ``sampled``: modal coefficients on ``times``, linear in between.
    * ``raw``: grid values on ``times`` (any field, possibly with a gradient
      part), stored with the per-sample Helmholtz split.
    """

    kind: str
    T: float
    amplitudes: np.ndarray | None = None
    rates: np.ndarray | None = None
    times: np.ndarray | None = None
    coefficients: np.ndarray | None = None  # (N+1, n) solenoidal modal part
    raw_values: np.ndarray | None = None  # (N+1, d, M..M)
    gradient_coefficients: np.ndarray | None = None  # (N+1, ng)
    potential_coefficients: np.ndarray | None = None  # (N+1, ng)
    split_residual: float = 0.0
    spec: SlipStokesSpectrum | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("analytic", "sampled", "raw"):
            raise DomainError(f"unknown forcing kind {self.kind!r}")
        if not self.T > 0:
            raise DomainError("horizon T must be positive")
        if self.kind != "analytic":
            t = self.times
            if t is None or np.any(np.diff(t) <= 0):
                raise DomainError("sample times must be strictly increasing")
            if t[0] > 0 or t[-1] < self.T * (1 - 1e-12):
                raise DomainError("sample times must cover [0, T]")

    # -- constructors -----------------------------------------------------
    @classmethod
    def analytic(cls, amplitudes, rates, T: float) -> "Forcing":
        a = np.atleast_2d(np.asarray(amplitudes, dtype=complex))
        r = np.atleast_1d(np.asarray(rates, dtype=complex))
        if a.shape[0] != r.shape[0]:
            raise DomainError("one rate per amplitude row")
        return cls("analytic", float(T), amplitudes=a, rates=r)

    @classmethod
    def sampled(cls, times, coefficients, T: float | None = None) -> "Forcing":
        t = np.asarray(times, dtype=float)
        return cls("sampled", float(t[-1] if T is None else T), times=t,
                   coefficients=np.asarray(coefficients))

    @classmethod
    def raw(cls, spec: SlipStokesSpectrum, times, values, T: float | None = None) -> "Forcing":
        t = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        sol, grad, pot, res = [], [], [], 0.0
        for v in values:
            sp = helmholtz_split(GridField(v, spec.L), spec)
            sol.append(sp.p_part.coefficients)
            grad.append(sp.gradient_coefficients)
            pot.append(sp.potential_coefficients)
            res = max(res, lp_norm(sp.residual, 2) / max(lp_norm(GridField(v, spec.L), 2), 1e-300))
        return cls("raw", float(t[-1] if T is None else T), times=t,
                   coefficients=np.array(sol), raw_values=values,
                   gradient_coefficients=np.array(grad), potential_coefficients=np.array(pot),
                   split_residual=float(res), spec=spec)

    # -- evaluation -------------------------------------------------------
    def modal_at(self, t) -> np.ndarray:
        """Solenoidal modal coefficients at the times ``t`` (rows)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.kind == "analytic":
            return np.exp(np.outer(t, self.rates)) @ self.amplitudes
        return _interp_rows(self.times, self.coefficients, t)

    def scaled(self, c: float) -> "Forcing":
        def mul(x):
            return None if x is None else c * x
        return Forcing(self.kind, self.T, mul(self.amplitudes), self.rates, self.times,
                       mul(self.coefficients), mul(self.raw_values),
                       mul(self.gradient_coefficients), mul(self.potential_coefficients),
                       self.split_residual, self.spec)

    def damped(self, rate: float) -> "Forcing":
        """``e^{-rate t} f(t)``; exact for analytic forcings, sampled otherwise."""
        if self.kind == "analytic":
            return Forcing.analytic(self.amplitudes, self.rates - rate, self.T)
        w = np.exp(-rate * self.times)
        if self.kind == "sampled":
            return Forcing.sampled(self.times, w[:, None] * self.coefficients, self.T)
        return Forcing("raw", self.T, None, None, self.times, w[:, None] * self.coefficients,
                       w.reshape((-1,) + (1,) * (self.raw_values.ndim - 1)) * self.raw_values,
                       w[:, None] * self.gradient_coefficients, w[:, None] * self.potential_coefficients,
                       self.split_residual, self.spec)


def _interp_rows(tk: np.ndarray, rows: np.ndarray, t: np.ndarray) -> np.ndarray:
    idx = np.clip(np.searchsorted(tk, t, side="right") - 1, 0, len(tk) - 2)
    h = tk[idx + 1] - tk[idx]
    s = ((t - tk[idx]) / h)[:, None]
    return (1 - s) * rows[idx] + s * rows[idx + 1]


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------


def _to_eig(A, c):
    return np.asarray(c) if isinstance(A, SlipStokesSpectrum) else (A.V_inv @ np.asarray(c).T).T


def _from_eig(A, e):
    return np.asarray(e) if isinstance(A, SlipStokesSpectrum) else (A.V @ np.asarray(e).T).T


def _phi1(z):
    """(e^z - 1) / z, stable near 0."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-8
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 + z / 2, np.expm1(safe) / safe)


def _gweight(z):
    """(1 - e^{-z}(1+z)) / z^2 = int_0^1 e^{-z r} r dr, stable for small z."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 0.5
    safe = np.where(small, 1.0, z)
    direct = (1.0 - np.exp(-safe) * (1.0 + safe)) / safe**2
    series = np.zeros_like(z)
    term = np.full_like(z, 0.5)  # n = 0 coefficient 1/2!
    for n in range(18):
        series = series + term
        term = term * (-z) * (n + 2) / ((n + 1) * (n + 3))
    return np.where(small, series, direct)


def _duhamel_analytic(lam, amps_eig, rates, t):
    """u_k(t) = sum_j a_jk (e^{beta_j t} - e^{-lam_k t}) / (lam_k + beta_j)."""
    out = np.zeros((len(t), lam.shape[0]), dtype=complex)
    for a, beta in zip(amps_eig, rates):
        s = lam[None, :] + beta
        tt = t[:, None]
        st = s * tt
        big = np.abs(st) > 1.0
        decay = np.exp(-lam[None, :] * tt)
        val = np.empty(st.shape, dtype=complex)
        # the phi1 form only where |s t| <= 1; elsewhere it may overflow
        val[big] = ((np.exp(beta * tt) - decay) / np.where(big, s, 1.0))[big]
        val[~big] = (decay * tt)[~big] * _phi1(st[~big])
        out += a[None, :] * val
    return out


def _duhamel_sampled(lam, times, f_eig):
    """Exact propagation of the piecewise-linear interpolant of the samples."""
    u = np.zeros(f_eig.shape, dtype=complex)
    for i in range(len(times) - 1):
        h = times[i + 1] - times[i]
        z = lam * h
        e = np.exp(-z)
        w_all = h * _phi1(-z)  # int_0^h e^{-lam r} dr
        w_old = h * _gweight(z)  # weight of f_i
        u[i + 1] = e * u[i] + w_old * f_eig[i] + (w_all - w_old) * f_eig[i + 1]
    return u


@dataclass
class Trajectory:
    times: np.ndarray
    u: np.ndarray  # (N+1, n) modal coefficients
    du: np.ndarray
    Au: np.ndarray
    forcing_modal: np.ndarray  # P f on the grid
    scheme: str
    steps: int
    operator: object = field(repr=False)
    forcing: Forcing = field(repr=False)
    shift: float = 0.0

    @property
    def pressure_coefficients(self) -> np.ndarray | None:
        """Cosine coefficients of the pressure potential at each time (raw forcing)."""
        if self.forcing.kind != "raw":
            return None
        return _interp_rows(self.forcing.times, self.forcing.potential_coefficients, self.times)

    def ode_residual(self) -> float:
        """max_t ||u' + (shift + A) u - P f|| / max_t ||P f|| in modal l2."""
        r = self.du + self.Au + self.shift * self.u - self.forcing_modal
        ref = max(np.max(np.linalg.norm(self.forcing_modal, axis=1)), 1e-300)
        return float(np.max(np.linalg.norm(r, axis=1)) / ref)


def solve_inhomogeneous(
    A,
    f: Forcing,
    T: float | None = None,
    scheme: str = "duhamel_exact",
    steps: int = 64,
    shift: float = 0.0,
) -> Trajectory:
    """Solve ``u' + (shift I + A) u = P f``, ``u(0) = 0`` on ``[0, T]``.

    ``duhamel_exact`` is exact for analytic forcings (on a uniform grid of
    ``steps`` intervals) and for the piecewise-linear interpolant of sampled and
    raw forcings (on the forcing's own sample times).  The one-step schemes use
    a uniform grid and sample ``P f`` at its nodes.  ``u'`` is taken from the
    equation, not by differencing.
    """
    if scheme not in SCHEMES:
        raise DomainError(f"scheme must be one of {SCHEMES}")
    if steps < 8:
        raise DomainError("steps must be >= 8")
    T = f.T if T is None else float(T)
    lam = np.asarray(A.eigenvalues, dtype=complex) + shift
    if scheme == "duhamel_exact" and f.kind != "analytic":
        times = f.times[f.times <= T * (1 + 1e-12)]
    else:
        times = np.linspace(0.0, T, steps + 1)
    fm = f.modal_at(times)
    if scheme == "duhamel_exact":
        if f.kind == "analytic":
            u_eig = _duhamel_analytic(lam, _to_eig(A, f.amplitudes), f.rates, times)
        else:
            h = np.max(np.diff(times))
            if h * np.max(np.abs(lam)) > 50 and f.kind == "sampled":
                warnings.warn("forcing sampled coarsely relative to the stiffest mode",
                              QuadratureWarning, stacklevel=2)
            u_eig = _duhamel_sampled(lam, times, _to_eig(A, fm))
        u = _from_eig(A, u_eig)
    else:
        u = np.zeros(fm.shape, dtype=complex)
        for i in range(len(times) - 1):
            h = times[i + 1] - times[i]
            if scheme == "implicit_euler":
                rhs = u[i] + h * fm[i + 1]
                # (I + h(shift + A)) x = rhs  <=>  ((1/h + shift) I + A) x = rhs / h
                u[i + 1] = A.shifted_solve(1.0 / h + shift, rhs / h)
            else:
                Bu = shift * u[i] + A.apply(u[i])
                rhs = u[i] - 0.5 * h * Bu + 0.5 * h * (fm[i] + fm[i + 1])
                u[i + 1] = A.shifted_solve(2.0 / h + shift, 2.0 * rhs / h)
    Au = np.array([A.apply(r) for r in u])
    du = fm - Au - shift * u
    if not np.iscomplexobj(fm) or np.all(np.isreal(fm)):
        if np.max(np.abs(u.imag)) <= 1e-14 * max(np.max(np.abs(u)), 1e-300):
            u, Au, du = u.real, Au.real, du.real
    return Trajectory(times, u, du, Au, fm, scheme, len(times) - 1, A, f, shift)


# ---------------------------------------------------------------------------
# pressure
# ---------------------------------------------------------------------------


@dataclass
class PressureSeries:
    times: np.ndarray
    coefficients: np.ndarray  # (N+1, ng) cosine coefficients, zero mean by construction
    family: object = field(repr=False)
    L: float = math.pi
    bound_constants: np.ndarray | None = None  # per time: ||pi||_{W1p} / (||u'||_p + ||f||_p)
    p: float = 2.0

    def grid(self, i: int) -> GridField:
        return GridField(self.family.synthesize_scalar_cos(self.coefficients[i])[None], self.L)

    def gradient(self, i: int) -> GridField:
        return GridField(self.family.synthesize(_potential_to_gradient(self.family, self.coefficients[i])), self.L)


def _potential_to_gradient(fam, pot):
    kabs = np.linalg.norm(fam.ks * fam.scale, axis=1)
    nfac = np.linalg.norm(fam.amps, axis=1)
    return -pot * kabs / nfac


def _w1p(fam, pot, L, p) -> float:
    """||pi||_p + ||grad pi||_p for a zero-mean cosine series."""
    pi = GridField(fam.synthesize_scalar_cos(pot)[None], L)
    g = GridField(fam.synthesize(_potential_to_gradient(fam, pot)), L)
    return lp_norm(pi, p) + lp_norm(g, p)


def pressure_recover(f_raw: Forcing, trajectory: Trajectory, p: float = 2.0) -> PressureSeries:
    """Pressure ``pi(t) = chi(t)`` from the split ``f = P f + grad chi``.

    Also records ``||pi||_{W^{1,p}} / (||u'||_p + ||f||_p)`` at every time; its
    spread over an ensemble is the pressure-bound stability check.
    """
    spec = trajectory.operator
    if not isinstance(spec, SlipStokesSpectrum):
        raise DomainError("pressure recovery needs the box operator")
    fam = gradient_family(spec.d, spec.M, float(spec.L), spec.K)
    n = len(trajectory.times)
    if f_raw.kind != "raw":
        return PressureSeries(trajectory.times, np.zeros((n, fam.n)), fam, spec.L, np.zeros(n), p)
    pot = _interp_rows(f_raw.times, f_raw.potential_coefficients, trajectory.times)
    raw = _interp_rows(f_raw.times, f_raw.raw_values.reshape(len(f_raw.times), -1), trajectory.times)
    consts = np.zeros(n)
    for i in range(n):
        num = _w1p(fam, pot[i], spec.L, p)
        fv = GridField(raw[i].reshape(f_raw.raw_values.shape[1:]), spec.L)
        den = spec.norm(trajectory.du[i], p) + lp_norm(fv, p)
        consts[i] = num / den if den > 0 else 0.0
    return PressureSeries(trajectory.times, pot, fam, spec.L, consts, p)


def momentum_residual(f_raw: Forcing, trajectory: Trajectory, index: int | None = None) -> float:
    """``max_t ||-Lap u + grad pi + u' - f|| / max_t ||f||`` in grid L^2.

    Only sample times shared with the forcing are checked.
    """
    spec = trajectory.operator
    pr = pressure_recover(f_raw, trajectory)
    idx = range(len(trajectory.times)) if index is None else [index]
    worst, ref = 0.0, 0.0
    for i in idx:
        t = trajectory.times[i]
        j = np.flatnonzero(np.isclose(f_raw.times, t, rtol=0, atol=1e-12))
        if j.size == 0:
            continue
        fv = GridField(f_raw.raw_values[j[0]], spec.L)
        lap = spec.laplacian_grid(trajectory.u[i])
        r = (-lap) + pr.gradient(i) + spec.to_grid(trajectory.du[i]) - fv
        worst = max(worst, lp_norm(r, 2))
        ref = max(ref, lp_norm(fv, 2))
    return worst / ref if ref > 0 else worst


# ---------------------------------------------------------------------------
# ratios
# ---------------------------------------------------------------------------


def _trapezoid(y, t) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))


class _ScaleNorms:
    """Norms of solenoidal, gradient and pressure parts at a given scale."""

    def __init__(self, A, p: float, scale: str):
        if scale not in SCALES:
            raise DomainError(f"scale must be one of {SCALES}")
        self.A, self.p, self.scale = A, p, scale
        theta = {"strong": 0, "weak": 1, "very_weak": 2}[scale]
        self.theta = theta
        self.box = isinstance(A, SlipStokesSpectrum)
        if theta:
            self.sol = power_operator(A, -theta / 2.0)
        if self.box:
            self.fam = gradient_family(A.d, A.M, float(A.L), A.K)
            mu = np.sum((self.fam.ks * self.fam.scale) ** 2, axis=1)
            self.grad_w = (1.0 + mu) ** (-theta / 2.0)
            self.pi_w = (1.0 + mu) ** (-0.5)

    def solenoidal(self, c) -> float:
        c = self.sol.apply(c) if self.theta else c
        return self.A.norm(c, self.p)

    def full(self, c, b) -> float:
        """Norm of P-part ``c`` plus gradient-family part ``b``."""
        if b is None:
            return self.solenoidal(c)
        c = self.sol.apply(c) if self.theta else c
        v = self.A.to_grid(c) + GridField(self.fam.synthesize(self.grad_w * b), self.A.L)
        return lp_norm(v, self.p)

    def pressure(self, pot) -> float:
        if self.scale == "strong":
            return _w1p(self.fam, pot, self.A.L, self.p)
        w = 1.0 if self.scale == "weak" else self.pi_w
        return lp_norm(GridField(self.fam.synthesize_scalar_cos(w * pot)[None], self.A.L), self.p)


def maxreg_ratio(trajectory: Trajectory, p: float, q: float, scale: str = "strong") -> float:
    """``int (||u'||^q + ||A u||^q + ||pi||^q) dt / int ||f||^q dt`` at the chosen scale.

    Strong: L^p norms and ``W^{1,p}`` pressure.  Weak and very weak:
    ``(1 + lam)^{-1/2}`` and ``(1 + lam)^{-1}`` weights on the field modes and
    the pressure in L^p or the ``(1 + |m|^2)^{-1/2}``-weighted L^p norm.
    """
    if not (1 < p < math.inf and 1 < q < math.inf):
        raise DomainError("exponents must lie in (1, inf)")
    A, f, t = trajectory.operator, trajectory.forcing, trajectory.times
    N = _ScaleNorms(A, p, scale)
    num = np.array([N.solenoidal(a) ** q + N.solenoidal(b) ** q for a, b in zip(trajectory.du, trajectory.Au)])
    if f.kind == "raw":
        pot = trajectory.pressure_coefficients
        grad = _interp_rows(f.times, f.gradient_coefficients, t)
        num = num + np.array([N.pressure(x) ** q for x in pot])
        den = np.array([N.full(c, b) ** q for c, b in zip(trajectory.forcing_modal, grad)])
    else:
        den = np.array([N.solenoidal(c) ** q for c in trajectory.forcing_modal])
    D = _trapezoid(den, t)
    if D <= 0:
        raise DomainError("zero forcing: ratio undefined")
    return _trapezoid(num, t) / D


def energy_inequality(trajectory: Trajectory) -> tuple[float, float]:
    """(int ||A u||_2^2 dt, int ||P f||_2^2 dt) by the trajectory quadrature."""
    A, t = trajectory.operator, trajectory.times
    au = np.array([A.norm(a, 2.0) ** 2 for a in trajectory.Au])
    pf = np.array([A.norm(c, 2.0) ** 2 for c in trajectory.forcing_modal])
    return _trapezoid(au, t), _trapezoid(pf, t)


def mu_shift_check(A, f: Forcing, mu: float, T: float | None = None, steps: int = 64,
                   scheme: str = "duhamel_exact") -> float:
    """Compare the shifted solve ``v' + (mu^-2 + A) v = e^{-t/mu^2} f`` with
    ``e^{-t/mu^2} u(t)``; returns the max-over-grid relative difference."""
    if not mu > 0:
        raise DomainError("mu must be positive")
    s = mu**-2.0
    u = solve_inhomogeneous(A, f, T, scheme, steps)
    v = solve_inhomogeneous(A, f.damped(s), T, scheme, steps, shift=s)
    w = np.exp(-s * u.times)[:, None] * u.u
    ref = max(float(np.max(np.linalg.norm(w, axis=1))), 1e-300)
    return float(np.max(np.linalg.norm(v.u - w, axis=1)) / ref)


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnsembleSpec:
    count: int = 50
    seed: int = 0
    law: str = "ar1"  # modal AR(1) sequences
    correlation: float = 0.5
    weight_exponent: float = 0.25
    raw_fraction: float = 0.5  # share of members with an added gradient part

    def __post_init__(self):
        if self.count < 50:
            raise DomainError("ensemble count must be >= 50")
        if self.law != "ar1":
            raise DomainError("only the 'ar1' forcing law is implemented")


def _ar1(rng, steps: int, n: int, rho: float) -> np.ndarray:
    x = np.empty((steps + 1, n))
    x[0] = rng.standard_normal(n)
    s = math.sqrt(1 - rho**2)
    for i in range(steps):
        x[i + 1] = rho * x[i] + s * rng.standard_normal(n)
    return x


def random_forcing(spec: SlipStokesSpectrum, ens: EnsembleSpec, T: float, steps: int,
                   seed, raw: bool) -> Forcing:
    """One ensemble member: AR(1) modal sequences with weights ``lam^{-w}``; raw
    members also carry a gradient part with the same law."""
    rng = np.random.default_rng(seed)
    times = np.linspace(0.0, T, steps + 1)
    coeffs = _ar1(rng, steps, spec.n_modes, ens.correlation) * spec.eigenvalues ** (-ens.weight_exponent)
    if not raw:
        return Forcing.sampled(times, coeffs, T)
    fam = gradient_family(spec.d, spec.M, float(spec.L), spec.K)
    mu = np.sum((fam.ks * fam.scale) ** 2, axis=1)
    b = _ar1(rng, steps, fam.n, ens.correlation) * mu ** (-ens.weight_exponent)
    values = np.array([spec.to_grid(c).values + fam.synthesize(g) for c, g in zip(coeffs, b)])
    return Forcing.raw(spec, times, values, T)


@dataclass
class MaxRegReport:
    p: float
    q: float
    T: float
    scale: str
    scheme: str
    rows: list = field(default_factory=list)  # dicts: resolution, member, seed, raw, ratio, ...
    ensemble_max: dict = field(default_factory=dict)  # "K,M,steps" -> max ratio
    drift_flags: list = field(default_factory=list)
    energy_ok: bool = True
    pressure_spread: dict = field(default_factory=dict)  # "K,M,steps" -> max/median of pressure constants

    def summary(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "T": self.T,
            "scale": self.scale,
            "scheme": self.scheme,
            "ensemble_max": self.ensemble_max,
            "drift_flags": self.drift_flags,
            "energy_ok": self.energy_ok,
            "pressure_spread": self.pressure_spread,
            "n_rows": len(self.rows),
        }

    def to_json(self) -> str:
        return json.dumps({"summary": self.summary(), "rows": self.rows}, indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["resolution", "member", "seed", "raw", "p", "q", "T", "scale", "ratio"])
        for r in self.rows:
            w.writerow([r["resolution"], r["member"], r["seed"], int(r["raw"]), self.p, self.q,
                        self.T, self.scale, repr(r["ratio"])])
        return buf.getvalue()


def _member_seeds(seed: int, count: int) -> list[int]:
    ss = np.random.SeedSequence(seed)
    return [int(c.generate_state(1)[0]) for c in ss.spawn(count)]


def ensemble_report(
    d: int,
    ens: EnsembleSpec,
    p: float,
    q: float,
    T: float,
    scheme: str = "duhamel_exact",
    resolutions=((4, 10, 64),),
    scale: str = "strong",
    L: float = math.pi,
    map_fn=map,
) -> MaxRegReport:
    """Ratios over a random forcing ensemble at each ``(K, M, steps)``.

    Flags any ensemble maximum that grows by more than x2 between consecutive
    resolutions.  ``map_fn`` may be an ordered parallel map.
    """
    rep = MaxRegReport(p, q, T, scale, scheme)
    seeds = _member_seeds(ens.seed, ens.count)
    n_raw = int(round(ens.raw_fraction * ens.count))
    prev = None
    for K, M, steps in resolutions:
        spec = build_box_stokes(d, K, M, L)
        key = f"{K},{M},{steps}"

        def run(i, spec=spec, steps=steps):
            raw = i < n_raw
            f = random_forcing(spec, ens, T, steps, seeds[i], raw)
            tr = solve_inhomogeneous(spec, f, T, scheme, steps)
            au, pf = energy_inequality(tr)
            pc = float(np.max(pressure_recover(f, tr, p).bound_constants)) if raw else None
            return i, raw, maxreg_ratio(tr, p, q, scale), au <= pf, pc

        results = list(map_fn(run, range(ens.count)))
        ratios, pcs = [], []
        for i, raw, r, ok, pc in results:
            rep.rows.append({"resolution": key, "member": i, "seed": seeds[i], "raw": raw, "ratio": r})
            ratios.append(r)
            rep.energy_ok &= bool(ok)
            if pc is not None:
                pcs.append(pc)
        rep.ensemble_max[key] = float(max(ratios))
        if pcs:
            rep.pressure_spread[key] = float(max(pcs) / np.median(pcs))
        if prev is not None and rep.ensemble_max[key] > 2 * prev:
            rep.drift_flags.append(key)
        prev = rep.ensemble_max[key]
    return rep

"""The analytic semigroup ``e^{-tA}`` and its smoothing/decay rates."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .funcalc import _unwrap
from .operator_core import DomainError, ModalField, SlipStokesSpectrum, strain_norm

QUANTITIES = ("lp", "strain", "dt", "dtA")
_POPULATED = 1e-14


class NarrowbandWarning(RuntimeWarning):
    """Initial datum populates too few modes for a meaningful rate."""


def evolve(A, u0, t: float):
    """``e^{-tA} u0`` through the eigen-factorisation."""
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    c, wrap = _unwrap(A, u0)
    return wrap(A.multiplier_apply(lambda lam: np.exp(-t * lam), c))


def time_derivative(A, u0, t: float, m: int = 1, n: int = 0):
    """``d^m/dt^m A^n e^{-tA} u0`` as the multiplier ``(-lam)^m lam^n e^{-t lam}``."""
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    c, wrap = _unwrap(A, u0)
    return wrap(A.multiplier_apply(lambda lam: (-lam) ** m * lam**n * np.exp(-t * lam), c))


def _eigen_coefficients(A, c) -> np.ndarray:
    if isinstance(A, SlipStokesSpectrum):
        return np.asarray(c)
    return A.V_inv @ np.asarray(c)


def populated_eigenvalues(A, u0) -> np.ndarray:
    c, _ = _unwrap(A, u0)
    e = np.abs(_eigen_coefficients(A, c))
    return np.asarray(A.eigenvalues)[e > _POPULATED * e.max()]


def broadband_initial(spec: SlipStokesSpectrum, beta: float | None = None, x0=None, direction=None) -> ModalField:
    """Field concentrated near ``x0`` with modal weights ``lam^{-beta}``.

    Coefficients are ``lam_k^{-beta} <phi_k(x0), e>``, i.e. a smoothed point
    load in direction ``e``.  Phases align at ``x0`` so that every L^q norm
    follows the worst-case scaling; the default ``beta = d/4 + 0.02`` keeps the
    L^2 norm finite but barely.
    """
    d = spec.d
    beta = d / 4 + 0.02 if beta is None else beta
    x0 = np.array([0.37, 0.71, 0.53][:d]) * spec.L if x0 is None else np.asarray(x0, float)
    e = np.ones(d) / math.sqrt(d) if direction is None else np.asarray(direction, float)
    kk = spec.wavevectors * (math.pi / spec.L)
    phi = np.empty((spec.n_modes, d))
    for c in range(d):
        trig = [np.sin(kk[:, j] * x0[j]) if j == c else np.cos(kk[:, j] * x0[j]) for j in range(d)]
        phi[:, c] = spec.amplitudes[:, c] * np.prod(trig, axis=0)
    return ModalField(spec.eigenvalues ** (-beta) * (phi @ e), spec)


def rate_window(A, u0=None, n: int = 9) -> np.ndarray:
    """Log grid on ``[10/lam_max, 1/(10 lam_min)]`` (populated nonzero modes)."""
    lam = np.asarray(A.eigenvalues).real if u0 is None else populated_eigenvalues(A, u0).real
    lam = lam[lam > 0]
    lo, hi = 10.0 / lam.max(), 1.0 / (10.0 * lam.min())
    if hi <= lo:
        raise DomainError("spectrum too narrow for a pre-asymptotic window")
    return np.geomspace(lo, hi, n)


@dataclass
class RateFit:
    quantity: str
    t: np.ndarray
    values: np.ndarray
    slope: float
    delta: float
    residual: float
    p: float = 2.0
    q: float = 2.0

    def rows(self):
        return [(float(a), float(b)) for a, b in zip(self.t, self.values)]

    def summary(self) -> dict:
        return {
            "quantity": self.quantity,
            "p": self.p,
            "q": self.q,
            "slope": self.slope,
            "delta": self.delta,
            "residual": self.residual,
            "t_min": float(self.t[0]),
            "t_max": float(self.t[-1]),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "value"])
        for a, b in self.rows():
            w.writerow([repr(a), repr(b)])
        return buf.getvalue()


def _quantity(A, c, quantity: str, q: float, m: int, n: int) -> float:
    if quantity == "lp":
        return A.norm(c, q)
    if quantity == "strain":
        if not isinstance(A, SlipStokesSpectrum):
            raise DomainError("strain needs the box operator")
        return strain_norm(ModalField(c, A), q, A)
    if quantity == "dt":
        return A.norm(A.multiplier_apply(lambda lam: -lam, c), q)
    return A.norm(A.multiplier_apply(lambda lam: (-lam) ** m * lam**n, c), q)


def smoothing_rate(
    A,
    u0,
    quantity: str,
    p: float = 2.0,
    q: float | None = None,
    t_grid=None,
    m: int = 1,
    n: int = 0,
) -> RateFit:
    """Fit ``log(e^{delta t} Q(t) / ||u0||_p)`` against ``log t``.

    ``Q`` is ``||u(t)||_q`` (``lp``), ``||D(u(t))||_q`` (``strain``),
    ``||u'(t)||_q`` (``dt``) or ``||d^m/dt^m A^n u(t)||_q`` (``dtA``); q defaults
    to p.  ``delta`` is the smallest populated eigenvalue.
    """
    if quantity not in QUANTITIES:
        raise DomainError(f"quantity must be one of {QUANTITIES}")
    q = p if q is None else q
    c0, _ = _unwrap(A, u0)
    lam_pop = populated_eigenvalues(A, c0)
    if lam_pop.size < 20:
        warnings.warn(
            f"initial datum populates only {lam_pop.size} modes; the rate will plateau",
            NarrowbandWarning,
            stacklevel=2,
        )
    t = rate_window(A, c0) if t_grid is None else np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t) <= 0) or t[0] <= 0:
        raise DomainError("t grid must be positive and strictly increasing")
    if np.log10(t[-1] / t[0]) < 2 - 1e-12:
        raise DomainError("t grid must span at least two decades")
    delta = float(np.min(lam_pop.real))
    n0 = A.norm(c0, p)
    vals = np.array(
        [
            _quantity(A, A.multiplier_apply(lambda lam, s=s: np.exp(-s * lam), c0), quantity, q, m, n)
            / n0
            for s in t
        ]
    )
    y = np.log(vals) + delta * t
    coef, res, *_ = np.polyfit(np.log(t), y, 1, full=True)
    resid = float(np.sqrt(res[0] / len(t))) if len(res) else 0.0
    return RateFit(quantity, t, vals, float(coef[0]), delta, resid, p, q)


def decay_rate(A, u0, window=None, n: int = 12) -> float:
    """Exponential decay rate of ``||u(t)||_2`` fitted on ``window = (t0, t1)``.

    The default window is ``[3, 10] / lam_min`` over the populated nonzero modes.
    A populated kernel component gives rate 0.
    """
    c0, _ = _unwrap(A, u0)
    lam = populated_eigenvalues(A, c0).real
    nz = lam[lam > 0]
    if nz.size < lam.size or nz.size == 0:
        # a populated kernel component never decays
        return 0.0
    lmin = float(nz.min())
    t0, t1 = (3.0 / lmin, 10.0 / lmin) if window is None else window
    if t0 * lmin < 3 - 1e-12 or t1 <= t0:
        raise DomainError("decay window must satisfy t * lam_min >= 3")
    t = np.linspace(t0, t1, n)
    vals = np.array([A.norm(A.multiplier_apply(lambda l, s=s: np.exp(-s * l), c0), 2.0) for s in t])
    slope = np.polyfit(t, np.log(vals), 1)[0]
    rate = -float(slope)
    return 0.0 if abs(rate) < 1e-8 else rate

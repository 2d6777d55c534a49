"""Sector contour and quadrature for Dunford integrals.

With ``B = I + A`` and ``-1 < Re z < 0``,

    B^z f = (1/2 pi i) oint w^z (w - B)^{-1} f dw,

taken around spec(B) along the rays ``arg w = +-theta0`` (``w = -lambda`` for
the resolvent variable of ``(lambda I + I + A)^{-1}``).  Each ray is
parametrised by the log-radius ``u`` (``rho = e^u``).

The finite piece ``u_min <= u <= u_max`` is integrated with the tanh-sinh rule,
which needs no decay at the interval ends.  The two tails are summed in closed
form from the Neumann series of the resolvent, in powers of ``B^{-1}`` near
``rho = 0`` and of ``B`` near infinity, so nothing is discarded.  Without them
the inner tail decays like ``rho^{1 + Re z}``, hopeless as ``Re z -> -1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .operator_core import DomainError, SpectrumError

_DIGIT_PAD = 8.4  # discretisation digits beyond -ln(tol); 36 at tol = 1e-12
_MAX_NODES = 6000
_T_MAX = 3.3  # tanh-sinh weights fall below 1e-40 beyond this
_TAIL_EPS = 1e-17
_MAX_TAIL_TERMS = 60


@dataclass(frozen=True)
class ContourSettings:
    """User overrides resolved per operator and exponent by :meth:`build`."""

    theta0: float | None = None
    node_count: int | None = None
    tol: float = 1e-12
    scheme: str = "de"

    def build(self, shifted_eigs, z: complex) -> "DunfordContour":
        return DunfordContour.for_spectrum(shifted_eigs, z, self.theta0, self.node_count, self.tol, self.scheme)


class TruncationWarning(RuntimeWarning):
    """The tail series converge too slowly for the requested accuracy."""


def _tail_terms(ratio: float) -> int:
    if ratio <= 0.0:
        return 1
    if ratio >= 1.0:
        return _MAX_TAIL_TERMS
    return min(_MAX_TAIL_TERMS, int(math.ceil(math.log(_TAIL_EPS) / math.log(ratio))))


@dataclass(frozen=True)
class DunfordContour:
    theta0: float
    node_count: int = 200
    u_min: float = -40.0
    u_max: float = 40.0
    scheme: str = "de"

    def __post_init__(self):
        if not 0.0 < self.theta0 < math.pi / 2:
            raise DomainError(f"theta0 must lie in (0, pi/2), got {self.theta0}")
        if self.node_count < 16:
            raise DomainError("node_count must be >= 16")
        if not self.u_min < self.u_max:
            raise DomainError("need u_min < u_max")
        if self.scheme != "de":
            raise DomainError(f"unknown quadrature scheme {self.scheme!r}")

    @classmethod
    def for_spectrum(
        cls,
        shifted_eigs,
        z: complex,
        theta0: float | None = None,
        node_count: int | None = None,
        tol: float = 1e-12,
        scheme: str = "de",
    ) -> "DunfordContour":
        """Contour adapted to spec(I + A) = ``shifted_eigs`` and exponent ``z``.

        The interval ends sit at ``1e-8 |b|_min`` and ``1e4 |b|_max``.  The node
        count, when not given, comes from the analyticity strip of the
        integrand in the log-radius variable and the target ``tol``.
        """
        b = np.atleast_1d(np.asarray(shifted_eigs, dtype=complex))
        z = complex(z)
        if not -1.0 < z.real < 0.0:
            raise DomainError(f"Re z must lie in (-1, 0), got {z.real}")
        if not 0.0 < tol < 1.0:
            raise DomainError("tol must lie in (0, 1)")
        psi = float(np.max(np.abs(np.angle(b))))
        if theta0 is None:
            theta0 = math.pi / 2 - 0.05 if psi < math.pi / 2 - 0.1 else 0.5 * (psi + math.pi / 2)
            # |w^z| ~ exp(|Im z| theta0) on the upper ray costs digits to rounding;
            # tilt the rays toward the spectrum when Im z is large
            if z.imag != 0.0:
                theta0 = min(theta0, max(psi + 0.5 * (theta0 - psi), 5.0 / abs(z.imag)))
        bmin, bmax = float(np.min(np.abs(b))), float(np.max(np.abs(b)))
        u_min = math.log(1e-8 * bmin)
        u_max = math.log(1e4 * bmax)
        if node_count is None:
            strip = min(theta0 - psi, math.pi - theta0)
            if strip <= 0:
                raise SpectrumError("spectrum of I + A is not enclosed by the contour")
            # |w^z| swings by exp(|Im z| arg w) across the strip; buy those digits back
            digits = -math.log(tol) + _DIGIT_PAD + abs(z.imag) * (theta0 + strip)
            half = 0.5 * (u_max - u_min)
            # the map u = c + H tanh(pi/2 sinh t) has slope H pi/2 at t = 0
            h = 2 * math.pi * (strip / (half * math.pi / 2)) / digits
            node_count = int(math.ceil(2 * _T_MAX / h)) + 1
            node_count = min(max(node_count, 200), _MAX_NODES)
        return cls(theta0, node_count, u_min, u_max, scheme)

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Log-radius nodes u_j and weights (du) for one branch."""
        t, h = np.linspace(-_T_MAX, _T_MAX, self.node_count, retstep=True)
        c = 0.5 * (self.u_min + self.u_max)
        H = 0.5 * (self.u_max - self.u_min)
        arg = 0.5 * math.pi * np.sinh(t)
        u = c + H * np.tanh(arg)
        w = h * H * 0.5 * math.pi * np.cosh(t) / np.cosh(arg) ** 2
        return u, w

    def points(self):
        """(w, coefficient) pairs such that the finite piece of B^z f is
        sum coef * w^z (w - B)^{-1} f / (2 pi i)."""
        u, du = self.nodes()
        rho = np.exp(u)
        out = []
        for sgn in (1, -1):
            w = rho * np.exp(1j * sgn * self.theta0)
            # upper ray traversed inwards, lower ray outwards
            out.append((w, -sgn * w * du))
        return out

    def tail_ratios(self, shifted_eigs) -> tuple[float, float]:
        """Convergence ratios of the inner and outer Neumann series."""
        b = np.atleast_1d(np.asarray(shifted_eigs, dtype=complex))
        bmin, bmax = float(np.min(np.abs(b))), float(np.max(np.abs(b)))
        return math.exp(self.u_min) / bmin, bmax / math.exp(self.u_max)

    def check_spectrum(self, shifted_eigs):
        b = np.atleast_1d(np.asarray(shifted_eigs, dtype=complex))
        if np.max(np.abs(np.angle(b))) >= self.theta0:
            raise SpectrumError("spectrum of I + A is not enclosed by the contour")
        inner, outer = self.tail_ratios(b)
        if inner >= 1.0 or outer >= 1.0:
            raise DomainError("contour interval does not bracket the spectrum")

    def truncation_bound(self, shifted_eigs, z: complex) -> float:
        """Size of the first neglected tail-series terms, relative to the leading ones."""
        inner, outer = self.tail_ratios(shifted_eigs)
        ni, no = _tail_terms(inner), _tail_terms(outer)
        return inner**ni + outer**no


def _tail_sum(A, z: complex, f, contour: DunfordContour, shifted) -> np.ndarray:
    """Closed-form contributions of rho < e^{u_min} and rho > e^{u_max}."""
    th = contour.theta0
    inner, outer = contour.tail_ratios(shifted)
    acc = np.zeros(f.shape, dtype=complex)
    # near 0: (w - B)^{-1} = -sum w^n B^{-(n+1)}
    g = np.array(f, dtype=complex)
    for n in range(_tail_terms(inner)):
        g = A.shifted_solve(1.0, g)
        a = z + n + 1
        acc += np.exp(a * contour.u_min) * np.sin(th * a) / a * g
    # near infinity: (w - B)^{-1} = sum B^n w^{-(n+1)}
    g = np.array(f, dtype=complex)
    for n in range(_tail_terms(outer)):
        if n:
            g = g + A.apply(g)
        b = z - n
        acc += np.exp(b * contour.u_max) * np.sin(th * b) / b * g
    return acc / math.pi


def dunford_apply(A, z: complex, f, contour: DunfordContour, warn_tol: float = 1e-8):
    """Quadrature of (I + A)^z f for -1 < Re z < 0 through shifted resolvent solves."""
    z = complex(z)
    shifted = 1.0 + np.asarray(A.eigenvalues, dtype=complex)
    contour.check_spectrum(shifted)
    bound = contour.truncation_bound(shifted, z)
    if bound > warn_tol:
        warnings.warn(
            f"contour tail series may leave an error of {bound:.2e} for z={z}",
            TruncationWarning,
            stacklevel=3,
        )
    f = np.asarray(f)
    acc = np.zeros(f.shape, dtype=complex)
    u, _ = contour.nodes()
    for sgn, (w, coef) in zip((1, -1), contour.points()):
        wz = np.exp(z * (u + 1j * sgn * contour.theta0))
        for wj, cj in zip(w, coef * wz):
            # (w - B)^{-1} = -((1 - w) I + A)^{-1}
            acc -= cj * A.shifted_solve(1.0 - wj, f)
    return acc / (2j * math.pi) + _tail_sum(A, z, f, contour, shifted)

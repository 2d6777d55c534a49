"""Complex, imaginary and fractional powers of ``I + A`` and the checks built on them.

All powers go through the contour quadrature of :mod:`slipstokes.contour` once the
exponent is reduced to ``-1 < Re z < 0``; integer parts are applied exactly with
``I + A`` or its inverse.  Fields may be passed as :class:`ModalField`,
:class:`GridField` (box operators only) or raw coefficient arrays; results come
back in the same form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contour import ContourSettings, DunfordContour, dunford_apply
from .operator_core import (
    DomainError,
    GeneralSectorialOperator,
    GridField,
    GridMismatchError,
    ModalField,
    SlipStokesSpectrum,
    build_box_stokes,
    lp_norm,
    strain_norm,
    to_modal,
)
from .pnorm import DenseMap, DiagonalMap, EuclideanSpace, operator_pnorm_estimate


class KernelError(DomainError):
    """Unshifted power of an operator with a nontrivial kernel."""


# -- field plumbing ----------------------------------------------------------


def _unwrap(A, f):
    """Coefficient array of f plus a function rebuilding the caller's type."""
    if isinstance(f, ModalField):
        return np.asarray(f.coefficients), f.with_coefficients
    if isinstance(f, GridField):
        if not isinstance(A, SlipStokesSpectrum):
            raise DomainError("grid fields require a box operator")
        modal, _ = to_modal(f, A)
        return modal.coefficients, A.to_grid
    return np.asarray(f), lambda c: c


def _space(A):
    return A if isinstance(A, SlipStokesSpectrum) else EuclideanSpace(A.dim)


def _norm(A, c, p: float) -> float:
    return A.norm(c, p)


# -- powers ------------------------------------------------------------------


def _contour_for(A, z, contour) -> DunfordContour:
    if isinstance(contour, DunfordContour):
        return contour
    settings = contour if isinstance(contour, ContourSettings) else ContourSettings()
    return settings.build(1.0 + np.asarray(A.eigenvalues, dtype=complex), z)


def contour_power(A, z: complex, f, contour: DunfordContour | None = None):
    """``(I + A)^z f`` by Dunford quadrature; requires ``-1 < Re z < 0``."""
    z = complex(z)
    if not -1.0 < z.real < 0.0:
        raise DomainError(f"contour_power needs -1 < Re z < 0, got z={z}")
    c, wrap = _unwrap(A, f)
    out = dunford_apply(A, z, c.astype(complex), _contour_for(A, z, contour))
    return wrap(out)


def _split_exponent(z: complex) -> tuple[int, list[complex]]:
    """z = m + sum(parts) with every part in -3/4 <= Re <= -1/4."""
    re, im = z.real, z.imag
    if im == 0.0 and re == math.floor(re):
        return int(re), []
    n = round(re)
    r = re - n
    if abs(r) < 0.25:
        # near-integer real part: (I+A)^{n+r+is} = (I+A)^{n+1} (I+A)^{-1/2} (I+A)^{r-1/2+is}
        return n + 1, [-0.5, complex(r - 0.5, im)]
    m = math.floor(re) + 1
    return m, [complex(re - m, im)]


def _integer_power(A, m: int, c):
    for _ in range(abs(m)):
        c = c + A.apply(c) if m > 0 else A.shifted_solve(1.0, c)
    return c


def _power_coeffs(A, z: complex, c, contour):
    m, parts = _split_exponent(complex(z))
    out = np.array(c, dtype=complex)
    for zeta in parts:
        out = dunford_apply(A, zeta, out, _contour_for(A, zeta, contour))
    return _integer_power(A, m, out)


def complex_power(A, z: complex, f, contour: DunfordContour | None = None):
    """``(I + A)^z f`` for arbitrary complex z via exponent factorisation."""
    if getattr(A, "has_kernel", False):
        raise KernelError(
            "operator has a nontrivial kernel (rotation-type zero mode); "
            "unshifted powers are excluded, use shifted_imaginary_power with lambda > 0"
        )
    c, wrap = _unwrap(A, f)
    return wrap(_power_coeffs(A, z, c, contour))


def shifted_imaginary_power(A, lam: float, s: float, f, contour: DunfordContour | None = None):
    """``(lam I + A)^{is} f = lam^{is} (I + A/lam)^{is} f`` for ``lam > 0``."""
    if not lam > 0:
        raise DomainError(f"shift lambda must be positive, got {lam}")
    c, wrap = _unwrap(A, f)
    B = A.scaled(1.0 / lam)
    phase = np.exp(1j * s * math.log(lam))
    return wrap(phase * _power_coeffs(B, complex(0.0, s), c, contour))


def power_operator(A, z: complex, lam_shift: float = 0.0, contour=None):
    """The map ``c -> (I + A)^z c`` (or ``(lam I + A)^z`` for lam > 0) as an explicit
    diagonal or dense matrix, computed once through the contour calculus."""
    if lam_shift > 0:
        B, pre = A.scaled(1.0 / lam_shift), np.exp(complex(z) * math.log(lam_shift))
    else:
        if getattr(A, "has_kernel", False):
            raise KernelError("zero-mode operator needs lam_shift > 0")
        B, pre = A, 1.0
    if isinstance(A, SlipStokesSpectrum):
        return DiagonalMap(pre * _power_coeffs(B, z, np.ones(A.n_modes, dtype=complex), contour))
    return DenseMap(pre * _power_coeffs(B, z, np.eye(A.dim, dtype=complex), contour))


# -- scaling -----------------------------------------------------------------


def dilate(f: GridField, mu: float) -> GridField:
    """``(S_mu f)(x) = f(x / mu)``: same samples on the box of side ``mu L``."""
    if not mu > 0:
        raise DomainError("dilation factor must be positive")
    return GridField(f.values, f.L * mu)


def scaling_conjugation_residual(
    spec: SlipStokesSpectrum, mu: float, z: complex, f, contour=None, p: float = 2.0
) -> float:
    """Relative gap between ``(I + mu^2 A_mu)^z f`` and ``S_mu (I + A)^z S_mu^{-1} f``.

    ``A_mu`` is the operator on the dilated box ``(0, mu L)^d``; ``f`` is a grid
    field on that box (or base-box data, which is dilated first).
    """
    if not mu >= 1:
        raise DomainError("mu must be >= 1")
    if isinstance(f, (ModalField, np.ndarray)):
        f = dilate(spec.to_grid(f), mu)
    if f.M != spec.M or f.d != spec.d or not math.isclose(f.L, mu * spec.L, rel_tol=1e-12):
        raise GridMismatchError("field does not live on the mu-dilated grid of spec")
    spec_mu = build_box_stokes(spec.d, spec.K, spec.M, mu * spec.L)
    modal, _ = to_modal(f, spec_mu)
    direct = spec_mu.to_grid(
        spec_mu.multiplier_apply(lambda lam: (1.0 + mu**2 * lam) ** complex(z), modal.coefficients)
    )
    back = GridField(f.values, spec.L)
    conj = dilate(complex_power(spec, z, back, contour), mu)
    ref = lp_norm(direct, p)
    return lp_norm(direct - conj, p) / ref if ref > 0 else lp_norm(conj, p)


# -- imaginary-power growth --------------------------------------------------


@dataclass
class PowerBoundFit:
    p: float
    s_grid: np.ndarray
    norms: np.ndarray
    M: float
    theta_eff: float
    residual: float
    lam_shift: float = 0.0
    trials: int = 10
    asymmetry: float = 0.0
    extra: dict = field(default_factory=dict)

    def rows(self):
        return [(float(s), float(n)) for s, n in zip(self.s_grid, self.norms)]

    def summary(self) -> dict:
        return {
            "p": self.p,
            "lam_shift": self.lam_shift,
            "M": self.M,
            "theta_eff": self.theta_eff,
            "residual": self.residual,
            "asymmetry": self.asymmetry,
            "trials": self.trials,
            "n_points": int(len(self.s_grid)),
        }


def _envelope(abs_s: np.ndarray, logn: np.ndarray) -> tuple[float, float, float]:
    """Least-squares slope of log-norm against |s|, intercept lifted to an envelope."""
    if np.ptp(abs_s) == 0:
        return float(np.exp(logn.max())), 0.0, 0.0
    slope, icpt = np.polyfit(abs_s, logn, 1)
    slope = max(float(slope), 0.0)
    resid = logn - (icpt + slope * abs_s)
    logM = float(np.max(logn - slope * abs_s))
    return math.exp(logM), slope, float(np.sqrt(np.mean(resid**2)))


def fit_power_bound(
    A,
    lam_shift: float,
    p: float,
    s_grid,
    budget: int = 10,
    seed: int = 0,
    contour=None,
) -> PowerBoundFit:
    """Measure ``||(I+A)^{is}||_p`` (``lam_shift = 0``) or ``||(lam I + A)^{is}||_p``
    over ``s_grid`` and fit ``log ||.|| <= log M + theta_eff |s|``."""
    s_grid = np.asarray(s_grid, dtype=float)
    if not np.allclose(np.sort(s_grid), np.sort(-s_grid)):
        raise DomainError("s_grid must be symmetric about 0")
    if s_grid.max() < 8:
        raise DomainError("s_grid must span at least [-8, 8]")
    if lam_shift < 0:
        raise DomainError("lam_shift must be >= 0")
    if lam_shift == 0 and getattr(A, "has_kernel", False):
        raise KernelError("zero-mode operator needs lam_shift > 0")
    space = _space(A)
    norms = np.array(
        [
            operator_pnorm_estimate(
                power_operator(A, complex(0.0, s), lam_shift, contour), p, budget, seed, space
            )
            for s in s_grid
        ]
    )
    logn = np.log(norms)
    M, theta, resid = _envelope(np.abs(s_grid), logn)
    pos, neg = s_grid > 0, s_grid < 0
    asym = 0.0
    if pos.any() and neg.any():
        _, tp, _ = _envelope(s_grid[pos], logn[pos])
        _, tn, _ = _envelope(-s_grid[neg], logn[neg])
        asym = abs(tp - tn) / max(tp, tn) if max(tp, tn) > 0 else 0.0
    return PowerBoundFit(p, s_grid, norms, M, theta, resid, lam_shift, budget, asym)


def group_property_residual(A, s: float, t: float, f, p: float = 2.0, contour=None) -> float:
    """Relative p-norm of ``(I+A)^{is}(I+A)^{it} f - (I+A)^{i(s+t)} f``."""
    c, _ = _unwrap(A, f)
    lhs = complex_power(A, complex(0, s), complex_power(A, complex(0, t), c, contour), contour)
    rhs = complex_power(A, complex(0, s + t), c, contour)
    ref = _norm(A, rhs, p)
    return _norm(A, lhs - rhs, p) / ref


# -- fractional-power domains ------------------------------------------------


def sqrt_domain_ratio(A: SlipStokesSpectrum, ensemble, p: float, contour=None) -> tuple[float, float]:
    """Min and max of ``||(I+A)^{1/2} u||_p / (||u||_p + ||D(u)||_p)`` over the ensemble."""
    ensemble = list(ensemble)
    if not ensemble:
        raise DomainError("ensemble must be nonempty")
    ratios = []
    for u in ensemble:
        c, _ = _unwrap(A, u)
        num = A.norm(complex_power(A, 0.5, c, contour), p)
        den = A.norm(c, p) + strain_norm(ModalField(c, A), p, A)
        ratios.append(num / den)
    return float(min(ratios)), float(max(ratios))


def embedding_exponent(p: float, alpha: float, d: int = 3) -> float:
    """Target exponent q with ``1/q = 1/p - 2 alpha / d``."""
    if not 0 < alpha < d / (2 * p):
        raise DomainError(f"alpha must lie in (0, {d / (2 * p)})")
    return 1.0 / (1.0 / p - 2.0 * alpha / d)


def sobolev_embedding_constant(A: SlipStokesSpectrum, alpha: float, p: float, ensemble, contour=None) -> float:
    """Max over the ensemble of ``||u||_q / ||(I+A)^alpha u||_p``."""
    if A.d != 3:
        raise DomainError("embedding check is defined for d = 3")
    q = embedding_exponent(p, alpha, 3)
    best = 0.0
    for u in ensemble:
        c, _ = _unwrap(A, u)
        best = max(best, A.norm(c, q) / A.norm(complex_power(A, alpha, c, contour), p))
    return best


def negative_norm(f, order: int, p: float, A, contour=None) -> float:
    """``||(I+A)^{-order/2} f||_p``, the weighted stand-in for the dual scales."""
    if order not in (1, 2):
        raise DomainError("order must be 1 or 2")
    c, _ = _unwrap(A, f)
    return A.norm(complex_power(A, -order / 2.0, c, contour), p)


__all__ = [
    "KernelError",
    "PowerBoundFit",
    "complex_power",
    "contour_power",
    "dilate",
    "embedding_exponent",
    "fit_power_bound",
    "group_property_residual",
    "negative_norm",
    "operator_pnorm_estimate",
    "power_operator",
    "scaling_conjugation_residual",
    "shifted_imaginary_power",
    "sobolev_embedding_constant",
    "sqrt_domain_ratio",
]

"""Slip-wall Stokes operator on a box, synthetic sectorial matrices, fields and norms.

On the box ``(0, L)^d`` with flat walls, the Navier-slip Stokes operator is
diagonalised by trigonometric modes

    u_c(x) = a_c sin(k_c x_c) prod_{j != c} cos(k_j x_j),   a . k = 0,

(wave numbers scaled by ``pi / L``).  Everything here works on the
cell-centred collocation grid ``x_j = (j + 1/2) L / M``, where products of
these sines and cosines with wave numbers below ``M`` are exactly orthogonal
under midpoint quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Sequence

import numpy as np
import scipy.linalg


class ResolutionError(ValueError):
    """Grid too coarse for the requested modes."""


class DomainError(ValueError):
    """Argument outside the admissible range."""


class GridMismatchError(ValueError):
    """Two objects live on different grids or boxes."""


class SpectrumError(ValueError):
    """Spectral condition violated (bad eigenvalues, singular shift, ...)."""


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridField:
    """Vector (or scalar, ``ncomp == 1``) samples on the cell-centred grid.

    ``values`` has shape ``(ncomp, M, ..., M)`` with ``d`` spatial axes.
    """

    values: np.ndarray
    L: float = math.pi

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim < 2:
            raise ValueError("values must have shape (ncomp, M, ..., M)")
        if len(set(v.shape[1:])) != 1:
            raise ValueError(f"grid must be square, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("GridField values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def d(self) -> int:
        return self.values.ndim - 1

    @property
    def M(self) -> int:
        return self.values.shape[1]

    @property
    def ncomp(self) -> int:
        return self.values.shape[0]

    @property
    def spacing(self) -> float:
        return self.L / self.M

    @property
    def weight(self) -> float:
        return self.spacing**self.d

    def points(self) -> np.ndarray:
        return grid_points(self.M, self.L)

    def same_grid(self, other: "GridField") -> bool:
        return self.d == other.d and self.M == other.M and math.isclose(self.L, other.L)

    def __add__(self, other: "GridField") -> "GridField":
        _check_same_grid(self, other)
        return GridField(self.values + other.values, self.L)

    def __sub__(self, other: "GridField") -> "GridField":
        _check_same_grid(self, other)
        return GridField(self.values - other.values, self.L)

    def __mul__(self, c) -> "GridField":
        return GridField(self.values * c, self.L)

    __rmul__ = __mul__

    def __neg__(self) -> "GridField":
        return GridField(-self.values, self.L)


def _check_same_grid(a: GridField, b: GridField):
    if not a.same_grid(b):
        raise GridMismatchError(
            f"grid mismatch: (d={a.d}, M={a.M}, L={a.L}) vs (d={b.d}, M={b.M}, L={b.L})"
        )


def grid_points(M: int, L: float = math.pi) -> np.ndarray:
    return (np.arange(M) + 0.5) * (L / M)


@dataclass(frozen=True, eq=False)
class ModalField:
    """Coefficients of a field in the eigenbasis of ``spectrum``."""

    coefficients: np.ndarray
    spectrum: "SlipStokesSpectrum"

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.shape[0] != self.spectrum.n_modes:
            raise ValueError(
                f"expected {self.spectrum.n_modes} coefficients, got {c.shape[0]}"
            )
        object.__setattr__(self, "coefficients", c)

    def to_grid(self) -> GridField:
        return self.spectrum.to_grid(self.coefficients)

    def with_coefficients(self, c) -> "ModalField":
        return ModalField(c, self.spectrum)


# ---------------------------------------------------------------------------
# separable trigonometric families
# ---------------------------------------------------------------------------


class _TrigFamily:
    """Fields ``u_c = amp_c sin(k_c x_c) prod_{j != c} cos(k_j x_j)`` (scaled k).

    Synthesis and analysis go through a dense ``(K+1)^d`` coefficient cube per
    component and one tensordot per axis, so the cost is O(d K M^d).
    """

    def __init__(self, d: int, M: int, L: float, ks: np.ndarray, amps: np.ndarray):
        self.d, self.M, self.L = d, M, L
        self.ks = np.asarray(ks, dtype=int).reshape(-1, d)
        self.amps = np.asarray(amps, dtype=float).reshape(-1, d)
        self.scale = math.pi / L
        kmax = int(self.ks.max()) if self.ks.size else 0
        self.kmax = kmax
        arg = np.outer(np.arange(kmax + 1) * self.scale, grid_points(M, L))
        self._tables = {"sin": np.sin(arg), "cos": np.cos(arg)}
        self._index = tuple(self.ks.T)
        self.weight = (L / M) ** d

    @property
    def n(self) -> int:
        return self.ks.shape[0]

    def _axis_tables(self, c: int, deriv: Sequence[int]):
        """1D tables, signs and per-mode wave-number factors for component c."""
        tables, sign = [], 1.0
        factor = np.ones(self.n)
        kk = self.ks * self.scale
        for j in range(self.d):
            kind = "sin" if j == c else "cos"
            for _ in range(deriv[j]):
                if kind == "sin":
                    kind = "cos"
                else:
                    kind, sign = "sin", -sign
            tables.append(self._tables[kind])
            if deriv[j]:
                factor = factor * kk[:, j] ** deriv[j]
        return tables, sign, factor

    def synthesize_component(self, coeffs: np.ndarray, c: int, deriv=None) -> np.ndarray:
        """Component c on the grid; trailing axes of ``coeffs`` are batch axes."""
        deriv = tuple(deriv) if deriv is not None else (0,) * self.d
        tables, sign, factor = self._axis_tables(c, deriv)
        coeffs = np.asarray(coeffs)
        extra = coeffs.shape[1:]
        m = (self.amps[:, c] * factor * sign).reshape((-1,) + (1,) * len(extra))
        w = coeffs * m
        dtype = complex if np.iscomplexobj(w) else float
        cube = np.zeros((self.kmax + 1,) * self.d + extra, dtype=dtype)
        np.add.at(cube, self._index, w)
        out = cube
        for t in tables:
            out = np.tensordot(out, t, axes=([0], [0]))
        # batch axes end up in front of the spatial ones
        return np.moveaxis(out, tuple(range(len(extra))), tuple(range(-len(extra), 0))) if extra else out

    def synthesize(self, coeffs: np.ndarray, deriv=None) -> np.ndarray:
        coeffs = np.asarray(coeffs)
        return np.stack([self.synthesize_component(coeffs, c, deriv) for c in range(self.d)])

    def analyze(self, values: np.ndarray) -> np.ndarray:
        """Discrete L2 inner products of a (d, M..M, *batch) array with every family member."""
        values = np.asarray(values)
        ne = values.ndim - 1 - self.d
        out = 0.0
        for c in range(self.d):
            tables, _, _ = self._axis_tables(c, (0,) * self.d)
            proj = values[c]
            for t in tables:
                proj = np.tensordot(proj, t, axes=([0], [1]))
            if ne:
                proj = np.moveaxis(proj, tuple(range(ne)), tuple(range(-ne, 0)))
            amp = self.amps[:, c].reshape((-1,) + (1,) * ne)
            out = out + proj[self._index] * amp
        return out * self.weight

    def synthesize_scalar_cos(self, coeffs: np.ndarray) -> np.ndarray:
        """sum_m coeffs_m prod_j cos(k_j x_j)."""
        cube = np.zeros((self.kmax + 1,) * self.d, dtype=np.result_type(coeffs, float))
        np.add.at(cube, self._index, coeffs)
        out = cube
        for _ in range(self.d):
            out = np.tensordot(out, self._tables["cos"], axes=([0], [0]))
        return out


def _box_norm_factor(k: Sequence[int], L: float) -> float:
    """Scale making an a-structured field with |a| = 1 unit in discrete L2."""
    n_act = sum(1 for ki in k if ki)
    d = len(k)
    return (L / 2.0) ** (-n_act / 2.0) * L ** (-(d - n_act) / 2.0)


def _perp_basis(k: Sequence[int]) -> list[np.ndarray]:
    """Orthonormal basis of {a : a . k = 0, a_i = 0 where k_i = 0}."""
    d = len(k)
    active = [i for i in range(d) if k[i]]
    if len(active) < 2:
        return []
    kv = np.asarray(k, dtype=float)
    if len(active) == 2:
        i, j = active
        a = np.zeros(d)
        a[i], a[j] = kv[j], -kv[i]
        return [a / np.linalg.norm(a)]
    e1 = np.array([kv[1], -kv[0], 0.0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(kv, e1)
    e2 /= np.linalg.norm(e2)
    return [e1, e2]


# ---------------------------------------------------------------------------
# box spectrum
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SlipEigenmode:
    """One eigenfunction; ``amplitude`` already carries the discrete-L2 normalisation."""

    k: tuple
    amplitude: np.ndarray
    eigenvalue: float
    L: float = math.pi

    def __post_init__(self):
        k = tuple(int(x) for x in self.k)
        if any(x < 0 for x in k):
            raise DomainError(f"wave vector components must be >= 0, got {k}")
        a = np.asarray(self.amplitude, dtype=float)
        if a.shape != (len(k),):
            raise ValueError("amplitude must have one entry per dimension")
        if abs(a @ np.asarray(k, float)) > 1e-12 * max(1.0, np.linalg.norm(a) * max(k)):
            raise SpectrumError(f"amplitude {a} not orthogonal to k={k}")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "amplitude", a)

    @property
    def d(self) -> int:
        return len(self.k)


@dataclass(frozen=True)
class Sector:
    """Sector data: spec(I + A) lies in |arg| < theta0; kappa bounds |lam| ||R(lam)||."""

    theta0: float
    kappa: float

    def __post_init__(self):
        if not 0.0 < self.theta0 < math.pi / 2:
            raise DomainError(f"theta0 must lie in (0, pi/2), got {self.theta0}")
        if not (0.0 < self.kappa < math.inf):
            raise DomainError(f"kappa must be finite and positive, got {self.kappa}")


_DEFAULT_THETA0 = math.pi / 2 - 0.05


def _sector_angle(shifted_eigs: np.ndarray) -> float:
    psi = float(np.max(np.abs(np.angle(shifted_eigs)))) if len(shifted_eigs) else 0.0
    if psi < _DEFAULT_THETA0 - 0.05:
        return _DEFAULT_THETA0
    return 0.5 * (psi + math.pi / 2)


def normal_kappa(shifted_eigs: np.ndarray, theta0: float) -> float:
    """sup over |arg lam| <= pi - theta0 of |lam| / dist(-lam, shifted_eigs).

    The supremum sits on the two boundary rays; on a ray e^{i phi} the sup over
    the radius of r / |r e^{i phi} + b| is 1/sin(beta) (beta the angle between
    the ray and -b) when beta < pi/2, else 1.
    """
    best = 1.0
    for phi in (math.pi - theta0, theta0 - math.pi):
        for b in np.atleast_1d(shifted_eigs):
            beta = abs(np.angle(np.exp(1j * phi) / (-complex(b))))
            if beta < math.pi / 2:
                best = max(best, 1.0 / math.sin(beta))
    return best


@dataclass(frozen=True, eq=False)
class SlipStokesSpectrum:
    """Exact eigen-system of the slip Stokes operator on ``(0, L)^d``.

    Mode data lives in flat arrays (row m: wave vector, normalised amplitude,
    eigenvalue); ``modes`` materialises :class:`SlipEigenmode` objects on demand.
    Operator methods act on modal coefficient arrays of shape ``(n_modes,)`` or
    ``(n_modes, r)``.
    """

    d: int
    K: int
    M: int
    L: float
    wavevectors: np.ndarray
    amplitudes: np.ndarray
    eigenvalues: np.ndarray

    has_kernel = False

    @cached_property
    def modes(self) -> tuple:
        return tuple(
            SlipEigenmode(tuple(k), a, float(lam), self.L)
            for k, a, lam in zip(self.wavevectors, self.amplitudes, self.eigenvalues)
        )

    @property
    def n_modes(self) -> int:
        return int(self.eigenvalues.shape[0])

    dim = n_modes

    @cached_property
    def _family(self) -> _TrigFamily:
        return _TrigFamily(self.d, self.M, self.L, self.wavevectors, self.amplitudes)

    @cached_property
    def sector(self) -> Sector:
        b = 1.0 + self.eigenvalues
        theta0 = _sector_angle(b)
        return Sector(theta0, normal_kappa(b, theta0))

    @property
    def weight(self) -> float:
        return (self.L / self.M) ** self.d

    # -- transforms ---------------------------------------------------------
    def to_grid(self, coeffs) -> GridField:
        coeffs = _coeffs(coeffs)
        return GridField(self._family.synthesize(coeffs), self.L)

    def analyze(self, values: np.ndarray) -> np.ndarray:
        return self._family.analyze(values)

    def gradient_tensor(self, coeffs) -> np.ndarray:
        """(d, d, M..M) array of d u_c / d x_j."""
        coeffs = _coeffs(coeffs)
        out = []
        for c in range(self.d):
            row = []
            for j in range(self.d):
                deriv = [0] * self.d
                deriv[j] = 1
                row.append(self._family.synthesize_component(coeffs, c, deriv))
            out.append(row)
        return np.array(out)

    def laplacian_grid(self, coeffs) -> GridField:
        """Delta u on the grid by spectral second derivatives."""
        coeffs = _coeffs(coeffs)
        comps = []
        for c in range(self.d):
            acc = 0.0
            for j in range(self.d):
                deriv = [0] * self.d
                deriv[j] = 2
                acc = acc + self._family.synthesize_component(coeffs, c, deriv)
            comps.append(acc)
        return GridField(np.array(comps), self.L)

    def modal_divergence(self, coeffs) -> np.ndarray:
        """Per-mode divergence amplitude |c_m (a_m . k_m)|."""
        coeffs = _coeffs(coeffs)
        ak = np.einsum("md,md->m", self.amplitudes, self.wavevectors * (math.pi / self.L))
        return np.abs(coeffs * ak)

    # -- operator protocol --------------------------------------------------
    def _bcast(self, m: np.ndarray, c: np.ndarray) -> np.ndarray:
        return m.reshape(m.shape + (1,) * (c.ndim - 1))

    def apply(self, c):
        c = np.asarray(c)
        return self._bcast(self.eigenvalues, c) * c

    def shifted_solve(self, shift: complex, c):
        """Solve (shift I + A) x = c."""
        c = np.asarray(c)
        den = shift + self.eigenvalues
        if np.min(np.abs(den)) <= 1e-12:
            raise SpectrumError(f"shift {shift} lies on -spectrum")
        return c / self._bcast(den, c)

    def multiplier_apply(self, g: Callable, c):
        vals = np.asarray(g(self.eigenvalues.astype(complex)))
        if not np.all(np.isfinite(vals)):
            raise SpectrumError("function is singular on the spectrum")
        c = np.asarray(c)
        return self._bcast(vals, c) * c

    def scaled(self, factor: float) -> "SlipStokesSpectrum":
        """The operator factor * A realised on the same box (eigenvalues rescaled)."""
        return _ScaledSpectrum(
            self.d, self.K, self.M, self.L, self.wavevectors, self.amplitudes,
            self.eigenvalues * factor, base=self, factor=factor,
        )

    def norm(self, c, p: float) -> float:
        return lp_norm(self.to_grid(c), p)

    # norm-space protocol for operator_pnorm_estimate
    def to_values(self, c) -> np.ndarray:
        return self._family.synthesize(np.asarray(c))

    def from_values(self, v) -> np.ndarray:
        return self._family.analyze(v)


@dataclass(frozen=True, eq=False)
class _ScaledSpectrum(SlipStokesSpectrum):
    base: SlipStokesSpectrum = None
    factor: float = 1.0

    @cached_property
    def _family(self) -> _TrigFamily:
        return self.base._family


def _coeffs(f) -> np.ndarray:
    if isinstance(f, ModalField):
        return f.coefficients
    return np.asarray(f)


def _mode_arrays(d: int, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Wave vectors and unit amplitudes of every nontrivial mode, vectorised
    version of :func:`_perp_basis` over the cube ``{0..K}^d``."""
    grid = np.stack(np.meshgrid(*([np.arange(K + 1)] * d), indexing="ij"), -1).reshape(-1, d)
    active = grid > 0
    n_act = active.sum(axis=1)
    ks, amps = [], []
    two = grid[n_act == 2]
    if two.size:
        a = np.zeros(two.shape, dtype=float)
        idx = np.argsort(~(two > 0), axis=1, kind="stable")[:, :2]
        rows = np.arange(len(two))
        i, j = idx[:, 0], idx[:, 1]
        a[rows, i] = two[rows, j]
        a[rows, j] = -two[rows, i]
        ks.append(two)
        amps.append(a / np.linalg.norm(a, axis=1, keepdims=True))
    if d == 3:
        full = grid[n_act == 3].astype(float)
        if full.size:
            e1 = np.stack([full[:, 1], -full[:, 0], np.zeros(len(full))], axis=1)
            e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
            e2 = np.cross(full, e1)
            e2 /= np.linalg.norm(e2, axis=1, keepdims=True)
            kk = grid[n_act == 3]
            # interleave so the two amplitudes of one k stay adjacent
            ks.append(np.repeat(kk, 2, axis=0))
            amps.append(np.stack([e1, e2], axis=1).reshape(-1, 3))
    if not ks:
        return np.zeros((0, d), dtype=int), np.zeros((0, d))
    return np.concatenate(ks).astype(int), np.concatenate(amps)


def build_box_stokes(d: int, K: int, M: int, L: float = math.pi) -> SlipStokesSpectrum:
    """All nontrivial slip modes with ``|k|_inf <= K``, orthonormal in discrete L2."""
    if d not in (2, 3):
        raise DomainError(f"d must be 2 or 3, got {d}")
    if K < 1:
        raise DomainError(f"cutoff K must be >= 1, got {K}")
    if M < 2 * K + 2:
        raise ResolutionError(f"M={M} cannot resolve K={K}; need M >= {2 * K + 2}")
    ks, amps = _mode_arrays(d, K)
    n_act = np.count_nonzero(ks, axis=1)
    amps = amps * ((L / 2.0) ** (-n_act / 2.0) * L ** (-(d - n_act) / 2.0))[:, None]
    lam = np.sum((ks * (math.pi / L)) ** 2, axis=1)
    # sort by eigenvalue, then wave vector, then basis index (stable)
    order = np.lexsort(tuple(ks[:, j] for j in range(d - 1, -1, -1)) + (lam,))
    return SlipStokesSpectrum(d, K, M, float(L), ks[order], amps[order], lam[order])


def mode_to_grid(mode: SlipEigenmode, M: int) -> GridField:
    if M < 2 * max(mode.k) + 2:
        raise ResolutionError(f"M={M} under-resolves k={mode.k}")
    fam = _TrigFamily(mode.d, M, mode.L, np.array([mode.k]), np.array([mode.amplitude]))
    return GridField(fam.synthesize(np.ones(1)), mode.L)


def _check_field_grid(f: GridField, spec: SlipStokesSpectrum):
    if f.d != spec.d or f.M != spec.M or not math.isclose(f.L, spec.L):
        raise GridMismatchError(
            f"field (d={f.d}, M={f.M}, L={f.L}) vs spectrum (d={spec.d}, M={spec.M}, L={spec.L})"
        )
    if f.ncomp != spec.d:
        raise GridMismatchError(f"expected {spec.d} components, got {f.ncomp}")


def to_modal(f: GridField, spec: SlipStokesSpectrum) -> tuple[ModalField, GridField]:
    """Discrete L2 projection onto the slip modes, plus the residual."""
    _check_field_grid(f, spec)
    c = spec.analyze(f.values)
    residual = f - spec.to_grid(c)
    return ModalField(c, spec), residual


# ---------------------------------------------------------------------------
# Helmholtz split
# ---------------------------------------------------------------------------


@lru_cache(maxsize=32)
def gradient_family(d: int, M: int, L: float, cutoff: int) -> _TrigFamily:
    """Normalised gradients of cos-products, ``|m|_inf <= cutoff``, m != 0."""
    grid = np.stack(np.meshgrid(*([np.arange(cutoff + 1)] * d), indexing="ij"), -1).reshape(-1, d)
    ks = grid[np.any(grid > 0, axis=1)]
    n_act = np.count_nonzero(ks, axis=1)
    nf = (L / 2.0) ** (-n_act / 2.0) * L ** (-(d - n_act) / 2.0)
    amps = ks / np.linalg.norm(ks, axis=1, keepdims=True) * nf[:, None]
    return _TrigFamily(d, M, L, ks, amps)


@dataclass(frozen=True, eq=False)
class HelmholtzSplit:
    """f = reconstruction(p_part) + grad(potential) + residual."""

    p_part: ModalField
    potential: GridField
    gradient_coefficients: np.ndarray
    potential_coefficients: np.ndarray
    family: _TrigFamily
    residual: GridField

    def gradient(self) -> GridField:
        return GridField(self.family.synthesize(self.gradient_coefficients), self.potential.L)


def helmholtz_split(f: GridField, spec: SlipStokesSpectrum, cutoff: int | None = None) -> HelmholtzSplit:
    """Split f into its solenoidal-tangential part and a Neumann gradient.

    The gradient part is solved in the cosine basis: grad prod cos(m_j x_j) has
    exactly the sin/cos structure of the slip modes with amplitude along m, so
    the two families together are a discrete-orthogonal basis.
    """
    _check_field_grid(f, spec)
    cutoff = spec.K if cutoff is None else cutoff
    if spec.M < 2 * cutoff + 2:
        raise ResolutionError(f"M={spec.M} cannot resolve gradient cutoff {cutoff}")
    fam = gradient_family(spec.d, spec.M, float(spec.L), cutoff)
    c = spec.analyze(f.values)
    b = fam.analyze(f.values)
    # ghat_m = -(N_m / |m'|) grad phi_m with phi_m = prod cos(m'_j x_j)
    kabs = np.linalg.norm(fam.ks * fam.scale, axis=1)
    nfac = np.linalg.norm(fam.amps, axis=1)
    pot_coeffs = -b * nfac / kabs
    potential = GridField(fam.synthesize_scalar_cos(pot_coeffs)[None], spec.L)
    grad = fam.synthesize(b)
    residual = f - spec.to_grid(c) - GridField(grad, spec.L)
    return HelmholtzSplit(ModalField(c, spec), potential, b, pot_coeffs, fam, residual)


def helmholtz_project(f: GridField, spec: SlipStokesSpectrum) -> tuple[ModalField, GridField]:
    split = helmholtz_split(f, spec)
    return split.p_part, split.potential


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def _check_p(p: float):
    if not (1.0 < p < math.inf):
        raise DomainError(f"exponent p must lie in (1, inf), got {p}")


def lp_norm(f: GridField, p: float) -> float:
    """Midpoint-quadrature L^p norm of the pointwise Euclidean magnitude."""
    _check_p(p)
    a = np.abs(f.values)
    top = float(np.max(a)) if a.size else 0.0
    if top == 0.0:
        return 0.0
    # scaled so that squaring tiny components does not underflow
    mag = np.sqrt(np.sum((a / top) ** 2, axis=0))
    return top * _weighted_pnorm(mag, p, f.weight)


def _weighted_pnorm(mag: np.ndarray, p: float, w: float) -> float:
    top = float(np.max(mag)) if mag.size else 0.0
    if top == 0.0:
        return 0.0
    # scaled to avoid overflow for large p
    return top * float(np.sum((mag / top) ** p) * w) ** (1.0 / p)


def _strain_from_gradient(grad: np.ndarray, L: float) -> GridField:
    sym = 0.5 * (grad + np.swapaxes(grad, 0, 1))
    d = grad.shape[0]
    return GridField(sym.reshape((d * d,) + grad.shape[2:]), L)


def strain_field(f, spec: SlipStokesSpectrum | None = None) -> GridField:
    """Symmetric gradient D(u) as a d*d-component grid field.

    Modal fields (or grid fields lying in the modal span of ``spec``) are
    differentiated spectrally; other grid fields by second-order differences,
    which are exact on the affine fields that make up rigid motions.
    """
    if isinstance(f, ModalField):
        return _strain_from_gradient(f.spectrum.gradient_tensor(f.coefficients), f.spectrum.L)
    if spec is not None:
        modal, residual = to_modal(f, spec)
        scale = max(lp_norm(f, 2), 1e-300)
        if lp_norm(residual, 2) <= 1e-10 * scale:
            return strain_field(modal)
    if f.M < 3:
        raise ResolutionError("need at least 3 points per axis for finite differences")
    h = f.spacing
    grad = np.array(
        [np.gradient(f.values[c], h, edge_order=2) if f.d > 1 else [np.gradient(f.values[c], h, edge_order=2)]
         for c in range(f.ncomp)]
    )
    return _strain_from_gradient(grad, f.L)


def strain_norm(f, p: float, spec: SlipStokesSpectrum | None = None) -> float:
    return lp_norm(strain_field(f, spec), p)


# ---------------------------------------------------------------------------
# synthetic sectorial operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GeneralSectorialOperator:
    """Dense ``V diag(eigs) V^{-1}`` with a certified sectorial spectrum."""

    matrix: np.ndarray
    eigenvalues: np.ndarray
    V: np.ndarray
    V_inv: np.ndarray
    sector: Sector
    zero_mode: bool = False
    conditioning: float = 1.0
    reconstruction_error: float = 0.0

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def has_kernel(self) -> bool:
        return self.zero_mode

    @cached_property
    def _schur(self):
        T, Z = scipy.linalg.schur(self.matrix, output="complex")
        return T, Z

    def apply(self, c):
        return self.matrix @ np.asarray(c)

    def shifted_solve(self, shift: complex, c):
        if np.min(np.abs(shift + self.eigenvalues)) <= 1e-12:
            raise SpectrumError(f"shift {shift} lies on -spectrum")
        T, Z = self._schur
        rhs = Z.conj().T @ np.asarray(c, dtype=complex)
        y = scipy.linalg.solve_triangular(T + shift * np.eye(self.dim), rhs)
        return Z @ y

    def multiplier_apply(self, g: Callable, c):
        vals = np.asarray(g(self.eigenvalues.astype(complex)))
        if not np.all(np.isfinite(vals)):
            raise SpectrumError("function is singular on the spectrum")
        c = np.asarray(c)
        y = self.V_inv @ c
        y = vals.reshape(vals.shape + (1,) * (c.ndim - 1)) * y
        return self.V @ y

    def scaled(self, factor: float) -> "GeneralSectorialOperator":
        return GeneralSectorialOperator(
            self.matrix * factor,
            self.eigenvalues * factor,
            self.V,
            self.V_inv,
            _make_sector(self.eigenvalues * factor, self.conditioning),
            self.zero_mode,
            self.conditioning,
            self.reconstruction_error,
        )

    def norm(self, c, p: float) -> float:
        _check_p(p)
        return _weighted_pnorm(np.abs(np.asarray(c)), p, 1.0)

    weight = 1.0

    def to_values(self, c) -> np.ndarray:
        return np.asarray(c)[None]

    def from_values(self, v) -> np.ndarray:
        return np.asarray(v)[0]


def _make_sector(eigs: np.ndarray, conditioning: float) -> Sector:
    b = 1.0 + eigs
    theta0 = _sector_angle(b)
    return Sector(theta0, conditioning * normal_kappa(b, theta0))


def build_synthetic(
    eigenvalues: Sequence[complex],
    conditioning: float = 1.0,
    seed: int = 0,
    zero_mode: bool = False,
) -> GeneralSectorialOperator:
    """Random non-normal matrix with prescribed spectrum and cond(V) = conditioning."""
    eigs = np.asarray(eigenvalues, dtype=complex)
    n = eigs.size
    if n == 0:
        raise DomainError("need at least one eigenvalue")
    if conditioning < 1:
        raise DomainError("conditioning target must be >= 1")
    zeros = np.abs(eigs) == 0
    if zero_mode and zeros.sum() != 1:
        raise SpectrumError("zero_mode requires exactly one zero eigenvalue")
    if not zero_mode and zeros.any():
        raise SpectrumError("zero eigenvalue given without zero_mode")
    nz = eigs[~zeros]
    if np.any(nz.real <= 0) or np.any(np.abs(np.angle(nz)) >= math.pi / 2):
        raise SpectrumError("eigenvalues must lie in the open sector |arg| < pi/2")
    rng = np.random.default_rng(seed)
    Q1, _ = np.linalg.qr(rng.standard_normal((n, n)))
    Q2, _ = np.linalg.qr(rng.standard_normal((n, n)))
    sig = np.geomspace(1.0, conditioning, n) if n > 1 else np.ones(1)
    V = (Q1 * sig) @ Q2.T
    V_inv = (Q2 / sig) @ Q1.T
    A = (V * eigs) @ V_inv
    # certificate: compare against V diag V^{-1} formed by an independent solve
    recon = np.linalg.solve(V.T, (V * eigs).T).T
    err = float(np.linalg.norm(A - recon) / max(np.linalg.norm(A), 1e-300))
    return GeneralSectorialOperator(
        A, eigs, V, V_inv, _make_sector(eigs, conditioning), zero_mode,
        float(np.linalg.cond(V)), err,
    )


def eigen_oracle_apply(A, g: Callable, f):
    """Apply g(A) through the stored eigen-factorisation (modal multipliers for the box)."""
    if isinstance(f, ModalField):
        return f.with_coefficients(A.multiplier_apply(g, f.coefficients))
    if isinstance(f, GridField):
        modal, _ = to_modal(f, A)
        return A.to_grid(A.multiplier_apply(g, modal.coefficients))
    return A.multiplier_apply(g, f)


def random_modal_ensemble(
    spec: SlipStokesSpectrum, count: int, seed: int = 0, decay: float = 0.5
) -> list[ModalField]:
    """Gaussian modal coefficients weighted by eigenvalue**(-decay)."""
    rng = np.random.default_rng(seed)
    w = spec.eigenvalues ** (-decay)
    return [
        ModalField(rng.standard_normal(spec.n_modes) * w, spec) for _ in range(count)
    ]


def probe_ensemble(spec: SlipStokesSpectrum, count: int, seed: int = 0) -> list[ModalField]:
    """Random ensemble plus the pure modes at both ends of the spectrum.

    Norm-equivalence constants are an inf and a sup over all fields; random
    fields only see typical ratios, while single modes at the extreme
    eigenvalues realise the endpoints in the Hilbert case.
    """
    ends = [int(np.argmin(spec.eigenvalues)), int(np.argmax(spec.eigenvalues))]
    eye = np.eye(spec.n_modes)
    return random_modal_ensemble(spec, count, seed) + [ModalField(eye[i], spec) for i in ends]

"""Lower-bound estimates of discrete L^p operator norms.

The estimator is the nonlinear power iteration built from the duality maps
``J_p(y) = |y|^{p-2} y / ||y||_p^{p-1}``: each sweep pushes a unit vector through
``T``, maps it to its norming functional, pulls back with ``T^*`` and returns to
the primal side with ``J_{p'}``.  For p = 2 it reduces to the ordinary power
method on ``T^* T``.  Every iterate yields a certified lower bound
``||T x||_p / ||x||_p``, and the running maximum over iterates and random starts
is returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operator_core import _check_p


class EuclideanSpace:
    """Plain l^p on C^n (unit weights, one component)."""

    weight = 1.0

    def __init__(self, n: int):
        self.dim = n

    def to_values(self, c):
        return np.asarray(c)[None]

    def from_values(self, v):
        return np.asarray(v)[0]


@dataclass(frozen=True)
class DiagonalMap:
    """Multiplier ``c -> m * c`` in an orthonormal coefficient basis."""

    multipliers: np.ndarray

    @property
    def dim(self) -> int:
        return self.multipliers.shape[0]

    def _m(self, c):
        return self.multipliers.reshape((-1,) + (1,) * (np.ndim(c) - 1))

    def apply(self, c):
        return self._m(c) * c

    def adjoint(self, c):
        return np.conj(self._m(c)) * c

    def hilbert_norm(self) -> float:
        return float(np.max(np.abs(self.multipliers)))


@dataclass(frozen=True)
class DenseMap:
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def apply(self, c):
        return self.matrix @ c

    def adjoint(self, c):
        return self.matrix.conj().T @ c

    def hilbert_norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))


@dataclass(frozen=True)
class IdentityMap:
    dim: int

    def apply(self, c):
        return np.array(c, copy=True)

    adjoint = apply

    def hilbert_norm(self) -> float:
        return 1.0


_WINDOW = 10
_RATIO_STALL = 1e-10


def _magnitude(v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(v) ** 2, axis=0))


def _pnorm(v: np.ndarray, p: float, w: float) -> np.ndarray:
    """Weighted p-norm per trailing column of a (ncomp, ..., r) array."""
    mag = _magnitude(v).reshape(-1, v.shape[-1])
    top = mag.max(axis=0)
    safe = np.where(top > 0, top, 1.0)
    return np.where(top > 0, safe * (w * np.sum((mag / safe) ** p, axis=0)) ** (1.0 / p), 0.0)


def _duality(v: np.ndarray, p: float, w: float) -> np.ndarray:
    """Norming functionals of the columns of v for the pairing w * sum(conj(J) . v)."""
    nv = _pnorm(v, p, w)
    nv = np.where(nv > 0, nv, 1.0)
    mag = _magnitude(v) / nv
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(mag > 0, mag ** (p - 2), 0.0)
    return scale * (v / nv)


def _canonical_phase(c: np.ndarray) -> np.ndarray:
    j = np.argmax(np.abs(c), axis=0)
    lead = c[j, np.arange(c.shape[1])]
    fix = np.where(lead != 0, np.abs(lead) / np.where(lead != 0, lead, 1.0), 1.0)
    return c * fix


def operator_pnorm_estimate(
    T,
    p: float,
    budget: int = 10,
    seed: int = 0,
    space=None,
    tol: float = 1e-6,
    max_iter: int = 500,
    hilbert_exact: bool = True,
) -> float:
    """Randomised lower bound for ``sup ||T c||_p / ||c||_p``.

    ``T`` exposes ``apply``, ``adjoint`` and ``dim`` and must accept coefficient
    blocks of shape ``(dim, r)``; ``space`` supplies ``to_values``/``from_values``
    and the quadrature ``weight`` (defaults to plain l^p).  ``budget`` random
    starts are iterated together until every unit iterate moves by less than
    ``tol`` or its ratio stalls.

    For p = 2 the coefficient spaces used here are orthonormal, so when ``T``
    carries an explicit representation the norm is its largest singular value;
    ``hilbert_exact=False`` forces the iteration instead.
    """
    _check_p(p)
    if budget < 10:
        raise ValueError("budget must be >= 10")
    if space is None:
        space = EuclideanSpace(T.dim)
    if hilbert_exact and p == 2 and hasattr(T, "hilbert_norm"):
        return T.hilbert_norm()
    w = float(space.weight)
    q = p / (p - 1.0)
    rng = np.random.default_rng(seed)
    n = T.dim
    c = rng.standard_normal((n, budget)) + 1j * rng.standard_normal((n, budget))
    cv = space.to_values(c)
    c = _canonical_phase(c / _pnorm(cv, p, w))
    cv = space.to_values(c)
    best = 0.0
    history = []
    for _ in range(max_iter):
        y = space.to_values(T.apply(c))
        ratio = _pnorm(y, p, w) / _pnorm(cv, p, w)
        best = max(best, float(ratio.max()))
        history.append(ratio)
        g = T.adjoint(space.from_values(_duality(y, p, w)))
        c_new = space.from_values(_duality(space.to_values(g), q, w))
        cv_new = space.to_values(c_new)
        nrm = _pnorm(cv_new, p, w)
        if not np.all(nrm > 0):
            break
        c_new = _canonical_phase(c_new / nrm)
        step = np.linalg.norm(c_new - c, axis=0) / np.linalg.norm(c, axis=0)
        # a start is finished once its iterate or its ratio has stagnated
        done = step <= tol
        if len(history) > _WINDOW:
            old = history[-_WINDOW - 1]
            done |= np.abs(ratio - old) <= _RATIO_STALL * ratio
        keep = ~done
        if not keep.any():
            break
        c = c_new[:, keep]
        cv = space.to_values(c)
        history = [h[keep] for h in history[-_WINDOW - 1:]]
    return best

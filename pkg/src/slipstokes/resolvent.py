"""Shifted resolvents ``(lambda I + I + A)^{-1}`` and empirical sector constants."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .funcalc import _space, _unwrap
from .operator_core import DomainError, SlipStokesSpectrum, SpectrumError
from .pnorm import DenseMap, DiagonalMap, operator_pnorm_estimate

DEFAULT_ANGLES = (math.pi, math.pi - 0.1, math.pi - 0.3, math.pi - 0.6, math.pi - 1.0)
_HIT_TOL = 1e-12


def default_radii(n: int = 41) -> np.ndarray:
    return np.logspace(-4, 6, n)


def _check_shift(A, shift: float):
    if getattr(A, "has_kernel", False) and not shift > 0:
        raise SpectrumError(
            "operator has a kernel: resolvent probing needs a positive shift (lambda > 0) "
            f"of the operator, got shift={shift}"
        )


def shifted_resolve(A, lam: complex, f):
    """Solve ``(lam + 1) u + A u = f``."""
    c, wrap = _unwrap(A, f)
    return wrap(A.shifted_solve(complex(lam) + 1.0, c))


def resolvent_map(A, lam: complex, shift: float = 1.0):
    """``(lam I + shift I + A)^{-1}`` as an explicit map; ``shift = 1`` is ``I + A``."""
    total = complex(lam) + shift
    if isinstance(A, SlipStokesSpectrum):
        den = total + A.eigenvalues
        if np.min(np.abs(den)) <= _HIT_TOL:
            raise SpectrumError(f"lambda={lam} hits the spectrum")
        return DiagonalMap(1.0 / den)
    return DenseMap(A.shifted_solve(total, np.eye(A.dim, dtype=complex)))


def spectral_distance(A, lam: complex, shift: float = 1.0) -> float:
    return float(np.min(np.abs(complex(lam) + shift + np.asarray(A.eigenvalues))))


def resolvent_norm(A, lam: complex, p: float, trials: int = 20, seed: int = 0, shift: float = 1.0) -> float:
    return operator_pnorm_estimate(resolvent_map(A, lam, shift), p, trials, seed, _space(A))


@dataclass
class SectorEstimate:
    """Sampled ``|lambda| ||(lambda I + I + A)^{-1}||_p`` over rays ``arg lambda = phi``.

    ``kappa_measured`` is the largest ratio over the closed sector
    ``|arg lambda| <= max_angle``, with ``max_angle`` the largest probed angle
    below pi whose samples are all finite; ``theta0_probed = pi - max_angle``.
    Samples on the negative axis are kept for the distance check but are not
    part of any admissible sector.
    """

    p: float
    theta0_probed: float
    max_angle: float
    kappa_measured: float
    trials: int
    samples: list = field(default_factory=list)  # (lam, ratio, flagged)
    shift: float = 1.0

    def ratios(self, angle: float | None = None) -> np.ndarray:
        rows = [s for s in self.samples if angle is None or math.isclose(np.angle(s[0]), angle)]
        return np.array([r for _, r, _ in rows])

    def summary(self) -> dict:
        return {
            "p": self.p,
            "theta0_probed": self.theta0_probed,
            "max_angle": self.max_angle,
            "kappa_measured": self.kappa_measured,
            "trials": self.trials,
            "shift": self.shift,
            "n_samples": len(self.samples),
            "n_flagged": sum(1 for s in self.samples if s[2]),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda_re", "lambda_im", "ratio"])
        for lam, r, _ in self.samples:
            w.writerow([repr(float(lam.real)), repr(float(lam.imag)), repr(float(r))])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def _probe_one(args):
    A, lam, p, trials, seed, shift = args
    if spectral_distance(A, lam, shift) <= _HIT_TOL:
        return lam, math.inf, True
    return lam, resolvent_norm(A, lam, p, trials, seed, shift) * abs(lam), False


def probe_sector(
    A,
    p: float,
    angles=DEFAULT_ANGLES,
    radii=None,
    trials: int = 20,
    seed: int = 0,
    parallel: int = 1,
    shift: float = 1.0,
) -> SectorEstimate:
    """Estimate ``kappa`` and the admissible sector angle from sampled resolvent norms.

    ``shift`` is the multiple of the identity added to ``A``; operators with a
    kernel are rejected unless it is positive.
    """
    _check_shift(A, shift)
    angles = [float(a) for a in angles]
    radii = default_radii() if radii is None else np.asarray(radii, dtype=float)
    if any(not (math.pi / 2 < a <= math.pi) for a in angles):
        raise DomainError("angles must lie in (pi/2, pi]")
    if np.log10(radii.max() / radii.min()) < 8:
        raise DomainError("radii must span at least 8 decades")
    if trials < 20:
        raise DomainError("need at least 20 trials per sample")
    jobs = [(A, r * np.exp(1j * a), p, trials, seed, shift) for a in angles for r in radii]
    if parallel > 1:
        with ThreadPoolExecutor(parallel) as ex:
            samples = list(ex.map(_probe_one, jobs))
    else:
        samples = [_probe_one(j) for j in jobs]
    finite_angles = [
        a for a in angles
        if a < math.pi
        and all(np.isfinite(r) for lam, r, _ in samples if math.isclose(np.angle(lam), a))
    ]
    max_angle = max(finite_angles) if finite_angles else math.pi / 2
    inside = [r for lam, r, _ in samples if abs(np.angle(lam)) <= max_angle + 1e-12 and np.isfinite(r)]
    kappa = max(inside) if inside else math.nan
    return SectorEstimate(p, math.pi - max_angle, max_angle, float(kappa), trials, samples, shift)


@dataclass
class SmallLambdaReport:
    alpha: float
    kappa: float
    p: float
    passed: bool
    worst_margin: float
    samples: list  # (lam, norm, bound)

    def summary(self) -> dict:
        return {
            "alpha": self.alpha,
            "kappa": self.kappa,
            "p": self.p,
            "passed": self.passed,
            "worst_margin": self.worst_margin,
            "n_samples": len(self.samples),
        }


def small_lambda_samples(kappa: float, max_angle: float, count: int = 100, seed: int = 0):
    """Random nonzero lambda in the sector with ``|lambda| <= 1/(2 kappa)``; the
    boundary radius is always included."""
    rng = np.random.default_rng(seed)
    rmax = 1.0 / (2.0 * kappa)
    r = rmax * 10.0 ** rng.uniform(-6, 0, count)
    r[0] = rmax
    phi = rng.uniform(-max_angle, max_angle, count)
    return list(r * np.exp(1j * phi))


def check_small_lambda(A, p: float, alpha: float, kappa: float, samples, trials: int = 20, seed: int = 0) -> SmallLambdaReport:
    """Check ``||(lambda I + I + A)^{-1}||_p <= 2^a kappa^a |lambda|^(a-1)`` on each sample.

    The margin is bound / measured norm; failures are reported, not raised.
    """
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    rows, worst = [], math.inf
    for lam in samples:
        nrm = resolvent_norm(A, lam, p, trials, seed)
        bound = (2 * kappa) ** alpha * abs(lam) ** (alpha - 1)
        rows.append((complex(lam), nrm, bound))
        worst = min(worst, bound / nrm)
    return SmallLambdaReport(alpha, kappa, p, bool(worst >= 1.0), float(worst), rows)

"""Batch experiment runner.

One experiment per invocation::

    slipstokes powers --config cfg.json --out results/ --seed 3 --parallel 4

Every run writes ``summary.json``, one or more CSVs and ``report.txt`` into the
output directory.  Each file carries the artifact version and the config hash.
Invalid configs exit with status 2 and a JSON error document on stdout; failed
checks exit with status 1.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
import warnings
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .contour import ContourSettings
from .funcalc import (
    fit_power_bound,
    power_operator,
    scaling_conjugation_residual,
    sobolev_embedding_constant,
    sqrt_domain_ratio,
)
from .maxreg import EnsembleSpec, Forcing, ensemble_report, mu_shift_check
from .operator_core import (
    DomainError,
    build_box_stokes,
    build_synthetic,
    probe_ensemble,
    random_modal_ensemble,
)
from .resolvent import (
    DEFAULT_ANGLES,
    check_small_lambda,
    default_radii,
    probe_sector,
    small_lambda_samples,
    spectral_distance,
)
from .semigroup import broadband_initial, decay_rate, smoothing_rate

SCHEMA_VERSION = 1
KINDS = ("probe-sector", "powers", "sqrt-domain", "embedding", "semigroup", "maxreg", "mu-shift", "scaling")
OUT_ENV = "SLIPSTOKES_OUT"

TOLERANCES = {
    "default": {
        "unit_norm": 1e-9,
        "identity": 1e-10,
        "resolvent_match": 1e-6,
        "kappa_stability": 1.5,
        "domain_drift": 1.5,
        "slope_rel": 0.10,
        "delta_rel": 0.05,
        "maxreg_drift": 2.0,
        "rescale": 1e-12,
        "pressure_spread": 2.0,
        "mu_shift": 1e-9,
        "scaling": 1e-8,
        "m_spread": 4.0,
        "theta_spread": 0.2,
    },
    "strict": {
        "unit_norm": 1e-11,
        "identity": 1e-12,
        "resolvent_match": 1e-9,
        "kappa_stability": 1.2,
        "domain_drift": 1.25,
        "slope_rel": 0.05,
        "delta_rel": 0.02,
        "maxreg_drift": 1.5,
        "rescale": 1e-13,
        "pressure_spread": 1.5,
        "mu_shift": 1e-11,
        "scaling": 1e-10,
        "m_spread": 2.0,
        "theta_spread": 0.1,
    },
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class OperatorConfig:
    type: str = "box"
    d: int = 2
    K: int = 4
    M: int = 12
    L: float = math.pi
    # synthetic operators: explicit eigenvalues ([re, im] pairs or reals), or
    # a geometric spectrum of size n on [1, spectrum_max]
    eigenvalues: list | None = None
    n: int = 50
    spectrum_max: float = 1e4
    conditioning: float = 1.0
    zero_mode: bool = False
    seed: int = 0


@dataclass
class EnsembleConfig:
    count: int = 50
    law: str = "ar1"
    correlation: float = 0.5
    weight_exponent: float = 0.25
    raw_fraction: float = 0.5


@dataclass
class ContourConfig:
    theta0: float | None = None
    node_count: int | None = None
    tol: float = 1e-12
    scheme: str = "de"


@dataclass
class ExperimentConfig:
    kind: str
    schema_version: int = SCHEMA_VERSION
    operator: OperatorConfig = field(default_factory=OperatorConfig)
    p: float = 2.0
    q: float | None = None
    exponent_pairs: list | None = None  # [[p, q], ...] for maxreg
    s_grid: list = field(default_factory=lambda: [-8.0, -6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0])
    lambda_shifts: list = field(default_factory=lambda: [0.0])
    t_grid: list | None = None
    angles: list | None = None
    radii: list | None = None
    alphas: list = field(default_factory=lambda: [0.5])
    mu_values: list = field(default_factory=lambda: [1.0])
    z_values: list = field(default_factory=lambda: [[-0.5, 0.0]])
    quantities: list = field(default_factory=lambda: ["dt", "strain"])
    resolutions: list = field(default_factory=lambda: [[4, 12, 32]])
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    T: float = 1.0
    scheme: str = "duhamel_exact"
    scale: str = "strong"
    shift: float = 1.0
    trials: int = 20
    budget: int = 10
    sample_count: int = 16
    contour: ContourConfig = field(default_factory=ContourConfig)
    seed: int = 0
    parallel: int = 1
    tolerance_profile: str = "default"
    out: str | None = None

    # -- (de)serialisation -------------------------------------------------
    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        data = dict(data)
        nested = {"operator": OperatorConfig, "ensemble": EnsembleConfig, "contour": ContourConfig}
        for key, sub in nested.items():
            if key in data:
                data[key] = _build(sub, data[key], key)
        cfg = _build(cls, data, "config")
        cfg.validate()
        return cfg

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def config_hash(self) -> str:
        """SHA-256 of the canonical config, ignoring where the output goes."""
        d = self.to_dict()
        d.pop("out", None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    # -- validation --------------------------------------------------------
    def validate(self) -> None:
        err = []
        if self.schema_version != SCHEMA_VERSION:
            err.append(f"schema_version must be {SCHEMA_VERSION}")
        if self.kind not in KINDS:
            err.append(f"kind must be one of {list(KINDS)}")
        for name in ("p",) + (("q",) if self.q is not None else ()):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and 1 < v < math.inf):
                err.append(f"{name} must lie in (1, inf)")
        for pair in self.exponent_pairs or []:
            if len(pair) != 2 or not all(1 < x < math.inf for x in pair):
                err.append("exponent_pairs entries must be [p, q] in (1, inf)")
        for name in ("s_grid", "lambda_shifts", "alphas", "mu_values", "z_values", "quantities", "resolutions"):
            if not getattr(self, name):
                err.append(f"{name} must be nonempty")
        for name in ("t_grid", "angles", "radii", "exponent_pairs"):
            v = getattr(self, name)
            if v is not None and not v:
                err.append(f"{name} must be nonempty when given")
        if any(len(r) != 3 for r in self.resolutions):
            err.append("resolutions entries must be [K, M, steps]")
        if any(not (isinstance(z, (int, float)) or len(z) == 2) for z in self.z_values):
            err.append("z_values entries must be reals or [re, im] pairs")
        if self.operator.type not in ("box", "synthetic"):
            err.append("operator.type must be 'box' or 'synthetic'")
        if self.operator.type == "box" and self.operator.d not in (2, 3):
            err.append("operator.d must be 2 or 3")
        if self.tolerance_profile not in TOLERANCES:
            err.append(f"tolerance_profile must be one of {sorted(TOLERANCES)}")
        if self.parallel < 1:
            err.append("parallel must be >= 1")
        if self.T <= 0:
            err.append("T must be positive")
        if err:
            raise ConfigError("; ".join(err))


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown {where} fields: {unknown}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _complex(z) -> complex:
    return complex(z) if isinstance(z, (int, float)) else complex(z[0], z[1])


def build_operator(op: OperatorConfig):
    if op.type == "box":
        return build_box_stokes(op.d, op.K, op.M, op.L)
    if op.eigenvalues is not None:
        eigs = np.array([_complex(e) for e in op.eigenvalues])
    else:
        eigs = np.geomspace(1.0, op.spectrum_max, op.n).astype(complex)
        if op.zero_mode:
            eigs[0] = 0.0
    return build_synthetic(eigs, op.conditioning, op.seed, op.zero_mode)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


@dataclass
class Outcome:
    results: dict = field(default_factory=dict)
    csvs: dict = field(default_factory=dict)  # file name -> list of rows (first row = header)
    checks: list = field(default_factory=list)  # (name, value, tolerance, relation, passed)

    def check(self, name: str, value: float, tol: float, relation: str = "<=") -> None:
        ok = {"<=": value <= tol, "<": value < tol, ">=": value >= tol}[relation]
        self.checks.append({"name": name, "value": float(value), "tolerance": float(tol),
                            "relation": relation, "passed": bool(ok)})


def _mapper(cfg: ExperimentConfig):
    if cfg.parallel <= 1:
        return map, None
    ex = ThreadPoolExecutor(cfg.parallel)
    return ex.map, ex


def _contour(cfg: ExperimentConfig) -> ContourSettings:
    c = cfg.contour
    return ContourSettings(c.theta0, c.node_count, c.tol, c.scheme)


def run_probe_sector(cfg, tol, out: Outcome):
    A = build_operator(cfg.operator)
    angles = cfg.angles if cfg.angles is not None else list(DEFAULT_ANGLES)
    radii = np.asarray(cfg.radii, float) if cfg.radii is not None else default_radii()
    est = probe_sector(A, cfg.p, angles, radii, cfg.trials, cfg.seed, cfg.parallel, cfg.shift)
    out.results["sector"] = est.summary()
    out.csvs["sector.csv"] = [["lambda_re", "lambda_im", "ratio"]] + [
        [lam.real, lam.imag, r] for lam, r, _ in est.samples
    ]
    again = probe_sector(A, cfg.p, angles, radii, 2 * cfg.trials, cfg.seed, cfg.parallel, cfg.shift)
    stab = max(again.kappa_measured, est.kappa_measured) / min(again.kappa_measured, est.kappa_measured)
    out.results["kappa_doubled_trials"] = again.kappa_measured
    out.check("kappa stability under trial doubling", stab, tol["kappa_stability"])
    if cfg.p == 2 and cfg.operator.type == "box":
        worst = 0.0
        for lam, r, flagged in est.samples:
            if not flagged:
                exact = abs(lam) / spectral_distance(A, lam, cfg.shift)
                worst = max(worst, abs(r - exact) / exact)
        out.check("p=2 resolvent norm vs 1/dist", worst, tol["resolvent_match"])
    if cfg.shift == 1.0 and math.isfinite(est.kappa_measured):
        samples = small_lambda_samples(est.kappa_measured, est.max_angle, 100, cfg.seed)
        for alpha in cfg.alphas:
            rep = check_small_lambda(A, cfg.p, alpha, est.kappa_measured, samples, cfg.trials, cfg.seed)
            out.results[f"small_lambda_alpha_{alpha}"] = rep.summary()
            out.check(f"small-lambda bound margin (alpha={alpha})", rep.worst_margin, 1.0, ">=")


def run_powers(cfg, tol, out: Outcome):
    A = build_operator(cfg.operator)
    s_grid = np.asarray(cfg.s_grid, float)
    fits = []
    for i, lam in enumerate(cfg.lambda_shifts):
        fit = fit_power_bound(A, float(lam), cfg.p, s_grid, cfg.budget, cfg.seed, _contour(cfg))
        fits.append(fit)
        out.results[f"fit_{i}"] = fit.summary()
        out.csvs[f"powers_{i}.csv"] = [["s", "norm"]] + [list(r) for r in fit.rows()]
        out.check(f"theta_eff < pi/2 (lambda_shift={lam})", fit.theta_eff, math.pi / 2, "<")
        if cfg.p == 2 and cfg.operator.type == "box":
            dev = float(np.max(np.abs(fit.norms - 1.0)))
            out.check(f"unit L2 norms (lambda_shift={lam})", dev, tol["unit_norm"])
    if not getattr(A, "has_kernel", False):
        ident = power_operator(A, 0j, 0.0, _contour(cfg))
        eye = np.eye(A.n_modes if cfg.operator.type == "box" else A.dim)
        mat = np.diag(ident.multipliers) if hasattr(ident, "multipliers") else ident.matrix
        out.check("s=0 gives the identity", float(np.max(np.abs(mat - eye))), tol["identity"])
    if len(fits) > 1:
        Ms = [f.M for f in fits]
        ths = [f.theta_eff for f in fits]
        out.check("M spread across lambda shifts", max(Ms) / min(Ms), tol["m_spread"])
        out.check("theta_eff spread across lambda shifts", max(ths) - min(ths), tol["theta_spread"])


def _resolution_drift(values) -> float:
    """Largest ratio between consecutive positive values."""
    worst = 1.0
    for a, b in zip(values, values[1:]):
        worst = max(worst, max(a, b) / min(a, b))
    return worst


def run_sqrt_domain(cfg, tol, out: Outcome):
    rows = [["K", "M", "p", "ratio_min", "ratio_max"]]
    ps = [cfg.p] if cfg.q is None else [cfg.p, cfg.q]
    for p in ps:
        lows, highs = [], []
        for K, M, _ in cfg.resolutions:
            spec = build_box_stokes(cfg.operator.d, K, M, cfg.operator.L)
            ens = probe_ensemble(spec, cfg.sample_count, cfg.seed)
            lo, hi = sqrt_domain_ratio(spec, ens, p, _contour(cfg))
            rows.append([K, M, p, lo, hi])
            lows.append(lo)
            highs.append(hi)
        overlap = max(lows) <= min(highs)
        out.results[f"p_{p}"] = {"min": lows, "max": highs, "overlap": overlap}
        out.check(f"intervals overlap (p={p})", 0.0 if overlap else 1.0, 0.0)
        drift = max(_resolution_drift(lows), _resolution_drift(highs))
        out.check(f"endpoint drift (p={p})", drift, tol["domain_drift"])
    out.csvs["sqrt_domain.csv"] = rows


def run_embedding(cfg, tol, out: Outcome):
    rows = [["K", "M", "p", "alpha", "constant"]]
    for alpha in cfg.alphas:
        consts = []
        for K, M, _ in cfg.resolutions:
            spec = build_box_stokes(3, K, M, cfg.operator.L)
            ens = random_modal_ensemble(spec, cfg.sample_count, cfg.seed)
            c = sobolev_embedding_constant(spec, float(alpha), cfg.p, ens, _contour(cfg))
            rows.append([K, M, cfg.p, alpha, c])
            consts.append(c)
        out.results[f"alpha_{alpha}"] = consts
        out.check(f"embedding constant drift (alpha={alpha})", _resolution_drift(consts), tol["domain_drift"])
    out.csvs["embedding.csv"] = rows


def _expected_slope(quantity: str, d: int, p: float, q: float) -> float:
    return {
        "lp": -(d / 2.0) * (1.0 / p - 1.0 / q),
        "strain": -0.5,
        "dt": -1.0,
        "dtA": -1.0,
    }[quantity]


def run_semigroup(cfg, tol, out: Outcome):
    if cfg.operator.type != "box":
        raise ConfigError("semigroup experiment needs a box operator")
    spec = build_operator(cfg.operator)
    u0 = broadband_initial(spec)
    t_grid = None if cfg.t_grid is None else np.asarray(cfg.t_grid, float)
    lam_min = float(spec.eigenvalues.min())
    for qty in cfg.quantities:
        q = cfg.q if (cfg.q is not None and qty == "lp") else cfg.p
        fit = smoothing_rate(spec, u0, qty, cfg.p, q, t_grid)
        expected = _expected_slope(qty, spec.d, cfg.p, q)
        out.results[qty] = {**fit.summary(), "expected_slope": expected}
        out.csvs[f"semigroup_{qty}.csv"] = [["t", "value"]] + [list(r) for r in fit.rows()]
        out.check(f"{qty} slope vs {expected:.4g}", abs(fit.slope - expected) / abs(expected), tol["slope_rel"])
        out.check(f"{qty} delta vs lambda_min", abs(fit.delta - lam_min) / lam_min, tol["delta_rel"])
    rate = decay_rate(spec, u0)
    out.results["decay_rate"] = rate
    out.check("decay rate vs lambda_min", abs(rate - lam_min) / lam_min, tol["delta_rel"])


def run_maxreg(cfg, tol, out: Outcome):
    if cfg.operator.type != "box":
        raise ConfigError("maxreg experiment needs a box operator")
    e = cfg.ensemble
    ens = EnsembleSpec(e.count, cfg.seed, e.law, e.correlation, e.weight_exponent, e.raw_fraction)
    pairs = cfg.exponent_pairs or [[cfg.p, cfg.q if cfg.q is not None else cfg.p]]
    res = [tuple(int(x) for x in r) for r in cfg.resolutions]
    mapper, pool = _mapper(cfg)
    try:
        for p, q in pairs:
            rep = ensemble_report(cfg.operator.d, ens, p, q, cfg.T, cfg.scheme, res, cfg.scale,
                                  cfg.operator.L, mapper)
            tag = f"p{p:g}_q{q:g}"
            out.results[tag] = rep.summary()
            out.csvs[f"maxreg_{tag}.csv"] = [["resolution", "member", "seed", "raw", "p", "q", "T", "scale", "ratio"]] + [
                [r["resolution"], r["member"], r["seed"], int(r["raw"]), p, q, cfg.T, cfg.scale, r["ratio"]]
                for r in rep.rows
            ]
            maxes = list(rep.ensemble_max.values())
            drift = max([1.0] + [b / a for a, b in zip(maxes, maxes[1:])])
            out.check(f"ensemble-max growth under refinement ({tag})", drift, tol["maxreg_drift"])
            if p == 2 and q == 2 and cfg.scale == "strong":
                out.check("energy inequality on every trajectory", 0.0 if rep.energy_ok else 1.0, 0.0)
            if rep.pressure_spread:
                out.check(f"pressure constant max/median ({tag})", max(rep.pressure_spread.values()),
                          tol["pressure_spread"])
    finally:
        if pool is not None:
            pool.shutdown()
    # rescaling invariance on one analytic forcing
    from .maxreg import maxreg_ratio, solve_inhomogeneous

    spec = build_box_stokes(cfg.operator.d, *res[0][:2], cfg.operator.L)
    rng = np.random.default_rng(cfg.seed)
    f = Forcing.analytic(rng.standard_normal((2, spec.n_modes)), [0.5, -2.0], cfg.T)
    p, q = pairs[0]
    r1 = maxreg_ratio(solve_inhomogeneous(spec, f, scheme=cfg.scheme, steps=res[0][2]), p, q, cfg.scale)
    r2 = maxreg_ratio(solve_inhomogeneous(spec, f.scaled(37.5), scheme=cfg.scheme, steps=res[0][2]), p, q, cfg.scale)
    out.check("ratio invariance under f -> c f", abs(r2 - r1) / r1, tol["rescale"])


def run_mu_shift(cfg, tol, out: Outcome):
    A = build_operator(cfg.operator)
    n = A.n_modes if cfg.operator.type == "box" else A.dim
    rng = np.random.default_rng(cfg.seed)
    f = Forcing.analytic(rng.standard_normal((2, n)), [0.5, -2.0], cfg.T)
    steps = int(cfg.resolutions[0][2])
    rows = [["mu", "residual"]]
    for mu in cfg.mu_values:
        r = mu_shift_check(A, f, float(mu), cfg.T, steps, cfg.scheme)
        rows.append([mu, r])
        out.check(f"mu-shift residual (mu={mu})", r, tol["mu_shift"])
    out.csvs["mu_shift.csv"] = rows


def run_scaling(cfg, tol, out: Outcome):
    if cfg.operator.type != "box":
        raise ConfigError("scaling experiment needs a box operator")
    spec = build_operator(cfg.operator)
    f = random_modal_ensemble(spec, 1, cfg.seed)[0].coefficients
    rows = [["mu", "z_re", "z_im", "residual"]]
    for mu in cfg.mu_values:
        for zz in cfg.z_values:
            z = _complex(zz)
            r = scaling_conjugation_residual(spec, float(mu), z, f, _contour(cfg))
            rows.append([mu, z.real, z.imag, r])
            out.check(f"scaling residual (mu={mu}, z={z})", r, tol["scaling"])
    out.csvs["scaling.csv"] = rows


RUNNERS = {
    "probe-sector": run_probe_sector,
    "powers": run_powers,
    "sqrt-domain": run_sqrt_domain,
    "embedding": run_embedding,
    "semigroup": run_semigroup,
    "maxreg": run_maxreg,
    "mu-shift": run_mu_shift,
    "scaling": run_scaling,
}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _stamp(cfg: ExperimentConfig) -> dict:
    return {"artifact_version": __version__, "config_hash": cfg.config_hash()}


def output_dir(cfg: ExperimentConfig) -> Path:
    if cfg.out:
        return Path(cfg.out)
    root = Path(os.environ.get(OUT_ENV, "slipstokes-out"))
    return root / f"{cfg.kind}-{cfg.config_hash()[:12]}"


def write_outputs(cfg: ExperimentConfig, out: Outcome, warn_counts: dict, outdir: Path) -> dict:
    outdir.mkdir(parents=True, exist_ok=True)
    stamp = _stamp(cfg)
    passed = all(c["passed"] for c in out.checks)
    summary = {
        **stamp,
        "kind": cfg.kind,
        "tolerance_profile": cfg.tolerance_profile,
        "passed": passed,
        "checks": out.checks,
        "warnings": warn_counts,
        "results": out.results,
        "config": cfg.to_dict(),
        "csv_files": sorted(out.csvs),
    }
    (outdir / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    head = f"# slipstokes {stamp['artifact_version']} config_hash={stamp['config_hash']}\n"
    for name, rows in out.csvs.items():
        body = "".join(",".join(_fmt(v) for v in row) + "\n" for row in rows)
        (outdir / name).write_text(head + body)
    lines = [
        f"slipstokes {stamp['artifact_version']}  experiment: {cfg.kind}",
        f"config hash: {stamp['config_hash']}",
        f"tolerance profile: {cfg.tolerance_profile}",
        "",
    ]
    for c in out.checks:
        tag = "PASS" if c["passed"] else "FAIL"
        lines.append(f"[{tag}] {c['name']}: {c['value']:.3e} {c['relation']} {c['tolerance']:.3e}")
    if warn_counts:
        lines.append("")
        lines.append("numerical warnings (not fatal):")
        lines += [f"  {k}: {v}" for k, v in sorted(warn_counts.items())]
    lines += ["", f"overall: {'PASS' if passed else 'FAIL'}", ""]
    (outdir / "report.txt").write_text("\n".join(lines))
    return summary


def run(cfg: ExperimentConfig, outdir: Path | None = None) -> dict:
    """Run one experiment and write its outputs; returns the summary dict."""
    cfg.validate()
    outdir = output_dir(cfg) if outdir is None else outdir
    tol = TOLERANCES[cfg.tolerance_profile]
    out = Outcome()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        RUNNERS[cfg.kind](cfg, tol, out)
    counts = Counter(w.category.__name__ for w in caught)
    return write_outputs(cfg, out, dict(sorted(counts.items())), outdir)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slipstokes", description="Slip Stokes operator experiments")
    ap.add_argument("--version", action="version", version=f"slipstokes {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in KINDS + ("validate-config",):
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path)
        sp.add_argument("--out", type=str)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--parallel", type=int)
        sp.add_argument("--tolerance-profile", choices=sorted(TOLERANCES))
    return ap


def _error(kind: str, message: str, code: int = 2) -> int:
    print(json.dumps({"error": kind, "message": message, "artifact_version": __version__}, sort_keys=True))
    return code


def load_config(command: str, args) -> ExperimentConfig:
    data: dict[str, Any] = {}
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    if command != "validate-config":
        if data.get("kind", command) != command:
            raise ConfigError(f"config kind {data['kind']!r} does not match subcommand {command!r}")
        data["kind"] = command
    elif "kind" not in data:
        raise ConfigError("config has no 'kind'")
    for flag, key in (("out", "out"), ("seed", "seed"), ("parallel", "parallel"),
                      ("tolerance_profile", "tolerance_profile")):
        v = getattr(args, flag)
        if v is not None:
            data[key] = v
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.command, args)
    except ConfigError as exc:
        return _error("invalid_config", str(exc))
    if args.command == "validate-config":
        print(json.dumps({"valid": True, **_stamp(cfg), "config": cfg.to_dict()}, indent=2, sort_keys=True))
        return 0
    try:
        summary = run(cfg)
    except ConfigError as exc:
        return _error("invalid_config", str(exc))
    except (DomainError, ValueError) as exc:
        return _error(type(exc).__name__, str(exc))
    print((output_dir(cfg) / "report.txt").read_text(), end="")
    return 0 if summary["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())

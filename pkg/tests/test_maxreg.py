import math

import numpy as np
import pytest
from scipy import integrate

from conftest import direct_mode, mesh
from slipstokes.maxreg import (
    EnsembleSpec,
    Forcing,
    energy_inequality,
    ensemble_report,
    maxreg_ratio,
    momentum_residual,
    mu_shift_check,
    pressure_recover,
    random_forcing,
    solve_inhomogeneous,
)
from slipstokes.operator_core import DomainError, build_box_stokes, build_synthetic


@pytest.fixture(scope="module")
def spec():
    return build_box_stokes(2, 4, 12)


def single_mode(n, i=0, value=1.0):
    a = np.zeros((1, n))
    a[0, i] = value
    return a


def grad_coscos(x):
    """grad(cos x cos y) as a (2, M, M) array."""
    return np.array([-np.sin(x[..., 0]) * np.cos(x[..., 1]), -np.cos(x[..., 0]) * np.sin(x[..., 1])])


# -- solver ------------------------------------------------------------------


def test_constant_forcing_on_lowest_mode(spec):
    f = Forcing.analytic(single_mode(spec.n_modes), [0.0], 3.0)
    tr = solve_inhomogeneous(spec, f, steps=32)
    exact = (1 - np.exp(-2 * tr.times)) / 2
    assert tr.u[0, 0] == 0.0
    assert np.max(np.abs(tr.u[:, 0] - exact)) <= 1e-14
    assert np.max(np.abs(tr.u[:, 1:])) == 0.0
    assert tr.ode_residual() <= 1e-10


def test_sampled_constant_forcing_is_exact(spec):
    t = np.linspace(0, 3.0, 41)
    c = np.zeros((41, spec.n_modes))
    c[:, 0] = 1.0
    tr = solve_inhomogeneous(spec, Forcing.sampled(t, c))
    assert np.max(np.abs(tr.u[:, 0] - (1 - np.exp(-2 * t)) / 2)) <= 1e-14


def test_zero_forcing(spec):
    f = Forcing.analytic(np.zeros((1, spec.n_modes)), [0.0], 1.0)
    for scheme in ("duhamel_exact", "implicit_euler", "crank_nicolson"):
        tr = solve_inhomogeneous(spec, f, scheme=scheme, steps=16)
        assert not np.any(tr.u)
        with pytest.raises(DomainError):
            maxreg_ratio(tr, 2.0, 2.0)


def test_solver_contracts(spec):
    f = Forcing.analytic(single_mode(spec.n_modes), [0.0], 1.0)
    with pytest.raises(DomainError):
        solve_inhomogeneous(spec, f, steps=4)
    with pytest.raises(DomainError):
        solve_inhomogeneous(spec, f, scheme="rk4")
    with pytest.raises(DomainError):
        Forcing.sampled([0.0, 0.5, 0.4, 1.0], np.zeros((4, 2)))
    with pytest.raises(DomainError):
        Forcing.sampled([0.1, 1.0], np.zeros((2, 2)))


def test_analytic_duhamel_residual_on_nonnormal_operator():
    A = build_synthetic(np.geomspace(1, 200, 15), 10.0, 2)
    rng = np.random.default_rng(1)
    f = Forcing.analytic(rng.standard_normal((3, 15)), [0.0, -1.5, 2.0 + 1j], 2.0)
    tr = solve_inhomogeneous(A, f, steps=40)
    assert tr.ode_residual() <= 1e-10
    # compare with a stiff ODE integrator on one row
    sol = integrate.solve_ivp(
        lambda t, y: f.modal_at(t)[0] - A.matrix @ y, (0, 2.0), np.zeros(15, complex),
        method="DOP853", rtol=1e-12, atol=1e-14, t_eval=tr.times,
    )
    assert np.max(np.abs(sol.y.T - tr.u)) <= 1e-8 * np.max(np.abs(tr.u))


def _scheme_errors(spec, scheme, steps_list):
    rng = np.random.default_rng(5)
    tf = np.linspace(0, 1.0, 2049)
    # smooth random forcing sampled finely, so the reference is the exact solve
    w = rng.standard_normal((3, spec.n_modes))
    coeffs = np.sin(np.outer(tf, [1.0, 2.0, 3.0])) @ w
    f = Forcing.sampled(tf, coeffs)
    ref = solve_inhomogeneous(spec, f)
    errs = []
    for n in steps_list:
        tr = solve_inhomogeneous(spec, f, scheme=scheme, steps=n)
        idx = np.searchsorted(ref.times, tr.times)
        errs.append(np.max(np.abs(tr.u - ref.u[idx])))
    return errs


def test_implicit_euler_first_order(spec):
    errs = _scheme_errors(spec, "implicit_euler", (32, 64, 128, 256))
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert min(orders) >= 0.9


def test_crank_nicolson_second_order(spec):
    errs = _scheme_errors(spec, "crank_nicolson", (32, 64, 128))
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert min(orders) >= 1.8


# -- ratios ------------------------------------------------------------------


def _scalar_ratio_oracle(lam, T):
    """(int |u'|^2 + |lam u|^2) / int 1 for u' + lam u = 1, u(0) = 0."""
    num, _ = integrate.quad(lambda t: math.exp(-2 * lam * t) + (1 - math.exp(-lam * t)) ** 2, 0, T,
                            epsabs=1e-14, epsrel=1e-13, limit=200)
    return num / T


@pytest.fixture(scope="module")
def box3_wide():
    return build_box_stokes(3, 7, 16)


@pytest.mark.parametrize("lam", [2.0, 3.0, 50.0])
def test_single_mode_ratio_matches_quadrature(box3_wide, lam):
    i = int(np.flatnonzero(box3_wide.eigenvalues == lam)[0])
    f = Forcing.analytic(single_mode(box3_wide.n_modes, i), [0.0], 5.0)
    tr = solve_inhomogeneous(box3_wide, f, steps=4000)
    r = maxreg_ratio(tr, 2.0, 2.0)
    assert r == pytest.approx(_scalar_ratio_oracle(lam, 5.0), rel=1e-5)
    assert r < 1.0
    # the weights cancel for a single mode
    for scale in ("weak", "very_weak"):
        assert maxreg_ratio(tr, 2.0, 2.0, scale) == pytest.approx(r, rel=1e-12)


def test_ratio_scale_invariance(spec):
    rng = np.random.default_rng(0)
    f = Forcing.analytic(rng.standard_normal((2, spec.n_modes)), [0.5, -2.0], 1.0)
    for p, q in ((2, 2), (2, 4), (4, 2)):
        for scale in ("strong", "weak", "very_weak"):
            r1 = maxreg_ratio(solve_inhomogeneous(spec, f), p, q, scale)
            r2 = maxreg_ratio(solve_inhomogeneous(spec, f.scaled(37.5)), p, q, scale)
            assert abs(r2 - r1) <= 1e-12 * r1


def test_ratio_exponent_contract(spec):
    tr = solve_inhomogeneous(spec, Forcing.analytic(single_mode(spec.n_modes), [0.0], 1.0))
    with pytest.raises(DomainError):
        maxreg_ratio(tr, 1.0, 2.0)
    with pytest.raises(DomainError):
        maxreg_ratio(tr, 2.0, 2.0, "medium")


def test_energy_inequality_on_random_members(spec):
    ens = EnsembleSpec()
    for seed in range(6):
        f = random_forcing(spec, ens, 1.0, 32, seed, raw=bool(seed % 2))
        au, pf = energy_inequality(solve_inhomogeneous(spec, f))
        assert au <= pf


# -- mu shift ----------------------------------------------------------------


def test_mu_shift_identity(spec):
    rng = np.random.default_rng(2)
    f = Forcing.analytic(rng.standard_normal((2, spec.n_modes)), [0.5, -2.0], 1.0)
    for mu in (0.1, 1.0, 10.0):
        assert mu_shift_check(spec, f, mu) <= 1e-9
    assert mu_shift_check(spec, f, 1e8) <= 1e-12


def test_mu_shift_single_mode_closed_form(spec):
    f = Forcing.analytic(single_mode(spec.n_modes), [0.0], 2.0)
    v = solve_inhomogeneous(spec, f.damped(1.0), shift=1.0)
    u = solve_inhomogeneous(spec, f)
    t = u.times
    lam = spec.eigenvalues[0]
    closed = np.exp(-t) * (1 - np.exp(-lam * t)) / lam
    assert np.max(np.abs(v.u[:, 0] - closed)) <= 1e-14
    assert np.max(np.abs(np.exp(-t) * u.u[:, 0] - closed)) <= 1e-14


def test_mu_shift_implicit_euler_converges_at_first_order(spec):
    tf = np.linspace(0, 1.0, 513)
    c = np.outer(np.cos(3 * tf), np.ones(spec.n_modes))
    f = Forcing.sampled(tf, c)
    r64 = mu_shift_check(spec, f, 0.5, steps=64, scheme="implicit_euler")
    r128 = mu_shift_check(spec, f, 0.5, steps=128, scheme="implicit_euler")
    assert 1.6 <= r64 / r128 <= 2.4


# -- pressure ----------------------------------------------------------------


def test_solenoidal_raw_forcing_has_no_pressure(spec):
    t = np.linspace(0, 1, 9)
    vals = np.array([spec.to_grid(np.cos(s) * np.eye(spec.n_modes)[1]).values for s in t])
    f = Forcing.raw(spec, t, vals)
    tr = solve_inhomogeneous(spec, f)
    pr = pressure_recover(f, tr)
    assert np.max(np.abs(pr.coefficients)) <= 1e-12


def test_pure_gradient_forcing():
    spec = build_box_stokes(2, 4, 16)
    x = mesh(2, 16)
    t = np.linspace(0, 1, 17)
    g = 1.0 + np.sin(3 * t)
    vals = np.array([gi * grad_coscos(x) for gi in g])
    f = Forcing.raw(spec, t, vals)
    tr = solve_inhomogeneous(spec, f)
    assert np.max(np.abs(tr.u)) <= 1e-10
    pr = pressure_recover(f, tr)
    target = np.cos(x[..., 0]) * np.cos(x[..., 1])
    target -= target.mean()
    for i, gi in enumerate(g):
        assert np.max(np.abs(pr.grid(i).values[0] - gi * target)) <= 1e-10
    assert momentum_residual(f, tr) <= 1e-10


def test_mixed_forcing_momentum_residual(spec):
    x = mesh(2, spec.M)
    t = np.linspace(0, 1, 65)
    m = spec.modes[2]
    field = direct_mode(m.k, m.amplitude, spec.L, x)
    vals = np.array([np.sin(2 * s) * field + np.cos(s) * grad_coscos(x) for s in t])
    f = Forcing.raw(spec, t, vals)
    tr = solve_inhomogeneous(spec, f)
    assert f.split_residual <= 1e-12
    assert momentum_residual(f, tr) <= 1e-10
    pr = pressure_recover(f, tr)
    assert np.all(np.isfinite(pr.bound_constants)) and np.all(pr.bound_constants > 0)


# -- ensembles ---------------------------------------------------------------


def test_ensemble_needs_fifty_members():
    with pytest.raises(DomainError):
        EnsembleSpec(count=10)


def test_small_ensemble_report():
    rep = ensemble_report(2, EnsembleSpec(count=50, seed=3), 2.0, 2.0, 1.0, resolutions=((3, 8, 16), (6, 16, 32)))
    assert rep.energy_ok
    assert not rep.drift_flags
    assert all(0 < r["ratio"] < math.inf for r in rep.rows)
    assert len(rep.rows) == 100
    assert rep.to_csv().splitlines()[0].startswith("resolution,member,seed")
    assert set(rep.pressure_spread) == set(rep.ensemble_max)

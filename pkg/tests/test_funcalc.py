import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slipstokes.contour import ContourSettings, DunfordContour, TruncationWarning, dunford_apply
from slipstokes.funcalc import (
    KernelError,
    complex_power,
    contour_power,
    embedding_exponent,
    fit_power_bound,
    group_property_residual,
    negative_norm,
    power_operator,
    scaling_conjugation_residual,
    shifted_imaginary_power,
    sobolev_embedding_constant,
    sqrt_domain_ratio,
)
from slipstokes.operator_core import (
    DomainError,
    ModalField,
    SpectrumError,
    build_box_stokes,
    build_synthetic,
    eigen_oracle_apply,
    random_modal_ensemble,
)


def rel(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(b)


def unit(spec, i):
    c = np.zeros(spec.n_modes)
    c[i] = 1.0
    return c


# -- contour -----------------------------------------------------------------


def test_scalar_mode_minus_half():
    s = build_box_stokes(2, 1, 4)
    out = contour_power(s, -0.5, np.array([1.0]))
    assert out[0] == pytest.approx(3**-0.5, rel=1e-12)


def test_diag_149_off_axis_exponent():
    A = build_synthetic([1, 4, 9])
    f = np.array([1.0, -2.0, 0.5])
    z = -0.3 + 2j
    assert rel(contour_power(A, z, f), A.V @ ((1 + A.eigenvalues) ** z * (A.V_inv @ f))) < 1e-8


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("z", [-0.5, -0.25, -0.75, -0.3 + 2j, -0.3 - 2j])
def test_nonnormal_oracle_equivalence(seed, z):
    rng = np.random.default_rng(seed)
    A = build_synthetic(np.geomspace(1, 1e4, 40) * np.exp(0.6j * rng.uniform(-1, 1, 40)), 30.0, seed)
    f = rng.standard_normal(40) + 1j * rng.standard_normal(40)
    assert rel(contour_power(A, z, f), eigen_oracle_apply(A, lambda l: (1 + l) ** z, f)) < 1e-8


def test_error_falls_as_nodes_double():
    A = build_synthetic(np.geomspace(1, 1e4, 30), 10.0, 1)
    f = np.ones(30)
    ex = eigen_oracle_apply(A, lambda l: (1 + l) ** -0.4, f)
    errs = []
    for n in (50, 100, 200, 400):
        C = DunfordContour.for_spectrum(1 + A.eigenvalues, -0.4, node_count=n)
        errs.append(rel(dunford_apply(A, -0.4, f, C), ex))
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-8


def test_exponent_near_minus_one_converges_under_node_sweep():
    A = build_synthetic([1, 4, 9])
    f = np.ones(3)
    ex = eigen_oracle_apply(A, lambda l: (1 + l) ** -0.999, f)
    errs = [
        rel(dunford_apply(A, -0.999, f, DunfordContour.for_spectrum(1 + A.eigenvalues, -0.999, node_count=n)), ex)
        for n in (50, 100, 200, 400)
    ]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-10


def test_contour_contracts():
    with pytest.raises(DomainError):
        DunfordContour(theta0=2.0)
    with pytest.raises(DomainError):
        DunfordContour(theta0=1.0, node_count=4)
    with pytest.raises(DomainError):
        DunfordContour.for_spectrum([2.0, 3.0], 0.2)
    A = build_synthetic([1, 4, 9])
    with pytest.raises(DomainError):
        contour_power(A, -1.2, np.ones(3))
    # rays too tight around a rotated spectrum
    B = build_synthetic([1 + 1j, 4 - 3j])
    with pytest.raises(SpectrumError):
        dunford_apply(B, -0.5, np.ones(2), DunfordContour(theta0=0.2))


def test_narrow_interval_warns():
    A = build_synthetic([1, 4, 9])
    C = DunfordContour(theta0=1.4, node_count=200, u_min=math.log(0.9), u_max=math.log(12.0))
    with pytest.warns(TruncationWarning):
        dunford_apply(A, -0.5, np.ones(3), C)


def test_contour_settings_override():
    A = build_synthetic([1, 4, 9])
    f = np.ones(3)
    ex = eigen_oracle_apply(A, lambda l: (1 + l) ** (-0.5 + 0.3j), f)
    out = complex_power(A, -0.5 + 0.3j, f, ContourSettings(theta0=1.2, node_count=600))
    assert rel(out, ex) < 1e-10


# -- complex powers ----------------------------------------------------------


def test_zero_and_one_exponents(box2):
    c = random_modal_ensemble(box2, 1, 2)[0].coefficients
    assert rel(complex_power(box2, 0.0, c), c) < 1e-12
    assert rel(complex_power(box2, 1.0, c), (1 + box2.eigenvalues) * c) < 1e-15


@pytest.mark.parametrize("z", [0.5, 1.5 - 0.7j, 2.0, -1.0, -1.6 + 0.2j, 3j, 2.3 + 1.1j])
def test_complex_power_matches_oracle(box3, z):
    c = random_modal_ensemble(box3, 1, 5)[0].coefficients
    assert rel(complex_power(box3, z, c), (1 + box3.eigenvalues) ** z * c) < 1e-9


@given(st.floats(-2.5, 2.5), st.floats(-3, 3), st.floats(-2.5, 2.5), st.floats(-3, 3))
def test_power_law_additivity(a, b, c, d):
    A = build_synthetic([1, 4, 9, 30], 5.0, 2)
    f = np.array([1.0, 2.0, -1.0, 0.5])
    z1, z2 = complex(a, b), complex(c, d)
    lhs = complex_power(A, z1, complex_power(A, z2, f))
    assert rel(lhs, complex_power(A, z1 + z2, f)) < 1e-7


def test_kernel_operator_refuses_unshifted_powers():
    Z = build_synthetic([0, 1, 3], 2.0, zero_mode=True)
    with pytest.raises(KernelError):
        complex_power(Z, -0.5, np.ones(3))
    with pytest.raises(KernelError):
        power_operator(Z, 1j)
    # a positive shift is admissible
    out = shifted_imaginary_power(Z, 0.5, 2.0, np.ones(3))
    ex = eigen_oracle_apply(Z, lambda l: (0.5 + l) ** 2j, np.ones(3))
    assert rel(out, ex) < 1e-9


def test_shifted_imaginary_power_at_unit_shift(box2):
    c = random_modal_ensemble(box2, 1, 0)[0].coefficients
    assert rel(shifted_imaginary_power(box2, 1.0, 2.5, c), complex_power(box2, 2.5j, c)) < 1e-10
    assert rel(shifted_imaginary_power(box2, 7.0, 0.0, c), c) < 1e-12


@pytest.mark.parametrize("lam", [1e-3, 3.0, 1e3])
def test_shifted_imaginary_power_oracle(box2, lam):
    c = random_modal_ensemble(box2, 1, 1)[0].coefficients
    ex = (lam + box2.eigenvalues) ** (4j) * c
    assert rel(shifted_imaginary_power(box2, lam, 4.0, c), ex) < 1e-9


def test_field_types_round_trip(box2):
    u = random_modal_ensemble(box2, 1, 3)[0]
    out = complex_power(box2, -0.5, u)
    assert isinstance(out, ModalField)
    g = complex_power(box2, -0.5, u.to_grid())
    assert np.allclose(g.values, out.to_grid().values, atol=1e-12)


# -- imaginary powers --------------------------------------------------------


def test_identity_at_s_zero(box2):
    m = power_operator(box2, 0j).multipliers
    assert np.max(np.abs(m - 1)) <= 1e-10


def test_l2_unit_norms_on_box(box3):
    for s in (-8, -3, 1, 8):
        m = power_operator(box3, complex(0, s)).multipliers
        assert np.max(np.abs(np.abs(m) - 1)) <= 1e-9


def test_group_property(box2):
    c = random_modal_ensemble(box2, 1, 4)[0].coefficients
    assert group_property_residual(box2, 1.3, 0.0, c) <= 1e-10
    assert group_property_residual(box2, 2.0, -2.0, c) <= 1e-7
    A = build_synthetic(np.geomspace(1, 100, 12), 20.0, 3)
    assert group_property_residual(A, 3.0, -1.5, np.ones(12), p=4.0) <= 1e-7


def test_fit_p2_box_is_flat(box2):
    fit = fit_power_bound(box2, 0.0, 2.0, np.linspace(-8, 8, 9))
    assert fit.M == pytest.approx(1.0, abs=1e-9)
    assert fit.theta_eff == pytest.approx(0.0, abs=1e-9)


def test_fit_p4_has_subright_angle():
    spec = build_box_stokes(2, 4, 10)
    fit = fit_power_bound(spec, 0.0, 4.0, np.linspace(-8, 8, 5))
    assert math.isfinite(fit.M) and fit.theta_eff < math.pi / 2
    assert fit.residual >= 0


def test_fit_contracts(box2):
    with pytest.raises(DomainError):
        fit_power_bound(box2, 0.0, 2.0, [0, 1, 2, 8])
    with pytest.raises(DomainError):
        fit_power_bound(box2, 0.0, 2.0, [-4, 0, 4])


# -- scaling -----------------------------------------------------------------


def test_scaling_identity_at_mu_one(box2):
    f = random_modal_ensemble(box2, 1, 0)[0].coefficients
    assert scaling_conjugation_residual(box2, 1.0, -0.5, f) <= 1e-12


@pytest.mark.parametrize("mu", [2.0, 5.0])
@pytest.mark.parametrize("z", [-0.5, 1j, 1 + 1j])
def test_scaling_identity(box2, mu, z):
    f = random_modal_ensemble(box2, 1, 1)[0].coefficients
    assert scaling_conjugation_residual(box2, mu, z, f) <= 1e-8


def test_scaling_single_mode_value():
    s = build_box_stokes(2, 1, 8)
    mu = 2.0
    # on the dilated box the mode has eigenvalue 2/mu^2, so (1 + mu^2 lam) = 3
    s_mu = build_box_stokes(2, 1, 8, mu * math.pi)
    direct = (1 + mu**2 * s_mu.eigenvalues[0]) ** -0.5
    assert direct == pytest.approx(3**-0.5)
    assert complex_power(s, -0.5, np.array([1.0]))[0] == pytest.approx(direct, rel=1e-12)


# -- fractional domains ------------------------------------------------------


def test_sqrt_ratio_single_mode_closed_form(box2):
    for i in (0, 3, box2.n_modes - 1):
        lam = box2.eigenvalues[i]
        lo, hi = sqrt_domain_ratio(box2, [unit(box2, i)], 2.0)
        expected = math.sqrt(1 + lam) / (1 + math.sqrt(lam / 2))
        assert lo == pytest.approx(expected, rel=1e-8)
        assert hi == lo


def test_embedding_exponent():
    assert embedding_exponent(2.0, 0.5) == pytest.approx(6.0)
    assert embedding_exponent(2.0, 1e-9) == pytest.approx(2.0, rel=1e-8)
    with pytest.raises(DomainError):
        embedding_exponent(2.0, 0.75)


def test_embedding_constant_finite(box3):
    ens = random_modal_ensemble(box3, 4, 0)
    c = sobolev_embedding_constant(box3, 0.5, 2.0, ens)
    assert 0 < c < math.inf
    with pytest.raises(DomainError):
        sobolev_embedding_constant(build_box_stokes(2, 3, 8), 0.5, 2.0, ens)


def test_negative_norm(box2):
    i = 2
    lam = box2.eigenvalues[i]
    assert negative_norm(unit(box2, i), 1, 2.0, box2) == pytest.approx((1 + lam) ** -0.5, rel=1e-10)
    assert negative_norm(unit(box2, i), 2, 2.0, box2) == pytest.approx(1 / (1 + lam), rel=1e-10)
    with pytest.raises(DomainError):
        negative_norm(unit(box2, i), 0, 2.0, box2)


def test_negative_norm_duality(box2):
    # |<f, g>| <= ||(I+A)^{-1/2} f||_2 ||(I+A)^{1/2} g||_2
    rng = np.random.default_rng(8)
    for _ in range(5):
        f = rng.standard_normal(box2.n_modes)
        g = rng.standard_normal(box2.n_modes)
        lhs = abs(f @ g)
        rhs = negative_norm(f, 1, 2.0, box2) * box2.norm(complex_power(box2, 0.5, g), 2.0)
        assert lhs <= rhs * (1 + 1e-12)


def test_no_warnings_at_default_settings(box3):
    c = random_modal_ensemble(box3, 1, 0)[0].coefficients
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        complex_power(box3, -0.5 + 8j, c)

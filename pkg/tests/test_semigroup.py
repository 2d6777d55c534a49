import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slipstokes.operator_core import DomainError, build_box_stokes, build_synthetic, random_modal_ensemble
from slipstokes.semigroup import (
    NarrowbandWarning,
    broadband_initial,
    decay_rate,
    evolve,
    rate_window,
    smoothing_rate,
    time_derivative,
)


def test_evolve_identity_and_single_mode(box2):
    c = random_modal_ensemble(box2, 1, 0)[0].coefficients
    assert np.array_equal(evolve(box2, c, 0.0), c)
    e = np.zeros(box2.n_modes)
    e[0] = 1.0
    assert evolve(box2, e, 0.5)[0] == pytest.approx(math.exp(-1.0), rel=1e-15)
    with pytest.raises(DomainError):
        evolve(box2, c, -1.0)


@given(st.lists(st.floats(0.0, 3.0), min_size=2, max_size=8))
def test_contraction_and_monotone_decay(ts):
    spec = build_box_stokes(2, 4, 10)
    c = random_modal_ensemble(spec, 1, 7)[0].coefficients
    ts = sorted(ts)
    norms = [spec.norm(evolve(spec, c, t), 2.0) for t in ts]
    assert norms[0] <= spec.norm(c, 2.0) * (1 + 1e-14)
    assert all(b <= a * (1 + 1e-14) for a, b in zip(norms, norms[1:]))


def test_central_difference_second_order(box2):
    c = random_modal_ensemble(box2, 1, 3)[0].coefficients
    t = 0.2
    exact = time_derivative(box2, c, t)
    hs = [0.02 / 2**k for k in range(5)]
    errs = [
        np.linalg.norm((evolve(box2, c, t + h) - evolve(box2, c, t - h)) / (2 * h) - exact)
        for h in hs
    ]
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert min(orders) >= 1.9


def test_time_derivative_multiplier(box2):
    c = random_modal_ensemble(box2, 1, 4)[0].coefficients
    lam = box2.eigenvalues
    got = time_derivative(box2, c, 0.1, m=2, n=1)
    assert np.allclose(got, lam**2 * lam * np.exp(-0.1 * lam) * c, rtol=1e-14)


def test_lowest_mode_decays_at_its_eigenvalue():
    s = build_box_stokes(2, 3, 8)
    e = np.zeros(s.n_modes)
    e[0] = 1.0
    assert decay_rate(s, e) == pytest.approx(2.0, rel=1e-10)


def test_two_mode_mixture_rate_tends_to_lowest():
    s = build_box_stokes(2, 3, 8)
    c = np.zeros(s.n_modes)
    c[0] = c[1] = 1.0
    assert s.eigenvalues[1] == pytest.approx(5.0)
    near = decay_rate(s, c, (1.5, 2.0))
    far = decay_rate(s, c, (3.0, 10.0))
    assert abs(far - 2.0) < abs(near - 2.0)
    assert far == pytest.approx(2.0, rel=1e-4)


def test_zero_mode_does_not_decay():
    Z = build_synthetic([0, 1, 3], 2.0, zero_mode=True)
    assert decay_rate(Z, np.ones(3)) == 0.0
    # without the kernel component the decay resumes
    c = Z.V @ np.array([0.0, 1.0, 1.0])
    assert decay_rate(Z, c) == pytest.approx(1.0, rel=1e-4)


def test_narrowband_datum_warns():
    s = build_box_stokes(2, 3, 8)
    c = np.zeros(s.n_modes)
    c[:3] = 1.0
    with pytest.warns(NarrowbandWarning):
        smoothing_rate(s, c, "dt", t_grid=np.geomspace(1e-3, 1e-1, 5))


def test_rate_window_and_contracts(box2):
    with pytest.raises(DomainError):
        rate_window(box2)  # K = 4 leaves no pre-asymptotic window
    spec = build_box_stokes(2, 40, 82)
    t = rate_window(spec)
    lam = spec.eigenvalues
    assert t[0] == pytest.approx(10 / lam.max())
    assert t[-1] == pytest.approx(1 / (10 * lam.min()))
    u0 = broadband_initial(spec)
    with pytest.raises(DomainError):
        smoothing_rate(spec, u0, "bogus")
    with pytest.raises(DomainError):
        smoothing_rate(spec, u0, "dt", t_grid=[0.1, 0.2])


def test_broadband_rates_2d():
    spec = build_box_stokes(2, 120, 242)
    u0 = broadband_initial(spec)
    dt = smoothing_rate(spec, u0, "dt")
    strain = smoothing_rate(spec, u0, "strain")
    assert dt.slope == pytest.approx(-1.0, rel=0.15)
    assert strain.slope == pytest.approx(-0.5, rel=0.15)
    assert dt.delta == pytest.approx(2.0)
    assert dt.to_csv().startswith("t,value\n")

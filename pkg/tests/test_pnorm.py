import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slipstokes.pnorm import DenseMap, DiagonalMap, IdentityMap, operator_pnorm_estimate


def test_identity_is_exactly_one():
    for p in (1.5, 2.0, 4.0):
        assert operator_pnorm_estimate(IdentityMap(7), p) == 1.0


def test_diagonal_scaling_by_three_on_one_mode():
    m = np.ones(6)
    m[2] = 3.0
    est = operator_pnorm_estimate(DiagonalMap(m), 2.0, hilbert_exact=False)
    assert est == pytest.approx(3.0, abs=1e-6)


def test_hilbert_shortcut_matches_svd():
    rng = np.random.default_rng(3)
    T = rng.standard_normal((50, 50)) + 1j * rng.standard_normal((50, 50))
    exact = np.linalg.svd(T, compute_uv=False)[0]
    assert operator_pnorm_estimate(DenseMap(T), 2.0) == pytest.approx(exact, rel=1e-12)
    iterated = operator_pnorm_estimate(DenseMap(T), 2.0, budget=10, hilbert_exact=False, tol=1e-10, max_iter=3000)
    assert iterated <= exact * (1 + 1e-12)
    assert iterated == pytest.approx(exact, rel=1e-4)


@given(st.floats(1.2, 6.0), st.integers(0, 10_000))
def test_diagonal_norm_is_max_modulus_for_every_p(p, seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    est = operator_pnorm_estimate(DiagonalMap(m), p, hilbert_exact=False, seed=seed)
    assert est == pytest.approx(np.max(np.abs(m)), rel=1e-6)


@given(st.floats(1.2, 6.0), st.integers(0, 10_000))
def test_dense_estimate_within_riesz_thorin_bracket(p, seed):
    rng = np.random.default_rng(seed)
    T = rng.standard_normal((12, 12))
    est = operator_pnorm_estimate(DenseMap(T), p, seed=seed)
    col = np.abs(T).sum(axis=0).max()  # l^1 operator norm
    row = np.abs(T).sum(axis=1).max()  # l^inf operator norm
    upper = col ** (1 / p) * row ** (1 - 1 / p)
    lower = max(np.linalg.norm(T[:, j], p) for j in range(12))
    assert est <= upper * (1 + 1e-12)
    assert est >= lower * (1 - 1e-9)


def test_budget_and_exponent_contracts():
    with pytest.raises(ValueError):
        operator_pnorm_estimate(IdentityMap(3), 2.0, budget=5)
    with pytest.raises(ValueError):
        operator_pnorm_estimate(IdentityMap(3), 1.0)

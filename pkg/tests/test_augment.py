import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixbicluster.augment import (IRLSConvergenceError, RankDeficientError, augment_binary,
                                  augment_column, augment_continuous, augment_matrix,
                                  augment_ordinal, beta_loglik, beta_score, check_cutoffs,
                                  default_cutoffs, irls_beta_fit, sample_cutoffs, working_beta,
                                  working_beta_gradient, working_count)
from mixbicluster.data import BINARY, CONTINUOUS, COUNT, PROPORTION, MixedMatrix, ordinal
from mixbicluster.mathcore import logistic, trigamma

from oracles import beta_ml_golden, truncnorm_mean

GAMMA5 = np.array([-np.inf, -1.0, 0.0, 1.0, 2.0, np.inf])


def test_binary_support_and_mean():
    g = np.random.default_rng(0)
    z1 = augment_binary(np.ones(300_000), 0.0, 0.0, g)
    z0 = augment_binary(np.zeros(1000), 0.4, -0.1, g)
    assert np.all(z1.z > 0) and np.all(z0.z < 0)
    assert np.all(z1.var == 1.0)
    assert z1.z.mean() == pytest.approx(math.sqrt(2 / math.pi), abs=0.003)


def test_ordinal_support_and_mean():
    g = np.random.default_rng(1)
    z = augment_ordinal(np.full(300_000, 3), 0.0, 0.0, GAMMA5, g).z
    assert np.all((z > 0) & (z < 1))
    assert z.mean() == pytest.approx(0.4598, abs=0.003)
    assert z.mean() == pytest.approx(truncnorm_mean(0.0, 1.0), abs=0.003)
    assert np.all(augment_ordinal(np.ones(100), 0.5, 0.0, GAMMA5, g).z < -1)
    assert np.all(augment_ordinal(np.full(100, 5), 0.5, 0.0, GAMMA5, g).z > 2)


def test_default_cutoffs():
    assert np.array_equal(default_cutoffs(5), GAMMA5)
    assert np.array_equal(default_cutoffs(2), [-np.inf, -1.0, np.inf])
    check_cutoffs(default_cutoffs(7))
    with pytest.raises(ValueError):
        check_cutoffs(np.array([-np.inf, -1.0, 0.5, 0.5, np.inf]))


def test_cutoffs_examples():
    g = np.random.default_rng(2)
    gam = np.array([-np.inf, -1.0, np.inf])
    out, skips = sample_cutoffs(np.array([-2.0, 0.5]), np.array([1, 2]), gam, g)
    assert np.array_equal(out, gam) and skips == 0
    # level-2 max -0.3, level-3 min 0.4, neighbours -1 and inf
    gam = np.array([-np.inf, -1.0, 0.0, np.inf])
    for _ in range(50):
        out, _ = sample_cutoffs(np.array([-0.3, -0.8, 0.4, 1.2]), np.array([2, 2, 3, 3]), gam, g)
        assert -0.3 <= out[2] <= 0.4
    out, _ = sample_cutoffs(np.array([0.2, 0.2]), np.array([2, 3]), gam, g)
    assert out[2] == 0.2


def test_cutoffs_inverted_interval_skips():
    g = np.random.default_rng(3)
    gam = np.array([-np.inf, -1.0, 0.0, np.inf])
    out, skips = sample_cutoffs(np.array([0.5, 0.1]), np.array([2, 3]), gam, g)
    assert skips == 1 and out[2] == 0.0


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 7), st.integers(0, 10_000))
def test_cutoffs_stay_monotone(L, seed):
    g = np.random.default_rng(seed)
    gam = default_cutoffs(L)
    x = g.integers(1, L + 1, size=60)
    for _ in range(5):
        z = augment_ordinal(x, g.normal(size=60), 0.0, gam, g).z
        gam, _ = sample_cutoffs(z, x, gam, g)
        assert np.all(np.diff(gam) > 0)
        assert gam[1] == -1.0
        lo, hi = gam[x - 1], gam[x]
        assert np.all((z >= lo) & (z <= hi))


def test_working_count_examples():
    z, v = working_count(0, 0.0, 0.0)
    assert z == pytest.approx(-1.0) and v == pytest.approx(1.0)
    z, v = working_count(3, 0.0, math.log(2))
    assert z == pytest.approx(1.1931, abs=1e-4) and v == pytest.approx(0.5)
    eta = 0.7
    z, _ = working_count(math.exp(eta), 0.2, eta - 0.2)
    assert z == pytest.approx(eta)


def test_working_beta_examples():
    assert working_beta(0.5, 0.0, 7.3).z == pytest.approx(0.0, abs=1e-12)
    z, v = working_beta(0.7, 0.0, 2.0)
    assert z == pytest.approx(0.5151, abs=1e-4)
    assert v == pytest.approx(1.2158, abs=1e-4)
    with pytest.raises(FloatingPointError):
        working_beta(0.5, 40.0, 1.0)


def test_working_beta_matches_formula():
    y, eta, phi = 0.23, -0.4, 19.43
    mu = logistic(eta)
    tri = trigamma(mu * phi) + trigamma((1 - mu) * phi)
    D = phi * tri * mu * (1 - mu)
    assert 1 / working_beta_gradient(mu, phi) == pytest.approx(D)
    assert working_beta(y, eta, phi).var == pytest.approx(1 / (phi**2 * (mu * (1 - mu))**2 * tri))


@settings(max_examples=300)
@given(mu=st.floats(1e-4, 1 - 1e-4), phi=st.floats(0.05, 1e5))
def test_gradient_bound_property(mu, phi):
    g = working_beta_gradient(mu, phi)
    assert np.isfinite(g) and 0 < g <= phi / 2 + 1e-9


@settings(max_examples=200)
@given(y=st.floats(1e-6, 1 - 1e-6), eta=st.floats(-10, 10), phi=st.floats(0.1, 1e4))
def test_working_beta_positive_finite_var(y, eta, phi):
    z, v = working_beta(y, eta, phi)
    assert np.isfinite(z) and np.isfinite(v) and v > 0


def test_continuous():
    z, v = augment_continuous(1.0 + 6.27, 6.27, 2.14)
    assert z == pytest.approx(1.0) and v == pytest.approx(4.5796)
    assert np.all(augment_continuous(np.full(4, 3.3), 3.3, 1.0).z == 0)


def test_beta_loglik_is_density():
    from scipy import integrate
    for mu, phi in [(0.3, 5.0), (0.8, 19.43)]:
        val, _ = integrate.quad(lambda y: math.exp(beta_loglik(y, mu, phi)), 0, 1)
        assert val == pytest.approx(1.0, abs=1e-8)


def _mixed(n=30, seed=0):
    g = np.random.default_rng(seed)
    X = np.column_stack([g.integers(0, 2, n), g.integers(1, 6, n), g.uniform(0.05, 0.95, n),
                         g.normal(6, 2, n), g.poisson(2, n), g.integers(1, 4, n)]).astype(float)
    return MixedMatrix(X, (BINARY, ordinal(5), PROPORTION, CONTINUOUS, COUNT, ordinal(3)))


def test_augment_matrix_equals_columnwise_dispatch():
    m = _mixed()
    g = np.random.default_rng(5)
    alpha = g.normal(size=m.p)
    theta = g.normal(size=(m.n, m.p))
    u = g.random((m.n, m.p))
    cut = {5: GAMMA5, 3: default_cutoffs(3)}
    Z, V = augment_matrix(m, alpha, theta, u, phi=4.0, tau=1.7, cutoffs=cut)
    for j, t in enumerate(m.types):
        wv = augment_column(m.values[:, j], t, alpha[j], theta[:, j], u=u[:, j], phi=4.0,
                            tau=1.7, gamma=cut.get(t.levels))
        assert np.allclose(Z[:, j], wv.z, rtol=1e-14, atol=1e-14)
        assert np.allclose(V[:, j], wv.var, rtol=1e-14, atol=1e-14)
    assert np.all(np.sign(Z[:, 0]) == np.where(m.values[:, 0] == 1, 1, -1))
    assert np.array_equal(Z[:, 3], m.values[:, 3] - alpha[3])
    assert np.all((V > 0) & np.isfinite(V))
    # column order independence: permuting columns permutes the output
    perm = g.permutation(m.p)
    mp = MixedMatrix(m.values[:, perm], tuple(m.types[k] for k in perm))
    Zp, _ = augment_matrix(mp, alpha[perm], theta[:, perm], u[:, perm], phi=4.0, tau=1.7, cutoffs=cut)
    assert np.array_equal(Zp, Z[:, perm])


def test_proportion_dispatch_matches_working_beta():
    y = np.array([0.1, 0.5, 0.93])
    wv = augment_column(y, PROPORTION, 0.0, np.zeros(3), phi=3.0)
    assert np.allclose(wv.z, working_beta(y, 0.0, 3.0).z)


def _beta_problem(g, m=200, beta=(0.5, -1.0), phi=20.0):
    X = np.column_stack([np.ones(m), g.normal(size=m)])
    mu = logistic(X @ np.array(beta))
    y = np.clip(g.beta(mu * phi, (1 - mu) * phi), 1e-6, 1 - 1e-6)
    return y, X


def test_irls_symmetric_fixed_point():
    fit = irls_beta_fit(np.full(10, 0.5), np.ones((10, 1)), 3.0)
    assert fit.converged and abs(fit.coefficients[0]) < 1e-12


def test_irls_matches_golden_section_oracle():
    g = np.random.default_rng(11)
    for _ in range(3):
        y, X = _beta_problem(g)
        fit = irls_beta_fit(y, X, 20.0)
        ref = beta_ml_golden(y, X, 20.0, center=(0.5, -1.0))
        assert np.max(np.abs(fit.coefficients - ref)) <= 1e-3


def test_irls_zeroes_the_score():
    g = np.random.default_rng(12)
    y, X = _beta_problem(g, m=300)
    fit = irls_beta_fit(y, X, 20.0)
    assert np.max(np.abs(beta_score(y, X, fit.coefficients, 20.0))) <= 1e-6
    assert fit.final_score_norm <= 1e-6


def test_irls_calibration():
    g = np.random.default_rng(13)
    hits = 0
    for _ in range(50):
        y, X = _beta_problem(g, m=500)
        b = irls_beta_fit(y, X, 20.0).coefficients
        hits += np.all(np.abs(b - [0.5, -1.0]) <= 0.15)
    assert hits >= 45


def test_irls_errors():
    g = np.random.default_rng(14)
    y, X = _beta_problem(g, m=50)
    with pytest.raises(RankDeficientError):
        irls_beta_fit(y, np.column_stack([X, 2 * X[:, 1]]), 20.0)
    with pytest.raises(IRLSConvergenceError) as info:
        irls_beta_fit(y, X, 20.0, tol=1e-300, maxit=2)
    assert info.value.coefficients.shape == (2,) and info.value.iterations == 2
    with pytest.raises(ValueError):
        irls_beta_fit(np.append(y[:-1], 1.0), X, 20.0)

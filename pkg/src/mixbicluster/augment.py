"""Latent-variable and working-value augmentation for each data type.

Every observed entry x_ij is replaced by a Gaussian pseudo-observation z_ij
with a known variance, so that z_ij ~ N(alpha_j + theta_ik, var_ij) holds
(exactly for probit types, approximately for the GLM working values). The
beta-regression working value is also exposed as a standalone IRLS fitter.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy import linalg, special

from .data import Kind, MixedMatrix
from .mathcore import digamma, logistic, logit, trigamma, truncnorm_ppf

ETA_CLIP = 15.0


class WorkingValue(NamedTuple):
    z: np.ndarray
    var: np.ndarray


class RankDeficientError(np.linalg.LinAlgError):
    pass


class IRLSConvergenceError(RuntimeError):
    def __init__(self, msg, coefficients, iterations):
        super().__init__(msg)
        self.coefficients = coefficients
        self.iterations = iterations


def default_cutoffs(levels: int) -> np.ndarray:
    """(-inf, -1, 0, 1, ..., L-3, inf): gamma_1 = -1 fixed, unit spacing above it."""
    if levels < 2:
        raise ValueError("need at least 2 levels")
    inner = -1.0 + np.arange(levels - 1, dtype=float)
    return np.concatenate(([-np.inf], inner, [np.inf]))


def check_cutoffs(gamma: np.ndarray) -> None:
    gamma = np.asarray(gamma)
    if gamma.size < 3 or gamma[0] != -np.inf or gamma[-1] != np.inf or gamma[1] != -1.0:
        raise ValueError("cutoffs must have gamma_0 = -inf, gamma_1 = -1, gamma_L = inf")
    if np.any(np.diff(gamma) <= 0):
        raise ValueError("cutoffs must be strictly increasing")


def _binary_bounds(x):
    x = np.asarray(x)
    lo = np.where(x == 1, 0.0, -np.inf)
    hi = np.where(x == 1, np.inf, 0.0)
    return lo, hi


def augment_binary(x, alpha, theta, rng: np.random.Generator) -> WorkingValue:
    """Albert-Chib latent: N(alpha+theta, 1) on (0, inf) if x = 1, on (-inf, 0) if x = 0."""
    x = np.asarray(x)
    mean = np.broadcast_to(np.asarray(alpha, float) + np.asarray(theta, float), x.shape)
    return _binary_from_uniform(x, mean, rng.random(x.shape))


def _binary_from_uniform(x, mean, u):
    lo, hi = _binary_bounds(x)
    z = truncnorm_ppf(u, mean, 1.0, lo, hi)
    return WorkingValue(np.asarray(z, float), np.ones(np.shape(z)))


def augment_ordinal(x, alpha, theta, gamma, rng: np.random.Generator) -> WorkingValue:
    """N(alpha+theta, 1) truncated to (gamma_{l-1}, gamma_l) for observed level l."""
    x = np.asarray(x)
    mean = np.broadcast_to(np.asarray(alpha, float) + np.asarray(theta, float), x.shape)
    return _ordinal_from_uniform(x, mean, gamma, rng.random(x.shape))


def _ordinal_from_uniform(x, mean, gamma, u):
    gamma = np.asarray(gamma, dtype=float)
    lvl = np.asarray(x).astype(np.int64)
    z = truncnorm_ppf(u, mean, 1.0, gamma[lvl - 1], gamma[lvl])
    return WorkingValue(np.asarray(z, float), np.ones(np.shape(z)))


def sample_cutoffs(z, x, gamma, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Gibbs update of the free ordinal cutoffs gamma_2 .. gamma_{L-1}.

    Each free cutoff is uniform between the largest latent at its level (or
    the cutoff below) and the smallest latent at the next level (or the
    cutoff above). Returns the new cutoffs and the number of skipped updates
    (numerically empty intervals keep the previous value).
    """
    gamma = np.array(gamma, dtype=float)
    z = np.asarray(z, dtype=float).ravel()
    lvl = np.asarray(x).astype(np.int64).ravel()
    levels = gamma.size - 1
    skips = 0
    for l in range(2, levels):
        at_l = z[lvl == l]
        above = z[lvl == l + 1]
        lo = max(at_l.max() if at_l.size else -np.inf, gamma[l - 1])
        hi = min(above.min() if above.size else np.inf, gamma[l + 1])
        if lo > hi:
            skips += 1
            continue
        if lo == hi:
            gamma[l] = lo
            continue
        g = rng.uniform(lo, hi)
        if g <= gamma[l - 1]:
            g = np.nextafter(gamma[l - 1], np.inf)
        if g >= gamma[l + 1]:
            g = np.nextafter(gamma[l + 1], -np.inf)
        gamma[l] = g
    return gamma, skips


def working_count(x, alpha, theta) -> WorkingValue:
    """Poisson log-link adjusted dependent variable: z = eta + (x - e^eta) / e^eta, var = e^-eta."""
    eta = np.clip(np.asarray(alpha, float) + np.asarray(theta, float), -ETA_CLIP, ETA_CLIP)
    x = np.asarray(x, dtype=float)
    inv_mu = np.exp(-eta)
    z = eta + x * inv_mu - 1.0
    return WorkingValue(z, np.broadcast_to(inv_mu, np.shape(z)).copy())


def working_beta(y, eta, phi) -> WorkingValue:
    """Working value and approximate variance for the logit-link beta density.

    With mu = logistic(eta), y* = logit(y) and mu* = psi(mu phi) - psi((1-mu) phi),
    z = eta + (y* - mu*) / D where D = phi (psi'(mu phi) + psi'((1-mu) phi)) mu (1-mu),
    and var(z) = 1 / (phi^2 (mu (1-mu))^2 (psi'(mu phi) + psi'((1-mu) phi))).
    """
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if not phi > 0:
        raise ValueError("phi must be positive")
    mu = logistic(eta)
    a = mu * phi
    b = (1.0 - mu) * phi
    if np.any(a < 1e-10) or np.any(b < 1e-10):
        raise FloatingPointError("mu*phi or (1-mu)*phi below 1e-10; clamp the data or eta")
    tri = trigamma(a) + trigamma(b)
    m1m = mu * (1.0 - mu)
    d = phi * tri * m1m
    z = eta + (logit(y) - (digamma(a) - digamma(b))) / d
    var = 1.0 / (phi * phi * m1m * m1m * tri)
    return WorkingValue(z, var)


def working_beta_gradient(mu, phi):
    """d eta / d mu* = 1 / D, bounded above by phi / 2."""
    mu = np.asarray(mu, dtype=float)
    return 1.0 / (phi * (trigamma(mu * phi) + trigamma((1.0 - mu) * phi)) * mu * (1.0 - mu))


def augment_continuous(x, alpha, tau) -> WorkingValue:
    z = np.asarray(x, dtype=float) - alpha
    return WorkingValue(z, np.full(np.shape(z), float(tau) ** 2))


def beta_loglik(y, mu, phi):
    """Log density of the mean/precision beta: exponents mu phi - 1 and (1-mu) phi - 1."""
    a = mu * phi
    b = (1.0 - mu) * phi
    return (special.gammaln(phi) - special.gammaln(a) - special.gammaln(b)
            + (a - 1.0) * np.log(y) + (b - 1.0) * np.log1p(-y))


def augment_column(x, ctype, alpha, theta, *, u=None, phi=1.0, tau=1.0, gamma=None) -> WorkingValue:
    """Type dispatch for one column.

    ``theta`` is the column's latent vector under its current cluster; ``u``
    holds one uniform per entry and is only read for binary/ordinal columns,
    so a column's result never depends on how other columns were drawn.
    """
    kind = ctype.kind
    theta = np.asarray(theta, dtype=float)
    if kind is Kind.BINARY:
        return _binary_from_uniform(x, alpha + theta, u)
    if kind is Kind.ORDINAL:
        return _ordinal_from_uniform(x, alpha + theta, gamma, u)
    if kind is Kind.COUNT:
        return working_count(x, alpha, theta)
    if kind is Kind.PROPORTION:
        return working_beta(x, np.clip(alpha + theta, -ETA_CLIP, ETA_CLIP), phi)
    return augment_continuous(x, alpha, tau)


def augment_matrix(m: MixedMatrix, alpha, theta_cols, u, *, phi=1.0, tau=1.0, cutoffs=None):
    """Vectorised :func:`augment_column` over all columns.

    ``theta_cols`` is n x p (each column's current latent vector) and ``u`` an
    n x p block of uniforms. Returns (Z, V), both n x p; column j equals
    ``augment_column`` on column j with ``u[:, j]``.
    """
    x = m.values
    Z = np.empty_like(x)
    V = np.empty_like(x)
    eta = alpha[None, :] + theta_cols
    kinds = m.kinds
    for kind in Kind:
        cols = np.flatnonzero(kinds == kind)
        if cols.size == 0:
            continue
        if kind is Kind.ORDINAL:
            for L in sorted({m.types[j].levels for j in cols}):
                sub = np.array([j for j in cols if m.types[j].levels == L])
                wv = _ordinal_from_uniform(x[:, sub], eta[:, sub], cutoffs[L], u[:, sub])
                Z[:, sub], V[:, sub] = wv
            continue
        if kind is Kind.BINARY:
            wv = _binary_from_uniform(x[:, cols], eta[:, cols], u[:, cols])
        elif kind is Kind.COUNT:
            wv = working_count(x[:, cols], 0.0, eta[:, cols])
        elif kind is Kind.PROPORTION:
            wv = working_beta(x[:, cols], np.clip(eta[:, cols], -ETA_CLIP, ETA_CLIP), phi)
        else:
            wv = augment_continuous(x[:, cols], alpha[cols][None, :], tau)
        Z[:, cols], V[:, cols] = wv
    return Z, V


class BetaFit(NamedTuple):
    coefficients: np.ndarray
    iterations: int
    converged: bool
    final_score_norm: float


def beta_score(y, X, beta, phi):
    """Score of the logit-link beta log-likelihood in beta (phi held fixed)."""
    mu = logistic(X @ beta)
    ystar = logit(y)
    mustar = digamma(mu * phi) - digamma((1.0 - mu) * phi)
    return phi * X.T @ (mu * (1.0 - mu) * (ystar - mustar))


def irls_beta_fit(y, X, phi, tol=1e-8, maxit=100) -> BetaFit:
    """Fisher scoring for beta regression with logit link and known dispersion.

    Each step regresses the working values on X with weights 1/var; the
    weighted normal equations are solved through a pivoted QR factorisation.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    m, k = X.shape
    if y.shape != (m,):
        raise ValueError("y and X have inconsistent lengths")
    if m <= k:
        raise ValueError("need more observations than coefficients")
    if np.any((y <= 0) | (y >= 1)):
        raise ValueError("y must lie strictly inside (0, 1)")
    _, r, _ = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.min() <= diag.max() * max(m, k) * np.finfo(float).eps:
        raise RankDeficientError("design matrix is not of full column rank")

    beta = np.linalg.lstsq(X, logit(y), rcond=None)[0]
    for it in range(1, maxit + 1):
        eta = np.clip(X @ beta, -ETA_CLIP, ETA_CLIP)
        z, var = working_beta(y, eta, phi)
        sw = 1.0 / np.sqrt(var)
        q, r, piv = linalg.qr(X * sw[:, None], mode="economic", pivoting=True)
        sol = linalg.solve_triangular(r, q.T @ (z * sw))
        new = np.empty(k)
        new[piv] = sol
        step = new - beta
        beta = new
        if np.max(np.abs(step)) < tol:
            score = beta_score(y, X, beta, phi)
            return BetaFit(beta, it, True, float(np.max(np.abs(score))))
    raise IRLSConvergenceError(f"no convergence after {maxit} iterations", beta, maxit)

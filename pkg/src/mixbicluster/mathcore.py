"""Special functions, truncated-normal sampling and seeded random streams.

Everything here works on scalars or numpy arrays. Random draws always go
through an explicit :class:`Rng` / ``numpy.random.Generator``; nothing touches
global random state.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special

# Bernoulli numbers B_2k for the asymptotic series, k = 1..7
_B2K = (1.0 / 6, -1.0 / 30, 1.0 / 42, -1.0 / 30, 5.0 / 66, -691.0 / 2730, 7.0 / 6)
_SHIFT_TO = 6.0
_TAIL_SD = 5.0


class Rng:
    """Splittable seeded random source.

    ``Rng(seed).generator(t, j)`` always returns the same stream for the same
    ``(seed, t, j)``, independent of which other streams were requested
    before, so per-sweep and per-column draws can be taken in any order.
    """

    def __init__(self, seed: int, _key: tuple[int, ...] = ()):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.key = tuple(int(k) for k in _key)

    def child(self, *key: int) -> "Rng":
        return Rng(self.seed, self.key + tuple(key))

    def generator(self, *key: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key + tuple(int(k) for k in key))
        return np.random.Generator(np.random.PCG64(ss))

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, key={self.key})"


def _check_positive(x, name):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError(f"{name} requires x > 0")
    return x


def digamma(x):
    """psi(x) for x > 0: recurrence shift up to x >= 6, then the asymptotic series."""
    x = _check_positive(x, "digamma")
    scalar = x.ndim == 0
    x = np.atleast_1d(x).copy()
    acc = np.zeros_like(x)
    for _ in range(int(_SHIFT_TO)):
        small = x < _SHIFT_TO
        if not small.any():
            break
        acc[small] -= 1.0 / x[small]
        x[small] += 1.0
    inv2 = 1.0 / (x * x)
    series = np.zeros_like(x)
    p = inv2.copy()
    for k, b in enumerate(_B2K, start=1):
        series += b / (2 * k) * p
        p *= inv2
    out = acc + np.log(x) - 0.5 / x - series
    return out[0] if scalar else out


def trigamma(x):
    """psi'(x) for x > 0, same shift-then-series scheme as :func:`digamma`."""
    x = _check_positive(x, "trigamma")
    scalar = x.ndim == 0
    x = np.atleast_1d(x).copy()
    acc = np.zeros_like(x)
    for _ in range(int(_SHIFT_TO)):
        small = x < _SHIFT_TO
        if not small.any():
            break
        acc[small] += 1.0 / (x[small] * x[small])
        x[small] += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = np.zeros_like(x)
    p = inv2 * inv
    for b in _B2K:
        series += b * p
        p *= inv2
    out = acc + inv + 0.5 * inv2 + series
    return out[0] if scalar else out


def std_normal_cdf(x):
    return special.ndtr(x)


def std_normal_quantile(p):
    """Inverse of the standard normal cdf; returns -inf / +inf at p = 0 / 1."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1) | np.isnan(p)):
        raise ValueError("quantile requires p in [0, 1]")
    out = special.ndtri(p)
    return out[()] if out.ndim == 0 else out


def _open_clip(x, lo, hi):
    x = np.where(x <= lo, np.nextafter(lo, np.inf), x)
    return np.where(x >= hi, np.nextafter(hi, -np.inf), x)


def _std_truncnorm_ppf(u, a, b):
    """Inverse cdf of N(0,1) restricted to (a, b), evaluated in log space.

    Intervals lying in the upper half are reflected so the computation always
    happens on the left tail, where ``log_ndtr`` keeps full precision.
    """
    flip = a > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    log_hi = special.log_ndtr(hi)
    log_lo = special.log_ndtr(lo)
    ratio = np.exp(log_lo - log_hi)
    with np.errstate(divide="ignore"):
        logp = log_hi + np.log(u + (1.0 - u) * ratio)
    x = special.ndtri_exp(logp)
    x = _open_clip(x, lo, hi)
    return np.where(flip, -x, x)


def truncnorm_ppf(u, mean, sd, lo, hi):
    """Map uniforms ``u`` in (0, 1) to draws from N(mean, sd^2) truncated to (lo, hi).

    Deterministic given ``u``; used where a fixed number of uniforms per draw
    is needed (column-order independent augmentation).
    """
    u, mean, sd, lo, hi = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (u, mean, sd, lo, hi))
    )
    u = np.clip(u, 1e-300, 1.0 - 2**-53)
    a = (lo - mean) / sd
    b = (hi - mean) / sd
    x = mean + sd * _std_truncnorm_ppf(u, a, b)
    out = _open_clip(x, lo, hi)
    return out[()] if out.ndim == 0 else out


def _exp_rejection_tail(a, b, rng):
    """Standard normal on (a, b) with a >= 5: exponential proposals of rate a."""
    out = np.empty_like(a)
    todo = np.arange(a.size)
    while todo.size:
        aa, bb = a[todo], b[todo]
        width = bb - aa
        u = rng.random(todo.size)
        # inverse cdf of an Exp(aa) truncated to [0, width]
        e = -np.log1p(u * np.expm1(-aa * width)) / aa
        z = aa + e
        accept = rng.random(todo.size) <= np.exp(-0.5 * e * e)
        accept &= (z > aa) & (z < bb)
        out[todo[accept]] = z[accept]
        todo = todo[~accept]
    return out


def sample_truncated_normal(mean, sd, lo, hi, rng: np.random.Generator):
    """Draw from N(mean, sd^2) restricted to the open interval (lo, hi).

    Inverse cdf for ordinary intervals; intervals entirely beyond 5 sd on one
    side use exponential rejection. Broadcasts over array arguments.
    """
    mean, sd, lo, hi = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (mean, sd, lo, hi))
    )
    if np.any(~(sd > 0)):
        raise ValueError("sd must be positive")
    if np.any(~(hi - lo >= 1e-14)):
        raise ValueError("degenerate truncation interval (hi - lo < 1e-14)")
    a = ((lo - mean) / sd).ravel()
    b = ((hi - mean) / sd).ravel()
    z = np.empty(a.size)
    upper = a >= _TAIL_SD
    lower = b <= -_TAIL_SD
    mid = ~(upper | lower)
    if mid.any():
        z[mid] = _std_truncnorm_ppf(rng.random(mid.sum()), a[mid], b[mid])
    if upper.any():
        z[upper] = _exp_rejection_tail(a[upper], b[upper], rng)
    if lower.any():
        z[lower] = -_exp_rejection_tail(-b[lower], -a[lower], rng)
    x = mean.ravel() + sd.ravel() * z
    out = _open_clip(x, lo.ravel(), hi.ravel()).reshape(mean.shape)
    return out[()] if out.ndim == 0 else out


def _require_positive(**params):
    for name, v in params.items():
        if np.any(~(np.asarray(v, dtype=float) > 0)):
            raise ValueError(f"{name} must be positive")


def sample_gamma(shape, rate, rng: np.random.Generator, size=None):
    _require_positive(shape=shape, rate=rate)
    return rng.gamma(shape, 1.0 / np.asarray(rate, dtype=float), size=size)


def sample_beta(a, b, rng: np.random.Generator, size=None):
    _require_positive(a=a, b=b)
    return rng.beta(a, b, size=size)


def sample_poisson(lam, rng: np.random.Generator, size=None):
    _require_positive(lam=lam)
    return rng.poisson(lam, size=size)


def logistic(x):
    return special.expit(x)


def logit(p):
    return special.logit(p)


def log_normal_pdf(x, mean, var):
    return -0.5 * (math.log(2 * math.pi) + np.log(var) + (x - mean) ** 2 / var)

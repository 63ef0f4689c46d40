"""Column partition under a Poisson-Dirichlet (Pitman-Yor) prior, DP-shared latent
atoms, and the Metropolis / conjugate updates of d, phi and tau."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .augment import beta_loglik


@dataclass(frozen=True)
class PdpParams:
    M1: float = 20.0
    d: float = 0.3

    def __post_init__(self):
        if not self.M1 > 0:
            raise ValueError("M1 must be positive")
        if not 0.0 <= self.d < 1.0:
            raise ValueError("d must lie in [0, 1)")


@dataclass(frozen=True)
class DPParams:
    """Mass and N(mu2, tau2sq) base measure of the DP shared by the latent atoms."""

    M2: float = 11.0
    mu2: float = -0.18
    tau2sq: float = 2.2


def pdp_predictive_weights(sizes, d: float, M1: float) -> np.ndarray:
    """Probability of joining each existing cluster, then of opening a new one."""
    sizes = np.asarray(sizes, dtype=float)
    w = np.append(sizes - d, M1 + sizes.size * d)
    return w / w.sum()


def pdp_log_eppf(sizes, d: float, M1: float) -> float:
    """Log probability of a partition with the given block sizes."""
    sizes = np.asarray(sizes, dtype=np.int64)
    q = sizes.size
    p = int(sizes.sum())
    out = -np.sum(np.log(M1 + np.arange(1, p)))
    if q > 1:
        out += np.sum(np.log(M1 + d * np.arange(1, q)))
    for nk in sizes:
        if nk > 1:
            out += np.sum(np.log(np.arange(1, nk) - d))
    return float(out)


def sample_pdp_partition(p: int, M1: float, d: float, rng: np.random.Generator) -> np.ndarray:
    """Sequential (Chinese-restaurant) draw of p labels, 0-based and contiguous."""
    labels = np.empty(p, dtype=np.int64)
    sizes: list[int] = []
    for j in range(p):
        if not sizes:
            k = 0
        else:
            w = pdp_predictive_weights(sizes, d, M1)
            k = int(np.searchsorted(np.cumsum(w), rng.random() * w.sum(), side="right"))
            k = min(k, len(sizes))
        if k == len(sizes):
            sizes.append(0)
        sizes[k] += 1
        labels[j] = k
    return labels


def relabel(labels) -> np.ndarray:
    """Contiguous 0-based labels in order of first appearance."""
    labels = np.asarray(labels)
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inv].astype(np.int64)


@dataclass
class AllocationState:
    """Cluster labels of the p columns.

    ``sizes`` has spare capacity; only ``sizes[:q]`` is live.
    """

    c: np.ndarray
    sizes: np.ndarray
    q: int

    @classmethod
    def from_labels(cls, labels, capacity: int | None = None) -> "AllocationState":
        c = relabel(labels)
        p = c.size
        capacity = max(capacity or p + 1, p + 1)
        sizes = np.zeros(capacity, dtype=np.int64)
        np.add.at(sizes, c, 1)
        return cls(c, sizes, int(c.max()) + 1)

    @property
    def cluster_sizes(self) -> np.ndarray:
        return self.sizes[: self.q].copy()

    def check(self) -> None:
        p = self.c.size
        if self.q < 1 or np.any(self.c < 0) or np.any(self.c >= self.q):
            raise AssertionError("labels outside 0..q-1")
        counts = np.bincount(self.c, minlength=self.q)
        if np.any(counts == 0):
            raise AssertionError("empty cluster among 0..q-1")
        if not np.array_equal(counts, self.sizes[: self.q]) or counts.sum() != p:
            raise AssertionError("size bookkeeping out of sync with labels")


@dataclass
class AtomState:
    """Latent matrix theta (n x q) stored as atom labels into a shared atom table."""

    lab: np.ndarray
    vals: np.ndarray
    cnt: np.ndarray
    n_atoms: int

    @classmethod
    def empty(cls, n: int, p: int, m_aux: int = 3) -> "AtomState":
        cap_k = p + 1
        cap_a = 2 * n * (p + m_aux) + 1
        return cls(np.zeros((n, cap_k), np.int64), np.zeros(cap_a), np.zeros(cap_a, np.int64), 0)

    @classmethod
    def from_theta(cls, theta: np.ndarray, p: int, m_aux: int = 3) -> "AtomState":
        """Build from an explicit n x q matrix; equal values share an atom."""
        n, q = theta.shape
        st = cls.empty(n, p, m_aux)
        uniq, inv = np.unique(theta, return_inverse=True)
        st.vals[: uniq.size] = uniq
        st.lab[:, :q] = inv.reshape(n, q)
        st.cnt[: uniq.size] = np.bincount(inv.ravel(), minlength=uniq.size)
        st.n_atoms = uniq.size
        return st

    def theta(self, q: int) -> np.ndarray:
        return self.vals[self.lab[:, :q]]

    def compact(self, q: int) -> None:
        self.n_atoms = int(_kernels.compact_atoms(q, self.lab, self.vals, self.cnt, self.n_atoms))

    def check(self, q: int) -> None:
        n = self.lab.shape[0]
        live = self.lab[:, :q]
        if live.min() < 0 or live.max() >= self.n_atoms:
            raise AssertionError("cell points outside the atom table")
        counts = np.bincount(live.ravel(), minlength=self.n_atoms)
        if not np.array_equal(counts, self.cnt[: self.n_atoms]):
            raise AssertionError("atom counts out of sync with cell labels")
        if counts.sum() != n * q:
            raise AssertionError("atom counts do not sum to n*q")


def init_atoms(n: int, q: int, p: int, dp: DPParams, rng: np.random.Generator, m_aux: int = 3) -> AtomState:
    """Draw the n x q cells from the prior Polya urn of the atom DP."""
    st = AtomState.empty(n, p, m_aux)
    cells = np.empty(n * q, dtype=np.int64)
    vals: list[float] = []
    for t in range(n * q):
        if rng.random() * (t + dp.M2) < t:
            cells[t] = cells[int(rng.random() * t)]
        else:
            cells[t] = len(vals)
            vals.append(dp.mu2 + math.sqrt(dp.tau2sq) * rng.standard_normal())
    st.vals[: len(vals)] = vals
    st.lab[:, :q] = cells.reshape(q, n).T
    st.cnt[: len(vals)] = np.bincount(cells, minlength=len(vals))
    st.n_atoms = len(vals)
    return st


def sample_allocation(alloc: AllocationState, atoms: AtomState, R, W, pdp: PdpParams, dp: DPParams,
                      rng: np.random.Generator, *, m_aux: int = 3, use_lik: bool = True,
                      columns=None) -> None:
    """One scan of column reallocations (in place), in the order of ``columns``.

    ``R`` holds residuals z - alpha and ``W`` inverse variances, both n x p.
    Random inputs are drawn for all p columns regardless of ``columns`` so a
    column's draws do not depend on which others are scanned.
    """
    n, p = R.shape
    cols = np.arange(p, dtype=np.int64) if columns is None else np.asarray(columns, dtype=np.int64)
    ru = rng.random((p, m_aux, n, 2))
    rn = rng.standard_normal((p, m_aux, n))
    rc = rng.random(p)
    atoms.compact(alloc.q)
    q, na = _kernels.allocation_scan(
        cols, np.ascontiguousarray(R, dtype=float), np.ascontiguousarray(W, dtype=float),
        alloc.c, alloc.q, alloc.sizes, atoms.lab, atoms.vals, atoms.cnt, atoms.n_atoms,
        float(pdp.d), float(pdp.M1), float(dp.M2), float(dp.mu2), math.sqrt(dp.tau2sq),
        int(m_aux), ru, rn, rc, bool(use_lik))
    alloc.q = int(q)
    atoms.n_atoms = int(na)
    atoms.compact(alloc.q)


def sample_allocation_column(j: int, alloc, atoms, R, W, pdp, dp, rng, **kw) -> None:
    sample_allocation(alloc, atoms, R, W, pdp, dp, rng, columns=[j], **kw)


def atom_posterior(prec_sum, wsum, dp: DPParams):
    """Gaussian posterior (mean, precision) of an atom given the summed inverse
    variances and summed residual / variance of the cells that point at it."""
    lam0 = 1.0 / dp.tau2sq
    prec = lam0 + np.asarray(prec_sum, dtype=float)
    return (lam0 * dp.mu2 + np.asarray(wsum, dtype=float)) / prec, prec


def sample_theta(alloc: AllocationState, atoms: AtomState, R, W, dp: DPParams,
                 rng: np.random.Generator, *, use_lik: bool = True, recenter: bool = False) -> None:
    """Relabel every cell through the atom Polya urn, then redraw each atom value
    from its conjugate Gaussian posterior. With ``recenter`` the atoms are
    shifted so the cell-weighted mean of theta is zero."""
    n, p = R.shape
    q = alloc.q
    atoms.compact(q)
    P = np.zeros((n, q))
    S = np.zeros((n, q))
    _kernels.cell_sums(np.ascontiguousarray(R, dtype=float), np.ascontiguousarray(W, dtype=float),
                       alloc.c, q, P, S, bool(use_lik))
    ru = rng.random((n, q))
    rn = rng.standard_normal((n, q))
    atoms.n_atoms = int(_kernels.theta_relabel(q, atoms.lab, atoms.vals, atoms.cnt, atoms.n_atoms,
                                               P, S, float(dp.M2), float(dp.mu2), float(dp.tau2sq), ru, rn))
    atoms.compact(q)
    na = atoms.n_atoms
    labs = atoms.lab[:, :q].ravel()
    mean, prec = atom_posterior(np.bincount(labs, weights=P.ravel(), minlength=na),
                                np.bincount(labs, weights=S.ravel(), minlength=na), dp)
    atoms.vals[:na] = mean + rng.standard_normal(na) / np.sqrt(prec)
    if recenter:
        cnt = atoms.cnt[:na]
        atoms.vals[:na] -= np.dot(cnt, atoms.vals[:na]) / cnt.sum()


def sample_discount(sizes, d: float, M1: float, rng: np.random.Generator) -> tuple[float, bool]:
    """Independence Metropolis step for d under the 1/2 delta_0 + 1/2 U(0,1) prior.

    The proposal equals the prior, so the acceptance ratio is the EPPF ratio.
    """
    prop = 0.0 if rng.random() < 0.5 else float(rng.random())
    log_ratio = pdp_log_eppf(sizes, prop, M1) - pdp_log_eppf(sizes, d, M1)
    if math.log(rng.random() + 1e-300) < log_ratio:
        return prop, True
    return d, False


def sample_dispersion(phi: float, y, mu, rng: np.random.Generator, step: float = 0.2) -> tuple[float, bool]:
    """Random-walk Metropolis on log(phi): exact beta likelihood times a Gamma(1, 1) prior."""
    y = np.asarray(y, dtype=float).ravel()
    mu = np.asarray(mu, dtype=float).ravel()

    def log_target(ph):
        # Gamma(1,1) density on phi plus the log-scale Jacobian
        lp = -ph + math.log(ph)
        if y.size:
            lp += float(np.sum(beta_loglik(y, mu, ph)))
        return lp

    prop = phi * math.exp(step * rng.standard_normal())
    if not np.isfinite(prop) or prop <= 0:
        return phi, False
    if math.log(rng.random() + 1e-300) < log_target(prop) - log_target(phi):
        return prop, True
    return phi, False


def sample_tau(resid, rng: np.random.Generator, a0: float = 2.0, b0: float = 1.0) -> float | None:
    """tau^2 | residuals ~ InvGamma(a0 + N/2, b0 + SS/2); returns tau, or None without residuals."""
    resid = np.asarray(resid, dtype=float).ravel()
    if resid.size == 0:
        return None
    shape = a0 + 0.5 * resid.size
    rate = b0 + 0.5 * float(np.dot(resid, resid))
    tau2 = rate / rng.gamma(shape)
    return math.sqrt(tau2)


def crp_expected_clusters(p: int, M1: float) -> float:
    return float(np.sum(M1 / (M1 + np.arange(p))))

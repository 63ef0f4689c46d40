"""Compiled inner loops for the allocation scan and the atom relabelling.

Kernels never draw random numbers themselves: all uniforms and normals are
passed in, pre-drawn from a numpy Generator, so runs are reproducible and
the random stream is owned by the caller. State arrays are mutated in place.

Layout shared with ``partition``:
  c[j]        cluster of column j, 0..q-1
  sizes[k]    number of columns in cluster k (first q entries live)
  lab[i, k]   atom index of cell (i, k)
  vals[a]     atom value, cnt[a] number of live cells pointing at atom a
"""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def compact_atoms(q, lab, vals, cnt, n_atoms):
    remap = np.full(n_atoms, -1, np.int64)
    m = 0
    for a in range(n_atoms):
        if cnt[a] > 0:
            remap[a] = m
            vals[m] = vals[a]
            cnt[m] = cnt[a]
            m += 1
    for a in range(m, n_atoms):
        cnt[a] = 0
    n = lab.shape[0]
    for k in range(q):
        for i in range(n):
            lab[i, k] = remap[lab[i, k]]
    return m


@njit(cache=True)
def _column_loglik(R, Wt, j, theta):
    s = 0.0
    for i in range(R.shape[0]):
        r = R[i, j] - theta[i]
        s -= 0.5 * Wt[i, j] * r * r
    return s


@njit(cache=True)
def _cluster_loglik(R, Wt, j, lab, vals, k):
    s = 0.0
    for i in range(R.shape[0]):
        r = R[i, j] - vals[lab[i, k]]
        s -= 0.5 * Wt[i, j] * r * r
    return s


@njit(cache=True)
def allocation_scan(cols, R, Wt, c, q, sizes, lab, vals, cnt, n_atoms,
                    d, M1, M2, mu2, sd2, m_aux, ru, rn, rc, use_lik):
    """Auxiliary-component Gibbs update of c[j] for each j in ``cols``.

    Existing cluster k has weight (n_k - d) * lik; each of the m_aux
    auxiliary clusters has weight (M1 + q d) / m_aux * lik, with its latent
    column drawn cell by cell from the Polya urn of the atom process. A
    column that was alone keeps its old latent column as auxiliary 0.

    ru: (p, m_aux, n, 2) uniforms, rn: (p, m_aux, n) normals, rc: (p,) uniforms.
    Returns (q, n_atoms).
    """
    n = R.shape[0]
    p = c.shape[0]
    cap_a = vals.shape[0]
    aux_val = np.empty((m_aux, n))
    aux_atom = np.empty((m_aux, n), np.int64)
    logw = np.empty(sizes.shape[0] + m_aux)
    fresh_map = np.empty(n, np.int64)
    for jj in range(cols.shape[0]):
        j = cols[jj]
        if n_atoms + n > cap_a:
            n_atoms = compact_atoms(q, lab, vals, cnt, n_atoms)
        k0 = c[j]
        sizes[k0] -= 1
        single = sizes[k0] == 0
        if single:
            for i in range(n):
                cnt[lab[i, k0]] -= 1
        q_act = q - 1 if single else q
        ncell = q_act * n

        m0 = 0
        if single:
            for i in range(n):
                a = lab[i, k0]
                aux_atom[0, i] = a
                aux_val[0, i] = vals[a]
            m0 = 1
        for m in range(m0, m_aux):
            for i in range(n):
                tot = ncell + i
                if ru[j, m, i, 0] * (tot + M2) < tot:
                    pick = int(ru[j, m, i, 1] * tot)
                    if pick >= tot:
                        pick = tot - 1
                    if pick < ncell:
                        kk = pick // n
                        ii = pick - kk * n
                        if single and kk >= k0:
                            kk += 1
                        a = lab[ii, kk]
                        aux_atom[m, i] = a
                        aux_val[m, i] = vals[a]
                    else:
                        prev = pick - ncell
                        aux_atom[m, i] = aux_atom[m, prev]
                        aux_val[m, i] = aux_val[m, prev]
                else:
                    aux_atom[m, i] = -(i + 1)
                    aux_val[m, i] = mu2 + sd2 * rn[j, m, i]

        mx = -np.inf
        for k in range(q):
            if single and k == k0:
                logw[k] = -np.inf
                continue
            w = math.log(sizes[k] - d)
            if use_lik:
                w += _cluster_loglik(R, Wt, j, lab, vals, k)
            logw[k] = w
            if w > mx:
                mx = w
        log_new = math.log((M1 + q_act * d) / m_aux)
        for m in range(m_aux):
            w = log_new
            if use_lik:
                w += _column_loglik(R, Wt, j, aux_val[m])
            logw[q + m] = w
            if w > mx:
                mx = w
        total = 0.0
        for t in range(q + m_aux):
            total += math.exp(logw[t] - mx)
        target = rc[j] * total
        choice = q + m_aux - 1
        acc = 0.0
        for t in range(q + m_aux):
            acc += math.exp(logw[t] - mx)
            if target < acc:
                choice = t
                break

        if choice < q:
            c[j] = choice
            sizes[choice] += 1
            if single:
                last = q - 1
                if k0 != last:
                    for i in range(n):
                        lab[i, k0] = lab[i, last]
                    sizes[k0] = sizes[last]
                    for jx in range(p):
                        if c[jx] == last:
                            c[jx] = k0
                sizes[last] = 0
                q -= 1
            continue

        m = choice - q
        if single and m == 0:
            c[j] = k0
            sizes[k0] = 1
            for i in range(n):
                cnt[lab[i, k0]] += 1
            continue
        if single:
            knew = k0
        else:
            knew = q
            q += 1
        for i in range(n):
            fresh_map[i] = -1
        for i in range(n):
            a = aux_atom[m, i]
            if a < 0:
                src = -a - 1
                if fresh_map[src] < 0:
                    fresh_map[src] = n_atoms
                    vals[n_atoms] = aux_val[m, i]
                    cnt[n_atoms] = 0
                    n_atoms += 1
                a = fresh_map[src]
            lab[i, knew] = a
            cnt[a] += 1
        c[j] = knew
        sizes[knew] = 1
    return q, n_atoms


@njit(cache=True)
def cell_sums(R, Wt, c, q, P, S, use_lik):
    """P[i,k] = sum of weights, S[i,k] = sum of weight * residual over columns in cluster k."""
    n, p = R.shape
    for k in range(q):
        for i in range(n):
            P[i, k] = 0.0
            S[i, k] = 0.0
    if not use_lik:
        return
    for j in range(p):
        k = c[j]
        for i in range(n):
            w = Wt[i, j]
            P[i, k] += w
            S[i, k] += w * R[i, j]


@njit(cache=True)
def theta_relabel(q, lab, vals, cnt, n_atoms, P, S, M2, mu2, tau2sq, ru, rn):
    """Polya-urn Gibbs update of each cell's atom label.

    Cell (i, k) joins atom a with weight cnt[a] * exp(-P v_a^2 / 2 + S v_a),
    or opens a new atom with weight M2 times the Gaussian marginal under the
    N(mu2, tau2sq) base; new atoms are drawn from the conjugate posterior.
    ru, rn: (n, q) uniforms and normals. Returns n_atoms.
    """
    n = lab.shape[0]
    lam0 = 1.0 / tau2sq
    logw = np.empty(vals.shape[0])
    for k in range(q):
        for i in range(n):
            a0 = lab[i, k]
            cnt[a0] -= 1
            pk = P[i, k]
            sk = S[i, k]
            lam = lam0 + pk
            mpost = (lam0 * mu2 + sk) / lam
            lnew = (math.log(M2) + 0.5 * math.log(lam0 / lam)
                    + 0.5 * lam * mpost * mpost - 0.5 * lam0 * mu2 * mu2)
            mx = lnew
            for a in range(n_atoms):
                if cnt[a] > 0:
                    v = vals[a]
                    w = math.log(cnt[a]) - 0.5 * pk * v * v + sk * v
                    logw[a] = w
                    if w > mx:
                        mx = w
            total = math.exp(lnew - mx)
            for a in range(n_atoms):
                if cnt[a] > 0:
                    total += math.exp(logw[a] - mx)
            target = ru[i, k] * total
            acc = 0.0
            chosen = -1
            for a in range(n_atoms):
                if cnt[a] > 0:
                    acc += math.exp(logw[a] - mx)
                    if target < acc:
                        chosen = a
                        break
            if chosen < 0:
                if cnt[a0] == 0:
                    chosen = a0
                else:
                    chosen = n_atoms
                    n_atoms += 1
                vals[chosen] = mpost + rn[i, k] / math.sqrt(lam)
            lab[i, k] = chosen
            cnt[chosen] += 1
    return n_atoms

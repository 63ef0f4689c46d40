"""MCMC driver: one sweep = augment, reallocate columns, relabel atoms, then the
scalar updates (cutoffs, phi, tau, d). Traces persist as newline-delimited JSON."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .augment import ETA_CLIP, augment_matrix, default_cutoffs, sample_cutoffs
from .data import Kind, MixedMatrix, compute_intercepts
from .mathcore import Rng, logistic
from .partition import (AllocationState, DPParams, PdpParams, init_atoms, pdp_log_eppf,
                        sample_allocation, sample_discount, sample_dispersion,
                        sample_pdp_partition, sample_tau, sample_theta)

log = logging.getLogger(__name__)

TRACE_VERSION = 1


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class FitConfig:
    iterations: int = 15000
    burnin: int = 5000
    thin: int = 1
    seed: int = 0
    M1: float = 20.0
    M2: float = 11.0
    mu2: float = -0.18
    tau2sq: float = 2.2
    m_aux: int = 3
    phi_step: float = 0.2
    fixed_d: float | None = None
    init_d: float = 0.3
    recenter: bool = True
    # sweeps refitting the atoms with the initial partition frozen, run before iteration 1
    warmup: int = 100
    # test hook: drop every likelihood term (prior-only chain)
    likelihood: bool = True

    def __post_init__(self):
        if self.iterations < 1 or self.thin < 1 or self.m_aux < 1:
            raise ValueError("iterations, thin and m_aux must be positive")
        if not 0 <= self.burnin < self.iterations:
            raise ValueError("need 0 <= burnin < iterations")
        if self.warmup < 0:
            raise ValueError("warmup must be non-negative")
        if self.fixed_d is not None and not 0 <= self.fixed_d < 1:
            raise ValueError("fixed_d must lie in [0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        PdpParams(self.M1, self.init_d)
        if min(self.M2, self.tau2sq, self.phi_step) <= 0:
            raise ValueError("M2, tau2sq and phi_step must be positive")

    @property
    def pdp(self) -> PdpParams:
        return PdpParams(self.M1, self.init_d if self.fixed_d is None else self.fixed_d)

    @property
    def dp(self) -> DPParams:
        return DPParams(self.M2, self.mu2, self.tau2sq)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown FitConfig keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ChainState:
    alloc: AllocationState
    atoms: object
    alpha: np.ndarray
    cutoffs: dict[int, np.ndarray]
    phi: float
    tau: float
    d: float


@dataclass
class ChainTrace:
    config: dict
    fingerprint: str
    n: int
    p: int
    samples: list[dict] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    interrupted: bool = False

    def header(self) -> dict:
        return {"type": "header", "version": TRACE_VERSION, "config": self.config,
                "fingerprint": self.fingerprint, "n": self.n, "p": self.p}

    def column(self, key: str) -> np.ndarray:
        return np.array([s[key] for s in self.samples])

    def allocations(self) -> np.ndarray:
        return np.array([s["c"] for s in self.samples], dtype=np.int64).reshape(len(self.samples), self.p)

    def __eq__(self, other):
        if not isinstance(other, ChainTrace):
            return NotImplemented
        return (self.header() == other.header()
                and _dumps_records(self.samples) == _dumps_records(other.samples))


def init_state(m: MixedMatrix, cfg: FitConfig, rng: np.random.Generator) -> ChainState:
    """Prior partition, prior atoms, unit-spaced cutoffs, phi = 1, tau from the data."""
    p, n = m.p, m.n
    labels = sample_pdp_partition(p, cfg.M1, cfg.pdp.d, rng)
    alloc = AllocationState.from_labels(labels)
    atoms = init_atoms(n, alloc.q, p, cfg.dp, rng, cfg.m_aux)
    alpha = compute_intercepts(m)
    levels = sorted({t.levels for t in m.types if t.kind is Kind.ORDINAL})
    cutoffs = {L: default_cutoffs(L) for L in levels}
    cont = m.columns_of(Kind.CONTINUOUS)
    if cont.size:
        resid = (m.values[:, cont] - alpha[cont]).ravel()
        tau = float(np.std(resid, ddof=1)) if resid.size > 1 else 1.0
        if not tau > 0:
            tau = 1.0
    else:
        tau = 1.0
    return ChainState(alloc, atoms, alpha, cutoffs, 1.0, tau, cfg.pdp.d)


class _Sweeper:
    def __init__(self, m: MixedMatrix, cfg: FitConfig):
        self.m = m
        self.cfg = cfg
        self.dp = cfg.dp
        self.kinds = m.kinds
        self.cont = np.flatnonzero(self.kinds == Kind.CONTINUOUS)
        self.prop = np.flatnonzero(self.kinds == Kind.PROPORTION)
        self.ord_groups = {}
        for j in np.flatnonzero(self.kinds == Kind.ORDINAL):
            self.ord_groups.setdefault(m.types[j].levels, []).append(j)
        self.ord_groups = {L: np.array(v) for L, v in self.ord_groups.items()}
        self.stats = {"d_accept": 0, "phi_accept": 0, "cutoff_skips": 0, "sweeps": 0}

    def sweep(self, st: ChainState, gen: np.random.Generator, allocate: bool = True) -> None:
        m, cfg = self.m, self.cfg
        n, p = m.n, m.p
        use_lik = cfg.likelihood
        theta_cols = st.atoms.theta(st.alloc.q)[:, st.alloc.c]
        u = gen.random((n, p))
        Z, V = augment_matrix(m, st.alpha, theta_cols, u, phi=st.phi, tau=st.tau, cutoffs=st.cutoffs)
        offset = st.alpha.copy()
        offset[self.cont] = 0.0
        R = Z - offset
        W = 1.0 / V

        pdp = PdpParams(cfg.M1, st.d)
        if allocate:
            sample_allocation(st.alloc, st.atoms, R, W, pdp, self.dp, gen, m_aux=cfg.m_aux, use_lik=use_lik)
        sample_theta(st.alloc, st.atoms, R, W, self.dp, gen, use_lik=use_lik,
                     recenter=cfg.recenter and (self.cont.size + self.prop.size) > 0)
        theta_cols = st.atoms.theta(st.alloc.q)[:, st.alloc.c]

        for L, cols in self.ord_groups.items():
            st.cutoffs[L], skips = sample_cutoffs(Z[:, cols], m.values[:, cols], st.cutoffs[L], gen)
            self.stats["cutoff_skips"] += skips
        if self.prop.size:
            y = m.values[:, self.prop] if use_lik else np.empty(0)
            eta = np.clip(st.alpha[self.prop] + theta_cols[:, self.prop], -ETA_CLIP, ETA_CLIP)
            mu = logistic(eta) if use_lik else np.empty(0)
            st.phi, acc = sample_dispersion(st.phi, y, mu, gen, cfg.phi_step)
            self.stats["phi_accept"] += acc
        if self.cont.size:
            resid = (R[:, self.cont] - theta_cols[:, self.cont]) if use_lik else np.zeros(0)
            tau = sample_tau(resid, gen) if use_lik else sample_tau(np.zeros(0), gen)
            if tau is not None:
                st.tau = tau
        if allocate and cfg.fixed_d is None:
            st.d, acc = sample_discount(st.alloc.cluster_sizes, st.d, cfg.M1, gen)
            self.stats["d_accept"] += acc
        self.stats["sweeps"] += 1


def _record(t: int, st: ChainState, M1: float) -> dict:
    rec = {
        "iter": t,
        "c": (st.alloc.c + 1).tolist(),
        "q": int(st.alloc.q),
        "d": float(st.d),
        "phi": float(st.phi),
        "tau": float(st.tau),
        "log_eppf": pdp_log_eppf(st.alloc.cluster_sizes, st.d, M1),
    }
    if st.cutoffs:
        rec["cutoffs"] = {str(L): [float(g) for g in gam] for L, gam in st.cutoffs.items()}
    return rec


def fit(m: MixedMatrix, cfg: FitConfig, progress=None) -> ChainTrace:
    """Run one chain and return the retained (post burn-in, thinned) samples.

    Iterations are numbered from 1; iteration t is kept when t > burnin and
    (t - burnin) is a multiple of ``thin``. A KeyboardInterrupt stops the
    chain and returns the samples gathered so far with ``interrupted`` set.
    """
    rng = Rng(cfg.seed)
    st = init_state(m, cfg, rng.generator(0))
    sweeper = _Sweeper(m, cfg)
    trace = ChainTrace(cfg.to_dict(), m.fingerprint(), m.n, m.p)
    for t in range(1, cfg.warmup + 1):
        sweeper.sweep(st, rng.generator(2, t), allocate=False)
    try:
        for t in range(1, cfg.iterations + 1):
            sweeper.sweep(st, rng.generator(1, t))
            if t > cfg.burnin and (t - cfg.burnin) % cfg.thin == 0:
                trace.samples.append(_record(t, st, cfg.M1))
            if progress is not None:
                progress(t, st)
    except KeyboardInterrupt:
        log.warning("interrupted after %d sweeps; keeping %d samples",
                    sweeper.stats["sweeps"], len(trace.samples))
        trace.interrupted = True
    s = sweeper.stats
    sweeps = max(s["sweeps"], 1)
    trace.diagnostics = {
        "sweeps": s["sweeps"],
        "d_accept_rate": s["d_accept"] / sweeps,
        "phi_accept_rate": s["phi_accept"] / sweeps,
        "cutoff_skips": s["cutoff_skips"],
    }
    return trace


def _json_default(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    raise TypeError(f"cannot serialise {type(v)}")


def _encode(v):
    if isinstance(v, float):
        if v == math.inf:
            return "Inf"
        if v == -math.inf:
            return "-Inf"
        if math.isnan(v):
            return "NaN"
        return v
    if isinstance(v, dict):
        return {k: _encode(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_encode(x) for x in v]
    return v


def _decode(v):
    if isinstance(v, str) and v in ("Inf", "-Inf", "NaN"):
        return float(v.replace("Inf", "inf").replace("NaN", "nan"))
    if isinstance(v, dict):
        return {k: _decode(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_decode(x) for x in v]
    return v


def _dumps(obj) -> str:
    return json.dumps(_encode(obj), separators=(",", ":"), default=_json_default, allow_nan=False)


def _dumps_records(records) -> list[str]:
    return [_dumps(r) for r in records]


def save_trace(trace: ChainTrace, path: str | Path) -> None:
    """Header line (config, matrix fingerprint) then one JSON record per sample."""
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dumps(trace.header()) + "\n")
        for rec in trace.samples:
            fh.write(_dumps(rec) + "\n")


def load_trace(path: str | Path, matrix: MixedMatrix | None = None) -> ChainTrace:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise TraceError(f"{path}: empty trace file (line 1: missing header)")
    records = []
    for lineno, line in enumerate(lines, start=1):
        try:
            rec = _decode(json.loads(line))
        except json.JSONDecodeError as exc:
            raise TraceError(f"{path}: line {lineno}: corrupt record ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise TraceError(f"{path}: line {lineno}: record is not an object")
        records.append(rec)
    head = records[0]
    if head.get("type") != "header":
        raise TraceError(f"{path}: line 1: first record must be the header")
    trace = ChainTrace(head["config"], head["fingerprint"], int(head["n"]), int(head["p"]))
    last = -1
    for lineno, rec in enumerate(records[1:], start=2):
        missing = {"iter", "c", "q", "d", "phi", "tau", "log_eppf"} - set(rec)
        if missing:
            raise TraceError(f"{path}: line {lineno}: missing fields {sorted(missing)}")
        if len(rec["c"]) != trace.p:
            raise TraceError(f"{path}: line {lineno}: expected {trace.p} labels")
        if rec["iter"] <= last:
            raise TraceError(f"{path}: line {lineno}: iterations not increasing")
        last = rec["iter"]
        trace.samples.append(rec)
    if matrix is not None and matrix.fingerprint() != trace.fingerprint:
        raise TraceError(f"{path}: trace was produced from a different data matrix")
    return trace

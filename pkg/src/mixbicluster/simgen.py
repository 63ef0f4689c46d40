"""Synthetic mixed-type matrices with a known column partition."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import data
from .data import ColumnType, Kind, MixedMatrix
from .mathcore import Rng, logistic, std_normal_cdf
from .partition import sample_pdp_partition

# order of the mix vector
MIX_KINDS = (Kind.BINARY, Kind.ORDINAL, Kind.COUNT, Kind.PROPORTION, Kind.CONTINUOUS)
SIM_CUTOFFS = (-np.inf, -2.0, -1.0, 0.0, 1.0, np.inf)

# Approximate type shares of the 352-covariate genomic benchmark
# (mutation -> binary, copy number -> ordinal, methylation -> proportion,
# expression -> continuous). An estimate, overridable via SimConfig.mix.
BENCHMARK_MIX = (0.19, 0.06, 0.00, 0.27, 0.48)


@dataclass(frozen=True)
class SimConfig:
    n: int = 71
    p: int = 352
    d: float = 0.3
    M1: float = 20.0
    M2: float = 11.0
    mu2: float = -0.18
    tau2sq: float = 2.2
    alpha_cont: float = 6.27
    tau: float = 2.14
    phi: float = 19.43
    cutoffs: tuple[float, ...] = SIM_CUTOFFS
    mix: tuple[float, ...] = (0.2, 0.2, 0.2, 0.2, 0.2)
    seed: int = 0

    def __post_init__(self):
        if len(self.mix) != 5 or min(self.mix) < 0 or abs(sum(self.mix) - 1.0) > 1e-9:
            raise ValueError("mix must be 5 non-negative probabilities summing to 1")
        if min(self.M1, self.M2, self.tau2sq, self.tau, self.phi) <= 0:
            raise ValueError("scale parameters must be positive")
        if not 0 <= self.d < 1:
            raise ValueError("d must lie in [0, 1)")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["cutoffs"] = [_inf_str(v) for v in self.cutoffs]
        out["mix"] = list(self.mix)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        if "cutoffs" in d:
            d["cutoffs"] = tuple(float(v) for v in d["cutoffs"])
        if "mix" in d:
            d["mix"] = tuple(d["mix"])
        return cls(**d)


def _inf_str(v: float):
    if v == np.inf:
        return "Inf"
    if v == -np.inf:
        return "-Inf"
    return v


SCENARIOS = {
    "100% binary": (1.0, 0.0, 0.0, 0.0, 0.0),
    "100% ordinal": (0.0, 1.0, 0.0, 0.0, 0.0),
    "100% count": (0.0, 0.0, 1.0, 0.0, 0.0),
    "100% proportion": (0.0, 0.0, 0.0, 1.0, 0.0),
    "100% continuous": (0.0, 0.0, 0.0, 0.0, 1.0),
    "Benchmark Data Mix": BENCHMARK_MIX,
    "Uniformly Mix Data": (0.2, 0.2, 0.2, 0.2, 0.2),
}

_ALIASES = {
    "binary": "100% binary",
    "ordinal": "100% ordinal",
    "count": "100% count",
    "proportion": "100% proportion",
    "continuous": "100% continuous",
    "benchmark": "Benchmark Data Mix",
    "uniform": "Uniformly Mix Data",
}


def scenario(name: str, **overrides) -> SimConfig:
    """Preset for one of the seven simulation scenarios (short aliases accepted)."""
    key = _ALIASES.get(name.strip().lower(), name.strip())
    if key not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    return SimConfig(mix=SCENARIOS[key], **overrides)


@dataclass
class GroundTruth:
    c: np.ndarray
    theta: np.ndarray
    types: tuple[ColumnType, ...] = field(default=())

    @property
    def q(self) -> int:
        return self.theta.shape[1]


def generate_partition(p: int, M1: float, d: float, rng: np.random.Generator) -> np.ndarray:
    return sample_pdp_partition(p, M1, d, rng)


def generate_theta(n: int, q: int, M2: float, mu2: float, tau2sq: float,
                   rng: np.random.Generator) -> np.ndarray:
    """n x q draws sharing one DP(M2 N(mu2, tau2sq)) realisation (Polya urn, column-major)."""
    total = n * q
    out = np.empty(total)
    sd = math.sqrt(tau2sq)
    u = rng.random((total, 2))
    fresh = rng.standard_normal(total)
    for t in range(total):
        if u[t, 0] * (t + M2) < t:
            out[t] = out[min(int(u[t, 1] * t), t - 1)]
        else:
            out[t] = mu2 + sd * fresh[t]
    return out.reshape(q, n).T.copy()


def _draw_column(kind: Kind, theta: np.ndarray, cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    n = theta.size
    if kind is Kind.BINARY:
        return (rng.random(n) < std_normal_cdf(theta)).astype(float)
    if kind is Kind.CONTINUOUS:
        return cfg.alpha_cont + theta + cfg.tau * rng.standard_normal(n)
    if kind is Kind.COUNT:
        return rng.poisson(np.exp(theta)).astype(float)
    if kind is Kind.ORDINAL:
        cut = np.asarray(cfg.cutoffs, dtype=float)
        latent = theta + rng.standard_normal(n)
        return np.searchsorted(cut[1:-1], latent, side="left").astype(float) + 1.0
    mu = logistic(theta)
    y = rng.beta(mu * cfg.phi, (1.0 - mu) * cfg.phi)
    return data.clamp_proportions(y)[0]


def generate_data(c: np.ndarray, theta: np.ndarray, cfg: SimConfig,
                  rng: Rng) -> tuple[MixedMatrix, GroundTruth]:
    """Assign each column a data type from ``cfg.mix`` and draw its entries."""
    n, p = theta.shape[0], c.size
    type_idx = rng.generator(0).choice(5, size=p, p=np.asarray(cfg.mix))
    levels = len(cfg.cutoffs) - 1
    types = tuple(
        data.ordinal(levels) if MIX_KINDS[t] is Kind.ORDINAL else ColumnType(MIX_KINDS[t])
        for t in type_idx
    )
    X = np.empty((n, p))
    for j in range(p):
        X[:, j] = _draw_column(types[j].kind, theta[:, c[j]], cfg, rng.generator(1, j))
    names = tuple(f"{t.kind.name.lower()[:4]}{j + 1}" for j, t in enumerate(types))
    return MixedMatrix(X, types, names), GroundTruth(c.copy(), theta, types)


def simulate(cfg: SimConfig) -> tuple[MixedMatrix, GroundTruth]:
    rng = Rng(cfg.seed)
    c = generate_partition(cfg.p, cfg.M1, cfg.d, rng.generator(0))
    theta = generate_theta(cfg.n, int(c.max()) + 1, cfg.M2, cfg.mu2, cfg.tau2sq, rng.generator(1))
    return generate_data(c, theta, cfg, rng.child(2))


def with_seed(cfg: SimConfig, seed: int) -> SimConfig:
    return replace(cfg, seed=seed)

"""Posterior summaries of a column-partition trace."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .sampler import ChainTrace, _encode, _decode


def _pooled(trace: ChainTrace | Sequence[ChainTrace] | np.ndarray) -> np.ndarray:
    if isinstance(trace, np.ndarray):
        return np.atleast_2d(trace)
    traces = [trace] if isinstance(trace, ChainTrace) else list(trace)
    mats = [t.allocations() for t in traces if t.samples]
    if not mats:
        raise ValueError("empty trace")
    return np.vstack(mats)


def _pooled_column(trace, key: str) -> np.ndarray:
    traces = [trace] if isinstance(trace, ChainTrace) else list(trace)
    vals = np.concatenate([t.column(key) for t in traces if t.samples] or [np.empty(0)])
    if vals.size == 0:
        raise ValueError("empty trace")
    return vals.astype(float)


def coclustering_matrix(trace) -> np.ndarray:
    """Fraction of retained samples in which each pair of columns shares a cluster."""
    C = _pooled(trace)
    S, p = C.shape
    P = np.zeros((p, p))
    for c in C:
        _, inv = np.unique(c, return_inverse=True)
        H = np.zeros((p, inv.max() + 1))
        H[np.arange(p), inv] = 1.0
        P += H @ H.T
    P /= S
    np.fill_diagonal(P, 1.0)
    return P


def _pair_matrix(c) -> np.ndarray:
    c = np.asarray(c)
    return (c[:, None] == c[None, :]).astype(float)


def dahl_losses(trace, P: np.ndarray) -> np.ndarray:
    C = _pooled(trace)
    iu = np.triu_indices(P.shape[0], k=1)
    target = P[iu]
    return np.array([np.sum((_pair_matrix(c)[iu] - target) ** 2) for c in C])


def dahl_allocation(trace, P: np.ndarray | None = None) -> np.ndarray:
    """Retained sample minimising the squared distance to the co-clustering matrix
    (earliest sample wins ties)."""
    C = _pooled(trace)
    if P is None:
        P = coclustering_matrix(C)
    losses = dahl_losses(C, P)
    # losses equal up to rounding count as ties
    best = losses.min()
    return C[int(np.flatnonzero(losses <= best + 1e-9 * max(1.0, best))[0])].copy()


def chi_accuracy(c_est, c_true, subset=None) -> float:
    """Share of column pairs whose together/apart status agrees between two partitions."""
    c_est = np.asarray(c_est)
    c_true = np.asarray(c_true)
    if c_est.shape != c_true.shape:
        raise ValueError("allocations have different lengths")
    idx = np.arange(c_est.size) if subset is None else np.asarray(subset, dtype=np.int64)
    if idx.size < 2:
        raise ValueError("need at least 2 columns")
    a = _pair_matrix(c_est[idx])
    b = _pair_matrix(c_true[idx])
    iu = np.triu_indices(idx.size, k=1)
    return float(np.mean(a[iu] == b[iu]))


def log_bayes_factor_pdp(trace) -> float:
    """log(#samples with d != 0 / #samples with d == 0); +inf / -inf at the extremes."""
    d = trace if isinstance(trace, np.ndarray) else _pooled_column(trace, "d")
    d = np.asarray(d, dtype=float)
    if d.size == 0:
        raise ValueError("empty trace")
    zero = int(np.count_nonzero(d == 0.0))
    nonzero = d.size - zero
    if zero == 0:
        return math.inf
    if nonzero == 0:
        return -math.inf
    return math.log(nonzero / zero)


def credible_interval(samples, level: float = 0.95) -> tuple[float, float]:
    """Equal-tail interval with linearly interpolated quantiles."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("need at least 2 samples")
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(x, [tail, 1.0 - tail])
    return float(lo), float(hi)


@dataclass
class SummaryReport:
    n_samples: int
    allocation: list[int]
    q_hat: int
    q_hist: dict[int, int]
    d_bins: list[float]
    d_density: list[float]
    p_d_zero: float
    d_interval: tuple[float, float]
    log_bayes_factor: float
    clusters: list[list[str]]
    chi: float | None = None
    misclassification: float | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        d = asdict(self)
        d["q_hist"] = {str(k): v for k, v in self.q_hist.items()}
        return json.dumps(_encode(d), indent=2, allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> "SummaryReport":
        d = _decode(json.loads(text))
        d["q_hist"] = {int(k): v for k, v in d["q_hist"].items()}
        d["d_interval"] = tuple(d["d_interval"])
        return cls(**d)


def summarize(traces, truth=None, names: Sequence[str] | None = None, level: float = 0.95):
    """Pool the traces and build the report; returns (report, co-clustering matrix)."""
    C = _pooled(traces)
    P = coclustering_matrix(C)
    alloc = dahl_allocation(C, P)
    q = _pooled_column(traces, "q").astype(int)
    d = _pooled_column(traces, "d")
    q_vals, q_counts = np.unique(q, return_counts=True)
    density, edges = np.histogram(d, bins=50, range=(0.0, 1.0), density=True)
    p = C.shape[1]
    names = list(names) if names is not None else [f"x{j + 1}" for j in range(p)]
    members: dict[int, list[str]] = {}
    for j, k in enumerate(alloc):
        members.setdefault(int(k), []).append(names[j])
    report = SummaryReport(
        n_samples=int(C.shape[0]),
        allocation=[int(v) for v in alloc],
        q_hat=int(np.unique(alloc).size),
        q_hist={int(a): int(b) for a, b in zip(q_vals, q_counts)},
        d_bins=[float(e) for e in edges],
        d_density=[float(v) for v in density],
        p_d_zero=float(np.mean(d == 0.0)),
        d_interval=credible_interval(d, level) if d.size >= 2 else (float(d[0]), float(d[0])),
        log_bayes_factor=log_bayes_factor_pdp(d),
        clusters=[members[k] for k in sorted(members)],
    )
    if truth is not None:
        report.chi = chi_accuracy(alloc, truth)
        report.misclassification = 1.0 - report.chi
    return report, P


def write_outputs(report: SummaryReport, P: np.ndarray, outdir: str | Path,
                  names: Sequence[str] | None = None) -> None:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    p = P.shape[0]
    names = list(names) if names is not None else [f"x{j + 1}" for j in range(p)]
    np.savetxt(out / "cocluster.csv", P, delimiter=",", fmt="%.6f")
    write_allocation(out / "allocation.csv", report.allocation, names)
    (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    with (out / "q_hist.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["q", "count"])
        for k, v in sorted(report.q_hist.items()):
            w.writerow([k, v])
    with (out / "d_density.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "density"])
        for lo, hi, v in zip(report.d_bins[:-1], report.d_bins[1:], report.d_density):
            w.writerow([f"{lo:.2f}", f"{hi:.2f}", f"{v:.6f}"])


def write_allocation(path, labels, names=None) -> None:
    names = list(names) if names is not None else [f"x{j + 1}" for j in range(len(labels))]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["column", "cluster"])
        for name, k in zip(names, labels):
            w.writerow([name, int(k)])


def read_allocation(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["column", "cluster"]:
        raise ValueError(f"{path}: expected header 'column,cluster'")
    names = [r[0] for r in rows[1:]]
    try:
        labels = np.array([int(r[1]) for r in rows[1:]], dtype=np.int64)
    except (ValueError, IndexError):
        raise ValueError(f"{path}: malformed allocation row") from None
    return names, labels

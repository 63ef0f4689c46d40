"""Simulate-fit-summarize replications, shared by the experiment scripts and the
acceptance tests."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass

from . import simgen
from .sampler import FitConfig, fit
from .summarize import summarize


@dataclass
class Replicate:
    scenario: str
    seed: int
    n: int
    p: int
    true_q: int
    q_hat: int
    chi: float
    misclassification: float
    d_interval: tuple[float, float]
    log_bayes_factor: float
    phi_median: float
    d_accept_rate: float
    seconds: float

    def to_dict(self) -> dict:
        return asdict(self)


def run_replicate(scenario: str, seed: int, *, n: int = 60, p: int = 120,
                  iterations: int = 6000, burnin: int = 2000, fit_seed: int | None = None,
                  sim_overrides: dict | None = None, fit_overrides: dict | None = None) -> Replicate:
    """Draw one dataset from a scenario, fit one chain and score its Dahl allocation."""
    sim = simgen.scenario(scenario, n=n, p=p, seed=seed, **(sim_overrides or {}))
    m, truth = simgen.simulate(sim)
    cfg = FitConfig(iterations=iterations, burnin=burnin,
                    seed=seed if fit_seed is None else fit_seed, **(fit_overrides or {}))
    t0 = time.perf_counter()
    trace = fit(m, cfg)
    seconds = time.perf_counter() - t0
    rep, _ = summarize(trace, truth=truth.c)
    phi = trace.column("phi")
    return Replicate(
        scenario=scenario, seed=seed, n=n, p=p, true_q=truth.q, q_hat=rep.q_hat,
        chi=rep.chi, misclassification=rep.misclassification,
        d_interval=rep.d_interval, log_bayes_factor=rep.log_bayes_factor,
        phi_median=float(sorted(phi)[len(phi) // 2]),
        d_accept_rate=trace.diagnostics["d_accept_rate"], seconds=seconds,
    )

"""Command line: simulate, fit, summarize, eval, betareg.

Exit codes: 0 success, 1 runtime error, 2 usage error. Every run writes a
``manifest.json`` (into ``--out`` when the command has one, else ``--manifest``).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from importlib import metadata
from pathlib import Path

import numpy as np

from . import data, simgen
from .augment import IRLSConvergenceError, irls_beta_fit
from .sampler import FitConfig, fit, load_trace, save_trace
from .summarize import chi_accuracy, read_allocation, summarize, write_allocation, write_outputs

log = logging.getLogger("mixbicluster")


class UsageError(Exception):
    pass


# Per-command defaults; a --config file may set any of these keys, flags win.
DEFAULTS = {
    "simulate": {"scenario": None, "n": 71, "p": 352, "seed": 0, "out": None},
    "fit": {"data": None, "iters": 15000, "burnin": 5000, "thin": 1, "seed": 0, "out": None,
            "fix_d_zero": False, "chains": 1, "M1": 20.0, "M2": 11.0, "mu2": -0.18,
            "tau2sq": 2.2, "m_aux": 3, "phi_step": 0.2, "warmup": 100},
    "summarize": {"trace": None, "out": None, "truth": None, "data": None, "level": 0.95},
    "eval": {"est": None, "truth": None, "subset": None},
    "betareg": {"csv": None, "phi": None, "tol": 1e-8, "maxit": 100, "no_intercept": False},
}
REQUIRED = {
    "simulate": ("scenario", "out"),
    "fit": ("data", "out"),
    "summarize": ("trace", "out"),
    "eval": ("est", "truth"),
    "betareg": ("csv", "phi"),
}


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _sha256(path) -> str | None:
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError:
        return None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mixbicluster", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def common(p):
        p.add_argument("--config", help="JSON file with the same keys as the flags")
        p.add_argument("--manifest", default=S, help="manifest path for commands without --out")

    p = sub.add_parser("simulate", help="draw a synthetic dataset from a scenario")
    p.add_argument("--scenario", default=S, help="one of {} or a short alias".format(
        ", ".join(repr(k) for k in simgen.SCENARIOS).replace("%", "%%")))
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--p", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--out", default=S, help="output directory")
    common(p)

    p = sub.add_parser("fit", help="run the MCMC sampler on a type-tagged CSV")
    p.add_argument("--data", default=S)
    p.add_argument("--iters", type=int, default=S)
    p.add_argument("--burnin", type=int, default=S)
    p.add_argument("--thin", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--out", default=S, help="output directory")
    p.add_argument("--fix-d-zero", dest="fix_d_zero", action="store_true", default=S,
                   help="pure DP prior on the column partition")
    p.add_argument("--chains", type=int, default=S, help="independent chains, seeds seed..seed+k-1")
    p.add_argument("--M1", type=float, default=S)
    p.add_argument("--M2", type=float, default=S)
    p.add_argument("--mu2", type=float, default=S)
    p.add_argument("--tau2sq", type=float, default=S)
    p.add_argument("--m-aux", dest="m_aux", type=int, default=S)
    p.add_argument("--phi-step", dest="phi_step", type=float, default=S)
    p.add_argument("--warmup", type=int, default=S)
    common(p)

    p = sub.add_parser("summarize", help="posterior summaries of one or more traces")
    p.add_argument("--trace", nargs="+", default=S)
    p.add_argument("--out", default=S)
    p.add_argument("--truth", default=S, help="allocation CSV (column,cluster) of the true partition")
    p.add_argument("--data", default=S, help="data CSV, used for column names")
    p.add_argument("--level", type=float, default=S)
    common(p)

    p = sub.add_parser("eval", help="pairwise accuracy of an allocation against the truth")
    p.add_argument("est", nargs="?", default=S)
    p.add_argument("truth", nargs="?", default=S)
    p.add_argument("--subset", default=S, help="comma-separated 1-based column indices or names")
    common(p)

    p = sub.add_parser("betareg", help="beta regression with fixed dispersion by IRLS")
    p.add_argument("csv", nargs="?", default=S, help="CSV with y in the first column, covariates after")
    p.add_argument("--phi", type=float, default=S)
    p.add_argument("--tol", type=float, default=S)
    p.add_argument("--maxit", type=int, default=S)
    p.add_argument("--no-intercept", dest="no_intercept", action="store_true", default=S)
    common(p)
    return ap


def resolve(command: str, flags: dict) -> dict:
    """Defaults, then the --config file, then explicit flags."""
    opts = dict(DEFAULTS[command])
    cfg_path = flags.pop("config", None)
    flags.pop("manifest", None)
    if cfg_path:
        try:
            loaded = json.loads(Path(cfg_path).read_text())
        except FileNotFoundError:
            raise FileNotFoundError(f"config file not found: {cfg_path}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"{cfg_path}: invalid JSON ({exc.msg})") from None
        if not isinstance(loaded, dict):
            raise UsageError(f"{cfg_path}: expected a JSON object")
        loaded = {k.replace("-", "_"): v for k, v in loaded.items()}
        unknown = set(loaded) - set(opts)
        if unknown:
            raise UsageError(f"{cfg_path}: unknown keys {sorted(unknown)}")
        opts.update(loaded)
    opts.update(flags)
    missing = [k for k in REQUIRED[command] if opts.get(k) in (None, [])]
    if missing:
        raise UsageError(f"{command}: missing required option(s): {', '.join('--' + k for k in missing)}")
    return opts


# ---------------------------------------------------------------- commands

def cmd_simulate(o: dict, manifest: dict) -> int:
    try:
        cfg = simgen.scenario(o["scenario"], n=int(o["n"]), p=int(o["p"]), seed=int(o["seed"]))
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    m, truth = simgen.simulate(cfg)
    out = Path(o["out"])
    out.mkdir(parents=True, exist_ok=True)
    data.save_csv(m, out / "data.csv")
    write_allocation(out / "truth_c.csv", truth.c + 1, m.names)
    np.savetxt(out / "truth_theta.csv", truth.theta, delimiter=",", fmt="%.17g")
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    manifest["outputs"] = ["data.csv", "truth_c.csv", "truth_theta.csv", "config.json"]
    print(f"simulated {m.n} x {m.p} ({cfg_name(o['scenario'])}), q0 = {truth.q} -> {out}")
    return 0


def cfg_name(name: str) -> str:
    return simgen._ALIASES.get(name.strip().lower(), name)


def fit_config(o: dict) -> FitConfig:
    try:
        return FitConfig(iterations=int(o["iters"]), burnin=int(o["burnin"]), thin=int(o["thin"]),
                         seed=int(o["seed"]), M1=float(o["M1"]), M2=float(o["M2"]),
                         mu2=float(o["mu2"]), tau2sq=float(o["tau2sq"]), m_aux=int(o["m_aux"]),
                         phi_step=float(o["phi_step"]), warmup=int(o["warmup"]),
                         fixed_d=0.0 if o["fix_d_zero"] else None)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _run_chain(args):
    m, cfg, path = args
    trace = fit(m, cfg)
    save_trace(trace, path)
    return str(path), len(trace.samples), trace.diagnostics, trace.interrupted


def cmd_fit(o: dict, manifest: dict) -> int:
    cfg = fit_config(o)
    chains = int(o["chains"])
    if chains < 1:
        raise UsageError("--chains must be at least 1")
    m = data.load_csv(o["data"])
    manifest["inputs"] = {"data": _sha256(o["data"]), "matrix": m.fingerprint()}
    out = Path(o["out"])
    out.mkdir(parents=True, exist_ok=True)
    jobs = []
    for k in range(chains):
        name = "trace.jsonl" if chains == 1 else f"trace_{k + 1}.jsonl"
        jobs.append((m, replace(cfg, seed=cfg.seed + k), out / name))
    if chains == 1:
        results = [_run_chain(jobs[0])]
    else:
        with ProcessPoolExecutor(max_workers=chains) as pool:
            results = list(pool.map(_run_chain, jobs))
    manifest["outputs"] = [Path(r[0]).name for r in results]
    for path, kept, diag, interrupted in results:
        note = " (interrupted)" if interrupted else ""
        print(f"{path}: {kept} samples{note}; d acceptance {diag['d_accept_rate']:.3f}, "
              f"phi acceptance {diag['phi_accept_rate']:.3f}")
    return 0


def cmd_summarize(o: dict, manifest: dict) -> int:
    paths = o["trace"] if isinstance(o["trace"], list) else [o["trace"]]
    matrix = data.load_csv(o["data"]) if o["data"] else None
    traces = [load_trace(pth, matrix) for pth in paths]
    if len({(t.fingerprint, t.p) for t in traces}) != 1:
        raise ValueError("traces come from different data matrices")
    if not any(t.samples for t in traces):
        raise ValueError("no retained samples in the trace(s)")
    manifest["inputs"] = {str(pth): _sha256(pth) for pth in paths}
    names = list(matrix.names) if matrix is not None else None
    truth = None
    if o["truth"]:
        tnames, truth = read_allocation(o["truth"])
        manifest["inputs"][str(o["truth"])] = _sha256(o["truth"])
        if truth.size != traces[0].p:
            raise UsageError(f"truth has {truth.size} columns, traces have {traces[0].p}")
        names = names or tnames
    report, P = summarize(traces, truth=truth, names=names, level=float(o["level"]))
    write_outputs(report, P, o["out"], names)
    manifest["outputs"] = ["cocluster.csv", "allocation.csv", "report.json", "q_hist.csv", "d_density.csv"]
    lo, hi = report.d_interval
    print(f"{report.n_samples} samples, {report.q_hat} clusters in the least-squares allocation")
    print(f"d: {lo:.3f} to {hi:.3f} ({float(o['level']):.0%} interval), "
          f"log Bayes factor {_fmt_bf(report.log_bayes_factor)}")
    if report.chi is not None:
        print(f"chi {report.chi:.6f}  misclassification {report.misclassification:.6f}")
    return 0


def _fmt_bf(v: float) -> str:
    if math.isinf(v):
        return "Inf" if v > 0 else "-Inf"
    return f"{v:.3f}"


def _parse_subset(spec, names: list[str]) -> np.ndarray:
    items = spec if isinstance(spec, list) else [s for s in str(spec).split(",") if s.strip()]
    idx = []
    for it in items:
        it = str(it).strip()
        if it.isdigit():
            k = int(it) - 1
        elif it in names:
            k = names.index(it)
        else:
            raise UsageError(f"--subset: unknown column {it!r}")
        if not 0 <= k < len(names):
            raise UsageError(f"--subset: column index {it} out of range")
        idx.append(k)
    if len(idx) < 2:
        raise UsageError("--subset needs at least 2 columns")
    return np.array(idx)


def cmd_eval(o: dict, manifest: dict) -> int:
    names, est = read_allocation(o["est"])
    _, truth = read_allocation(o["truth"])
    manifest["inputs"] = {str(o["est"]): _sha256(o["est"]), str(o["truth"]): _sha256(o["truth"])}
    if est.size != truth.size:
        raise UsageError(f"allocation lengths differ: {est.size} vs {truth.size}")
    subset = _parse_subset(o["subset"], names) if o["subset"] else None
    chi = chi_accuracy(est, truth, subset)
    manifest["result"] = {"chi": chi, "misclassification": 1.0 - chi}
    print(f"chi {chi:.6f}")
    print(f"misclassification {1.0 - chi:.6f}")
    return 0


def cmd_betareg(o: dict, manifest: dict) -> int:
    path = Path(o["csv"])
    raw = path.read_text().strip().splitlines()
    if not raw:
        raise ValueError(f"{path}: empty file")
    rows = [r.split(",") for r in raw]
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        rows = rows[1:]
    try:
        arr = np.array([[float(v) for v in r] for r in rows])
    except ValueError:
        raise ValueError(f"{path}: non-numeric entry") from None
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise ValueError(f"{path}: need a header-optional table with at least two rows")
    y, X = arr[:, 0], arr[:, 1:]
    if not o["no_intercept"]:
        X = np.column_stack([np.ones(y.size), X])
    if X.shape[1] == 0:
        raise UsageError("no covariates and --no-intercept given")
    if np.any((y <= 0) | (y >= 1)):
        raise ValueError(f"{path}: y must lie strictly inside (0, 1)")
    manifest["inputs"] = {str(path): _sha256(path)}
    try:
        res = irls_beta_fit(y, X, float(o["phi"]), tol=float(o["tol"]), maxit=int(o["maxit"]))
        out = {"coefficients": [float(b) for b in res.coefficients], "iterations": res.iterations,
               "converged": bool(res.converged), "final_score_norm": float(res.final_score_norm)}
        status = 0
    except IRLSConvergenceError as exc:
        out = {"coefficients": [float(b) for b in exc.coefficients], "iterations": exc.iterations,
               "converged": False, "final_score_norm": None}
        status = 1
    manifest["result"] = out
    print(json.dumps(out))
    return status


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "summarize": cmd_summarize,
            "eval": cmd_eval, "betareg": cmd_betareg}


def _write_manifest(manifest: dict, flags: dict, opts: dict | None) -> None:
    out = (opts or {}).get("out") or flags.get("out")
    if out and manifest["command"] in ("simulate", "fit", "summarize"):
        path = Path(out) / "manifest.json"
    else:
        path = Path(flags.get("manifest") or "manifest.json")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    except OSError as exc:
        log.warning("could not write manifest %s: %s", path, exc)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        code = int(exc.code or 0)
        if code:
            _write_manifest({"command": None, "argv": argv, "version": _version(), "exit_code": code},
                            {}, None)
        return code
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "verbose")}
    manifest_flag = {"manifest": flags.get("manifest"), "out": flags.get("out")}
    manifest = {"command": ns.command, "argv": argv, "version": _version(),
                "flags": {k: v for k, v in flags.items() if k != "manifest"}}
    t0 = time.perf_counter()
    opts = None
    try:
        opts = resolve(ns.command, dict(flags))
        manifest["resolved"] = opts
        manifest["seed"] = opts.get("seed")
        code = COMMANDS[ns.command](opts, manifest)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = 2
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        code = 1
    except (ValueError, OSError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = 1
    manifest["exit_code"] = code
    manifest["wall_seconds"] = round(time.perf_counter() - t0, 3)
    _write_manifest(manifest, manifest_flag, opts)
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Replicated simulation study: misclassification, d intervals and Bayes factors.

    python scripts/simulation_study.py --scenario benchmark uniform --reps 5
    python scripts/simulation_study.py --scenario benchmark --n 71 --p 352 --iters 15000 --burnin 5000 --reps 1
    python scripts/simulation_study.py --scenario uniform --true-d 0 --reps 5
"""
import argparse
import json
import math
import statistics

from mixbicluster.study import run_replicate


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--scenario", nargs="+", default=["benchmark", "uniform"])
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--n", type=int, default=60)
    ap.add_argument("--p", type=int, default=120)
    ap.add_argument("--iters", type=int, default=6000)
    ap.add_argument("--burnin", type=int, default=2000)
    ap.add_argument("--true-d", type=float, default=None, help="discount used to generate the partition")
    ap.add_argument("--first-seed", type=int, default=1)
    ap.add_argument("--json", help="write all replicate rows here")
    args = ap.parse_args()

    sim = {} if args.true_d is None else {"d": args.true_d}
    rows = []
    for name in args.scenario:
        reps = []
        for r in range(args.reps):
            rep = run_replicate(name, args.first_seed + r, n=args.n, p=args.p,
                                iterations=args.iters, burnin=args.burnin, sim_overrides=sim)
            lo, hi = rep.d_interval
            print(f"{name:>12} seed={rep.seed:<3} q={rep.true_q:>3}/{rep.q_hat:<3} "
                  f"1-chi={rep.misclassification:.4f} d95=({lo:.3f}, {hi:.3f}) "
                  f"logBF={rep.log_bayes_factor:.2f} phi={rep.phi_median:.2f} {rep.seconds:.0f}s",
                  flush=True)
            reps.append(rep)
        mis = statistics.median(r.misclassification for r in reps)
        cover = sum(r.d_interval[0] <= 0.3 <= r.d_interval[1] for r in reps)
        finite = sum(math.isfinite(r.log_bayes_factor) for r in reps)
        print(f"{name:>12} median 1-chi={mis:.4f}  d CI covers 0.3: {cover}/{len(reps)}  "
              f"finite logBF: {finite}/{len(reps)}", flush=True)
        rows += [r.to_dict() for r in reps]
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1, allow_nan=True)


if __name__ == "__main__":
    main()

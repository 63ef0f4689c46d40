"""Accuracy of the recovered column partition as the number of rows grows.

    python scripts/consistency_trend.py --n 20 40 80 --p 60 --reps 5
"""
import argparse

import numpy as np

from mixbicluster.study import run_replicate


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--scenario", default="uniform")
    ap.add_argument("--n", type=int, nargs="+", default=[20, 40, 80])
    ap.add_argument("--p", type=int, default=60)
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--iters", type=int, default=6000)
    ap.add_argument("--burnin", type=int, default=2000)
    args = ap.parse_args()

    for n in args.n:
        chis = [run_replicate(args.scenario, s, n=n, p=args.p, iterations=args.iters,
                              burnin=args.burnin).chi for s in range(1, args.reps + 1)]
        print(f"n={n:<4} mean chi={np.mean(chis):.4f}  min={np.min(chis):.4f}  "
              f"per rep: {' '.join(f'{c:.3f}' for c in chis)}", flush=True)


if __name__ == "__main__":
    main()

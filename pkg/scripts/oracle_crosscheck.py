"""Compare Riccati LQ values against the brute-force stacked solver as T grows."""

import argparse

import numpy as np
import scipy.linalg

from kypkit.instances import random_pd_problem
from kypkit.oracle import finite_horizon_lq
from kypkit.riccati import lq_value


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--count", type=int, default=10)
    parser.add_argument("--seed", type=int, default=2024)
    args = parser.parse_args()
    rng = np.random.default_rng(args.seed)
    horizons = (4, 8, 16, 32, 64)
    print("instance  " + "  ".join(f"T={T:<8}" for T in horizons) + "  (relative error, unit-weight LQR tail)")
    for i in range(args.count):
        p = random_pd_problem(rng)
        a = rng.standard_normal(p.n)
        X = scipy.linalg.solve_discrete_are(p.A, p.B, np.eye(p.n), np.eye(p.m))
        K = -np.linalg.solve(np.eye(p.m) + p.B.T @ X @ p.B, p.B.T @ X @ p.A)
        ref = lq_value(p, a)
        errs = [abs(finite_horizon_lq(p, a, T, ("lqr_tail", K)) - ref) / (1 + abs(ref)) for T in horizons]
        print(f"{i:>8}  " + "  ".join(f"{e:<10.2e}" for e in errs))


if __name__ == "__main__":
    main()

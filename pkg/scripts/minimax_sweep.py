"""Gap traces of minimax_value on random games that satisfy the block condition."""

import argparse
import csv
import sys

import numpy as np

from kypkit.instances import random_coupled_game
from kypkit.minimax import minimax_value


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--games", type=int, default=10)
    parser.add_argument("--eps", type=float, default=0.25)
    parser.add_argument("--tol", type=float, default=1e-9)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    rng = np.random.default_rng(args.seed)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["game", "n", "k", "q", "eps", "T", "lower", "value", "upper", "gap"])
    for i in range(args.games):
        gp = random_coupled_game(rng, eps=args.eps)
        rep = minimax_value(gp, tol=args.tol)
        for row in rep.trace:
            writer.writerow([i, gp.n, gp.k, gp.q, rep.diagnostics["eps"], row["T"],
                             f"{row['lower']:.12g}", f"{row['value']:.12g}", f"{row['upper']:.12g}", f"{row['gap']:.3e}"])


if __name__ == "__main__":
    main()

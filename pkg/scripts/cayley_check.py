"""Worst-case errors of the continuous-to-discrete transport on random problems."""

import argparse

import numpy as np

from kypkit.cayley import build_cayley, ct_theorem_wrapper, map_boundary, verify_certificate_ct
from kypkit.core import KypError, PoleOfA
from kypkit.freq import eval_pi
from kypkit.instances import random_ct_problem


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--count", type=int, default=50)
    parser.add_argument("--seed", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(args.seed)
    pi_err, certified, refused = 0.0, 0, 0
    for _ in range(args.count):
        p = random_ct_problem(rng)
        cmap, dt = build_cayley(p)
        for w in rng.standard_normal(32) * 3:
            try:
                a, b = eval_pi(p, 1j * w), eval_pi(dt, map_boundary(cmap, 1j * w))
            except PoleOfA:
                continue
            pi_err = max(pi_err, np.linalg.norm(a - b) / max(1.0, np.linalg.norm(a)))
        # shift the input weight so a stabilizing completion exists for most draws
        q = p.Q.copy()
        q[p.n :, p.n :] += 5 * np.eye(p.m)
        try:
            cert = ct_theorem_wrapper(p.with_cost(q), "stabilizing")
            certified += verify_certificate_ct(p.with_cost(q), cert).passed
        except KypError:
            refused += 1
    print(f"Pi transport error: {pi_err:.2e}")
    print(f"CT certificates verified: {certified}, no certificate: {refused}, of {args.count}")


if __name__ == "__main__":
    main()

"""Seeded random problem generators shared by tests and experiment scripts."""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize_scalar

from .core import KypProblem, PoleOfA, TimeKind, check_stabilizable, min_eig, validate_problem
from .freq import BlockPartition, check_minimax_condition, eval_pi, theta_to_location
from .minimax import GameProblem


def _sym(rng, d, scale=1.0):
    M = rng.standard_normal((d, d)) * scale
    return 0.5 * (M + M.T)


def boundary_min_eig(problem: KypProblem, grid_size: int = 512, polish: int = 3) -> float:
    """min over the grid of lambda_min Pi (pole samples skipped).

    The ``polish`` lowest samples are refined by a bounded scalar search over
    the neighbouring grid cells, so sharp dips between samples are not missed.
    """
    def lam(theta):
        try:
            return min_eig(eval_pi(problem, theta_to_location(theta, problem.time_kind)))
        except PoleOfA:
            return np.inf

    step = 2 * np.pi / grid_size
    thetas = -np.pi + step * np.arange(grid_size)
    vals = np.array([lam(t) for t in thetas])
    best = float(np.min(vals))
    for i in np.argsort(vals)[:polish]:
        res = minimize_scalar(lam, bounds=(thetas[i] - step, thetas[i] + step), method="bounded",
                              options={"xatol": 1e-10})
        best = min(best, float(res.fun))
    return best


def random_pd_problem(rng, n_max=6, m_max=3, margin=0.5, grid_size=512) -> KypProblem:
    """Stabilizable DT problem whose Pi is positive definite on the grid.

    A has spectral radius in [0.3, 1.4] and stays at least 0.05 away from the
    unit circle; Q starts random and its u-block is shifted up until
    min Pi >= margin.
    """
    while True:
        n = int(rng.integers(1, n_max + 1))
        m = int(rng.integers(1, m_max + 1))
        A = rng.standard_normal((n, n))
        rho = max(np.abs(np.linalg.eigvals(A)))
        A *= rng.uniform(0.3, 1.4) / rho
        if np.min(np.abs(np.abs(np.linalg.eigvals(A)) - 1)) < 0.05:
            continue
        B = rng.standard_normal((n, m))
        Q = _sym(rng, n + m)
        prob = validate_problem(A, B, Q)
        if not check_stabilizable(prob.sys):
            continue
        low = boundary_min_eig(prob, grid_size)
        Q[n:, n:] += (margin - low) * np.eye(m)
        return validate_problem(A, B, Q)


def random_ct_problem(rng, n_max=5, m_max=3) -> KypProblem:
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, m))
    Q = _sym(rng, n + m)
    return validate_problem(A, B, Q, TimeKind.CONTINUOUS)


def random_schur(rng, n, radius=0.8):
    A = rng.standard_normal((n, n))
    return A * rng.uniform(0.1, radius) / max(np.abs(np.linalg.eigvals(A)))


def random_coupled_game(rng, n_max=4, k_max=2, q_max=2, eps=0.25, grid_size=512) -> GameProblem:
    """Game satisfying the block frequency condition with some eps' >= eps.

    Pi11 ~ I and Pi22 ~ -I with small random state terms; the v-w coupling is
    rescaled until the coupling ratio's supremum is at most 1/eps.
    """
    while True:
        n = int(rng.integers(1, n_max + 1))
        k = int(rng.integers(1, k_max + 1))
        q = int(rng.integers(1, q_max + 1))
        A = random_schur(rng, n)
        # keep the transfer gains (zI - A)^-1 B of order one on the circle
        gain = 1.0 / max(np.linalg.norm(np.linalg.inv(np.eye(n) - A), 2), np.linalg.norm(np.linalg.inv(np.eye(n) + A), 2))
        B1 = rng.standard_normal((n, k))
        B2 = rng.standard_normal((n, q))
        B1 *= gain / np.linalg.norm(B1, 2)
        B2 *= gain / np.linalg.norm(B2, 2)
        d = n + k + q
        Q = np.zeros((d, d))
        Q[:n, :n] = _sym(rng, n, 0.1)
        Q[:n, n:] = 0.1 * rng.standard_normal((n, k + q))
        Q[n:, :n] = Q[:n, n:].T
        Q[n : n + k, n : n + k] = np.eye(k) + _sym(rng, k, 0.05)
        Q[n + k :, n + k :] = -np.eye(q) + _sym(rng, q, 0.05)
        C = rng.standard_normal((k, q))
        C *= 0.5 / np.linalg.norm(C, 2)
        Q[n : n + k, n + k :] = C
        Q[n + k :, n : n + k] = C.T
        a = rng.standard_normal(n)
        kyp = validate_problem(A, np.hstack([B1, B2]), Q)
        part = BlockPartition(k, q)
        cond = None
        for _ in range(12):
            cond = check_minimax_condition(kyp, part, grid_size=grid_size)
            if cond is not None and cond.eps >= eps:
                break
            Q[n : n + k, n + k :] *= 0.5
            Q[n + k :, n : n + k] *= 0.5
            kyp = validate_problem(A, np.hstack([B1, B2]), Q)
        if cond is not None and cond.eps >= eps:
            return GameProblem.build(A, B1, B2, Q, a)


def random_decoupled_game(rng, n_max=3, k_max=2, q_max=2):
    """Game with independent v- and w-subsystems, so Pi12 vanishes identically.

    Returns (game, v_problem, w_problem, a1, a2); the game value equals
    inf Phi_v(a1) + sup Phi_w(a2).
    """
    n1 = int(rng.integers(1, n_max + 1))
    n2 = int(rng.integers(1, n_max + 1))
    k = int(rng.integers(1, k_max + 1))
    q = int(rng.integers(1, q_max + 1))
    A1, A2 = random_schur(rng, n1), random_schur(rng, n2)
    B1a = rng.standard_normal((n1, k))
    B2b = rng.standard_normal((n2, q))
    X1 = rng.standard_normal((n1 + k, n1 + k))
    Q1 = 0.2 * X1.T @ X1 + np.diag([0.0] * n1 + [1.0] * k)
    X2 = rng.standard_normal((n2 + q, n2 + q))
    Q2 = -(0.2 * X2.T @ X2 + np.diag([0.0] * n2 + [1.0] * q))
    n = n1 + n2
    A = np.zeros((n, n))
    A[:n1, :n1], A[n1:, n1:] = A1, A2
    B1 = np.vstack([B1a, np.zeros((n2, k))])
    B2 = np.vstack([np.zeros((n1, q)), B2b])
    # order of the game form is (x1, x2, v, w)
    idx1 = list(range(n1)) + list(range(n, n + k))
    idx2 = list(range(n1, n)) + list(range(n + k, n + k + q))
    Q = np.zeros((n + k + q,) * 2)
    Q[np.ix_(idx1, idx1)] += Q1
    Q[np.ix_(idx2, idx2)] += Q2
    a1, a2 = rng.standard_normal(n1), rng.standard_normal(n2)
    gp = GameProblem.build(A, B1, B2, Q, np.concatenate([a1, a2]))
    return gp, validate_problem(A1, B1a, Q1), validate_problem(A2, B2b, Q2), a1, a2

"""Brute-force finite-horizon solvers used as ground truth.

Everything here is assembled by simulating unit impulses through the dynamics
and summing per-step costs, then solved with one dense linear solve.  No code
is shared with the Riccati or game solvers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import KypProblem, NotBoundedBelow, NotConvexConcave, SingularSaddle, Trajectory

SERIES_CUTOFF = 1e-14
SERIES_MAX_PASSES = 64
HESSIAN_TOL = 1e-9


@dataclass
class StackedQuadratic:
    """g(U) = U'HU + 2 Re f'U + r over stacked decision variables."""

    H: np.ndarray
    f: np.ndarray
    r: float
    index: dict

    def __call__(self, U) -> float:
        U = np.asarray(U)
        return float(np.real(U.conj() @ self.H @ U + 2 * (self.f.conj() @ U)) + self.r)

    def coordinate(self, signal: str, t: int, i: int = 0) -> int:
        return self.index[(signal, t, i)]


def series_tail(F: np.ndarray, W: np.ndarray) -> np.ndarray:
    """sum_t (F^t)' W F^t, summed by doubling the number of terms each pass.

    After j passes S holds the first 2^j terms exactly; the loop stops once
    the newest block of terms falls below the cutoff.
    """
    S = np.asarray(W, dtype=np.result_type(F, W)).copy()
    Fk = np.asarray(F, dtype=S.dtype)
    ref = max(np.linalg.norm(W), 1e-300)
    for _ in range(SERIES_MAX_PASSES):
        block = Fk.conj().T @ S @ Fk
        S = S + block
        Fk = Fk @ Fk
        if np.linalg.norm(block) < SERIES_CUTOFF * ref:
            return 0.5 * (S + S.conj().T)
        if np.linalg.norm(S) > 1e100 * ref:
            break
    raise ValueError("tail series did not converge; the closed loop is not Schur")


def _impulse_responses(A, B, x0, T):
    """State trajectories: X[t] (n x T*m) maps stacked inputs to x(t), x_free[t] from x0.

    Each input channel's impulse response is simulated once; time invariance
    places the shifted copies.
    """
    n, m = B.shape
    dtype = np.result_type(A, B, x0, float)
    X = np.zeros((T + 1, n, T * m), dtype=dtype)
    x_free = np.zeros((T + 1, n), dtype=dtype)
    x_free[0] = x0
    for t in range(T):
        x_free[t + 1] = A @ x_free[t]
    # resp[j] = state j+1 steps after a unit impulse on each channel
    resp = np.zeros((T, n, m), dtype=dtype)
    resp[0] = B
    for j in range(1, T):
        resp[j] = A @ resp[j - 1]
    for s in range(T):
        X[s + 1 :, :, s * m : (s + 1) * m] = resp[: T - s]
    return X, x_free


def _assemble(A, B, Q, x0, T, terminal, labels) -> StackedQuadratic:
    n, m = B.shape
    N = T * m
    X, x_free = _impulse_responses(A, B, x0, T)
    dtype = X.dtype if not np.iscomplexobj(Q) else complex
    H = np.zeros((N, N), dtype=dtype)
    f = np.zeros(N, dtype=dtype)
    r = 0.0
    for t in range(T):
        E = np.zeros((m, N))
        E[:, t * m : (t + 1) * m] = np.eye(m)
        G = np.vstack([X[t], E])
        g0 = np.concatenate([x_free[t], np.zeros(m)])
        H += G.conj().T @ Q @ G
        f += G.conj().T @ Q @ g0
        r += float(np.real(g0.conj() @ Q @ g0))
    H += X[T].conj().T @ terminal @ X[T]
    f += X[T].conj().T @ terminal @ x_free[T]
    r += float(np.real(x_free[T].conj() @ terminal @ x_free[T]))
    index = {}
    for t in range(T):
        for i in range(m):
            index[(labels[i], t, i)] = t * m + i
    return StackedQuadratic(0.5 * (H + H.conj().T), f, r, index)


def lq_terminal(problem: KypProblem, terminal="zero_input_tail") -> np.ndarray:
    """Tail cost matrix for a terminal choice: 'zero_input_tail' or ('lqr_tail', K)."""
    n, m = problem.n, problem.m
    if isinstance(terminal, str):
        if terminal != "zero_input_tail":
            raise ValueError(f"unknown terminal {terminal!r}")
        K = np.zeros((m, n))
    else:
        kind, K = terminal
        if kind != "lqr_tail":
            raise ValueError(f"unknown terminal {kind!r}")
        K = np.asarray(K)
    F = problem.A + problem.B @ K
    stack = np.vstack([np.eye(n), K])
    return series_tail(F, stack.conj().T @ problem.Q @ stack)


def finite_horizon_lq(problem: KypProblem, a, T: int, terminal="zero_input_tail") -> float:
    """Exact minimum over u(0..T-1) of the truncated cost plus the tail closure.

    With an lqr_tail the inputs are written as u = Kx + u~ before stacking, an
    exact change of variables that keeps the stacked problem well scaled when
    A itself is unstable.
    """
    if T < 1:
        raise ValueError("horizon must be at least 1")
    a = np.asarray(a).reshape(problem.n)
    n, m = problem.n, problem.m
    S = lq_terminal(problem, terminal)
    K = np.zeros((m, n)) if isinstance(terminal, str) else np.asarray(terminal[1])
    Tm = np.block([[np.eye(n), np.zeros((n, m))], [K, np.eye(m)]])
    Q = Tm.conj().T @ problem.Q @ Tm
    sq = _assemble(problem.A + problem.B @ K, problem.B, 0.5 * (Q + Q.conj().T), a, T, S, ["u"] * m)
    lam = np.linalg.eigvalsh(sq.H)
    if lam[0] < -HESSIAN_TOL * max(1.0, abs(lam[-1])):
        raise NotBoundedBelow(f"stacked Hessian has eigenvalue {lam[0]:.3g}")
    U, *_ = np.linalg.lstsq(sq.H, -sq.f, rcond=None)
    return sq(U)


def finite_horizon_saddle(gp, T: int):
    """(value, v_star, w_star) of the horizon-T game with zero inputs after T."""
    k, q = gp.k, gp.q
    n = gp.n
    B = np.hstack([gp.B1, gp.B2])
    S = series_tail(gp.A, gp.Q[:n, :n]) if n else np.zeros((0, 0))
    sq = _assemble(gp.A, B, gp.Q, gp.a, T, S, ["v"] * k + ["w"] * q)
    iv = [sq.coordinate("v", t, i) for t in range(T) for i in range(k)]
    iw = [sq.coordinate("w", t, k + j) for t in range(T) for j in range(q)]
    scale = 1.0 + np.linalg.norm(sq.H, 2)
    if np.linalg.eigvalsh(sq.H[np.ix_(iv, iv)])[0] < -HESSIAN_TOL * scale:
        raise NotConvexConcave("v-block of the stacked Hessian is not PSD")
    if iw and np.linalg.eigvalsh(sq.H[np.ix_(iw, iw)])[-1] > HESSIAN_TOL * scale:
        raise NotConvexConcave("w-block of the stacked Hessian is not NSD")
    s = np.linalg.svd(sq.H, compute_uv=False)
    if s[-1] <= 1e-12 * max(1.0, s[0]):
        raise SingularSaddle("stationarity system is singular", float(s[-1]))
    U = np.linalg.solve(sq.H, -sq.f)
    v = U[iv].reshape(T, k)
    w = U[iw].reshape(T, q)
    return sq(U), Trajectory(v), Trajectory(w)

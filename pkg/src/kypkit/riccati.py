"""Discrete-time stabilizing completion of squares and LQ optimal values.

The value matrix S (with V(a) = a'Sa = inf Phi and P = -S) is obtained by
Bellman value iteration started from the cost-to-go of a stabilizing
pre-feedback K.  Iterates are advanced by horizon doubling, so after k
sweeps the iterate is exactly the 2^k-step value-iteration iterate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core import (
    DEFAULT_TOL,
    KypProblem,
    NoCertificate,
    NoConvergence,
    NotStabilizable,
    TimeKind,
    check_stabilizable,
    hermitian_part,
    min_eig,
)

MAX_DOUBLINGS = 64
DIVERGENCE_NORM = 1e12
DIVERGENCE_EIG = 1e-6


@dataclass
class RiccatiOptions:
    rtol: float = 1e-12
    max_doublings: int = MAX_DOUBLINGS


@dataclass
class Certificate:
    P: np.ndarray
    C: np.ndarray
    D: np.ndarray
    residual: float
    pencil_margin: float
    time_kind: TimeKind = TimeKind.DISCRETE
    diagnostics: dict = field(default_factory=dict)


@dataclass
class SigmaPForm:
    M: np.ndarray

    def __call__(self, x, u) -> float:
        vec = np.concatenate([np.atleast_1d(x), np.atleast_1d(u)])
        return float(np.real(vec.conj() @ self.M @ vec))


@dataclass
class VerificationReport:
    passed: bool
    residual: float
    residual_ok: bool
    pencil_ok: bool
    pencil_margin: float
    spectrum: np.ndarray
    method: str


def sigma_p_form(problem: KypProblem, P) -> SigmaPForm:
    """M(P) = Q + E0'PE0 - E1'PE1 with E0 = [I, 0] and E1 = [A, B]."""
    from .core import DimensionMismatch

    P = np.asarray(P)
    if P.shape != (problem.n, problem.n):
        raise DimensionMismatch(f"P must be {problem.n}x{problem.n}, got {P.shape}")
    n, m = problem.n, problem.m
    E0 = np.hstack([np.eye(n), np.zeros((n, m))])
    E1 = np.hstack([problem.A, problem.B])
    return SigmaPForm(hermitian_part(problem.Q + E0.T @ P @ E0 - E1.conj().T @ P @ E1))


def _bellman_blocks(problem: KypProblem, S: np.ndarray):
    A, B = problem.A, problem.B
    Mxx = problem.Qxx + A.conj().T @ S @ A
    Mxu = problem.Qxu + A.conj().T @ S @ B
    Ruu = hermitian_part(problem.Quu + B.conj().T @ S @ B)
    return Mxx, Mxu, Ruu


def bellman_step(problem: KypProblem, S: np.ndarray) -> np.ndarray:
    """One step of value iteration: S <- min_u sigma(x, u) + (Ax+Bu)'S(Ax+Bu)."""
    Mxx, Mxu, Ruu = _bellman_blocks(problem, S)
    return hermitian_part(Mxx - Mxu @ np.linalg.solve(Ruu, Mxu.conj().T))


def _doubling(A, G, H, problem, S0, opts):
    """Structure-preserving doubling; H_k is the 2^k-step value above S0."""
    n = A.shape[0]
    I = np.eye(n)
    trace = []
    B = problem.B
    scale = 1.0 + np.linalg.norm(problem.Q, 2)
    for k in range(opts.max_doublings):
        W = I + G @ H
        if np.linalg.cond(W) > 1e14:
            raise NoCertificate("finite-horizon problem became unbounded below (singular doubling step)")
        WA = np.linalg.solve(W, A)
        WG = np.linalg.solve(W, G)
        H_next = hermitian_part(H + A.conj().T @ H @ WA)
        G = hermitian_part(G + A @ WG @ A.conj().T)
        A = A @ WA
        S = S0 + H_next
        step = np.linalg.norm(H_next - H)
        trace.append(step)
        ruu = min_eig(problem.Quu + B.conj().T @ S @ B)
        if not np.all(np.isfinite(S)) or np.linalg.norm(S) > DIVERGENCE_NORM:
            raise NoCertificate("value iteration diverges to -infinity")
        if ruu < -DIVERGENCE_EIG * scale:
            raise NoCertificate("uu-block of M(P) lost positivity during value iteration")
        H = H_next
        if step <= opts.rtol * (1.0 + np.linalg.norm(S)):
            return S, k + 1, trace
    raise NoConvergence("value iteration did not converge", best=S0 + H, trace=trace)


def _lqr_identity_gain(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Gain of the LQR with unit weights; A + BK is Schur when (A, B) is stabilizable."""
    n, m = B.shape
    X = _riccati_pd(A, B, np.eye(n), np.eye(m))
    return -np.linalg.solve(np.eye(m) + B.conj().T @ X @ B, B.conj().T @ X @ A)


def _riccati_pd(A, B, Qx, R):
    G = B @ np.linalg.solve(R, B.conj().T)
    H = Qx.astype(A.dtype if np.iscomplexobj(A) else float)
    I = np.eye(A.shape[0])
    for _ in range(MAX_DOUBLINGS):
        W = I + G @ H
        WA = np.linalg.solve(W, A)
        H_next = hermitian_part(H + A.conj().T @ H @ WA)
        G = hermitian_part(G + A @ np.linalg.solve(W, G) @ A.conj().T)
        A = A @ WA
        if np.linalg.norm(H_next - H) <= 1e-14 * (1 + np.linalg.norm(H_next)):
            return H_next
        H = H_next
    return H


def stabilizing_gain(problem: KypProblem) -> np.ndarray:
    if problem.n == 0:
        return np.zeros((problem.m, 0))
    return _lqr_identity_gain(problem.A, problem.B)


def policy_cost(problem: KypProblem, K: np.ndarray) -> np.ndarray:
    """Cost-to-go S_K of u = Kx: S_K = F'S_K F + [I; K]'Q[I; K], F = A + BK."""
    F = problem.A + problem.B @ K
    T = np.vstack([np.eye(problem.n), K])
    Qcl = hermitian_part(T.conj().T @ problem.Q @ T)
    return hermitian_part(scipy.linalg.solve_discrete_lyapunov(F.conj().T, Qcl))


def value_matrix(problem: KypProblem, options: RiccatiOptions | None = None):
    """Return (S, info) with inf Phi = a'Sa, i.e. S = -P.

    Raises NotStabilizable, NoCertificate or NoConvergence.
    """
    opts = options or RiccatiOptions()
    if not check_stabilizable(problem.sys):
        raise NotStabilizable("(A, B) fails the PBH test on the unstable region")
    n, m = problem.n, problem.m
    if n == 0:
        if min_eig(problem.Quu) <= DIVERGENCE_EIG * (1 + np.linalg.norm(problem.Q)):
            raise NoCertificate("static form is not positive definite")
        return np.zeros((0, 0)), {"doublings": 0, "K": np.zeros((m, 0)), "trace": []}
    K = stabilizing_gain(problem)
    S0 = policy_cost(problem, K)
    Mxx, Mxu, R = _bellman_blocks(problem, S0)
    scale = 1.0 + np.linalg.norm(problem.Q, 2)
    if min_eig(R) <= 1e-12 * scale:
        raise NoCertificate("one-step deviation from the stabilizing policy is not convex")
    A_hat = problem.A - problem.B @ np.linalg.solve(R, Mxu.conj().T)
    H0 = hermitian_part(Mxx - S0 - Mxu @ np.linalg.solve(R, Mxu.conj().T))
    G0 = hermitian_part(problem.B @ np.linalg.solve(R, problem.B.conj().T))
    S, k, trace = _doubling(A_hat, G0, H0, problem, S0, opts)
    # polishing sweeps of plain value iteration, which is the defining map
    for _ in range(2):
        S = bellman_step(problem, S)
    if problem.real_coefficients:
        S = S.real
    return S, {"doublings": k, "K": K, "trace": trace}


def _factor(problem: KypProblem, P: np.ndarray):
    M = sigma_p_form(problem, P).M
    n = problem.n
    Ruu = hermitian_part(M[n:, n:])
    try:
        L = np.linalg.cholesky(Ruu)
    except np.linalg.LinAlgError as exc:
        raise NoCertificate("uu-block of M(P) is not positive definite") from exc
    D = L.conj().T
    C = scipy.linalg.solve_triangular(L, M[n:, :n], lower=True)
    return M, C, D


def stabilizing_completion_dt(problem: KypProblem, options: RiccatiOptions | None = None) -> Certificate:
    """Construct (P, C, D) with sigma + x'Px - (Ax+Bu)'P(Ax+Bu) = |Cx + Du|^2."""
    S, info = value_matrix(problem, options)
    P = -S
    M, C, D = _factor(problem, P)
    report = verify_certificate(problem, Certificate(P, C, D, 0.0, 0.0))
    sv = np.linalg.svd(M, compute_uv=False) if M.size else np.zeros(0)
    rank = int(np.sum(sv > 1e-8 * max(1.0, sv[0] if sv.size else 1.0)))
    return Certificate(
        P=P,
        C=C,
        D=D,
        residual=report.residual,
        pencil_margin=report.pencil_margin,
        diagnostics={
            "doublings": info["doublings"],
            "horizon_equivalent": 2 ** info["doublings"],
            "rank_M": rank,
            "pencil_ok": report.pencil_ok,
            "K": info["K"],
        },
    )


def lq_value(problem: KypProblem, a, certificate: Certificate | None = None) -> float:
    """inf of sum sigma(x(t), u(t)) over finite-energy trajectories from x(0) = a."""
    cert = certificate or stabilizing_completion_dt(problem)
    a = np.asarray(a, dtype=complex if np.iscomplexobj(a) else float).reshape(-1)
    return float(np.real(-(a.conj() @ cert.P @ a)))


def pencil_spectrum_dt(A, B, C, D, tol: float = 1e-9):
    """Roots lambda of det[[lambda A - I, lambda B], [C, D]].

    Returns (roots, method).  With D invertible the roots are 1/mu for the
    eigenvalues mu of A - B D^-1 C, and ``roots`` holds the mu's instead.
    A pencil whose determinant vanishes identically yields ``None``.
    """
    n, m = B.shape
    sD = np.linalg.svd(D, compute_uv=False) if m else np.zeros(0)
    if m and sD[-1] > tol * max(1.0, sD[0]):
        if n == 0:
            return np.zeros(0, dtype=complex), "closed_loop"
        return np.linalg.eigvals(A - B @ np.linalg.solve(D, C)), "closed_loop"
    Y = np.block([[np.eye(n), np.zeros((n, m))], [-C, -D]])
    X = np.block([[A, B], [np.zeros((m, n)), np.zeros((m, m))]])
    alpha, beta = scipy.linalg.eig(Y, X, right=False, homogeneous_eigvals=True)
    size = max(1.0, np.linalg.norm(Y), np.linalg.norm(X))
    if np.any((np.abs(alpha) < 1e-12 * size) & (np.abs(beta) < 1e-12 * size)):
        return None, "singular_pencil"
    finite = np.abs(beta) > 1e-12 * size
    return alpha[finite] / beta[finite], "generalized"


def _pencil_check_dt(A, B, C, D):
    roots, method = pencil_spectrum_dt(A, B, C, D)
    if roots is None:
        return False, -np.inf, np.zeros(0), method
    if method == "closed_loop":
        margin = 1.0 - (np.max(np.abs(roots)) if roots.size else 0.0)
        return margin >= -1e-8, margin, roots, method
    margin = (np.min(np.abs(roots)) - 1.0) if roots.size else np.inf
    return margin >= -1e-8, margin, roots, method


def verify_certificate(problem: KypProblem, certificate: Certificate, tol: float = DEFAULT_TOL) -> VerificationReport:
    """Recompute the completion residual and the pencil condition.

    ``pencil_margin`` is 1 - max|mu| over the closed-loop spectrum when D is
    invertible, else min|lambda| - 1 over the finite pencil roots; the pencil
    condition passes when the margin is at least -1e-8.  The residual check
    is relative: ``residual <= tol * max(1, ||Q||)``.
    """
    P, C, D = certificate.P, certificate.C, certificate.D
    M = sigma_p_form(problem, P).M
    CD = np.hstack([C, D])
    residual = float(np.linalg.norm(M - CD.conj().T @ CD))
    residual_ok = residual <= tol * max(1.0, np.linalg.norm(problem.Q))
    ok, margin, roots, method = _pencil_check_dt(problem.A, problem.B, C, D)
    return VerificationReport(residual_ok and ok, residual, residual_ok, ok, float(margin), roots, method)

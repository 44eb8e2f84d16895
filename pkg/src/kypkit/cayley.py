"""Bilinear (Cayley) transport of continuous-time KYP problems to discrete time.

With r > 0 and rI - A invertible:

    z   = (r + s) / (r - s)            (s = r -> z = inf, s = inf -> z = -1)
    x~  = ((rI - A) x - B u) / sqrt(2r)
    A~  = (rI + A)(rI - A)^-1,   B~ = sqrt(2r) (rI - A)^-1 B

and sigma~(x~, u) = sigma(x, u).  P carries over unchanged for the
completion identity; C, D are recovered through [C D] = [C~ D~] T, where T
is the block matrix of the state-input change of variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    DEFAULT_TOL,
    KypProblem,
    NotControllable,
    NotStabilizable,
    SingularShift,
    TimeKind,
    check_controllable,
    check_stabilizable,
    hermitian_part,
    min_eig,
    validate_problem,
)
from .freq import INF, is_infinite
from .lmi import LmiVerdict, nonstrict_lmi_dt, strict_lmi_dt
from .riccati import Certificate, stabilizing_completion_dt

COND_LIMIT = 1e6
R_SCAN = tuple(2.0 ** (((k + 1) // 2) * (1 if k % 2 else -1)) for k in range(41))


@dataclass
class CayleyMap:
    r: float
    A: np.ndarray
    B: np.ndarray
    A_dt: np.ndarray
    B_dt: np.ndarray
    T: np.ndarray
    condition: float

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def h1(self, x, u):
        x = np.asarray(x)
        u = np.asarray(u)
        r = self.r
        return ((r * x - self.A @ x - self.B @ u) / math.sqrt(2 * r), u)

    def h1_inv(self, xt, u):
        vec = np.linalg.solve(self.T, np.concatenate([np.asarray(xt), np.asarray(u)]))
        return vec[: self.n], vec[self.n :]


def h0(s: complex, r: float) -> complex:
    if is_infinite(s):
        return complex(-1.0, 0.0)
    if s == r:
        return INF
    return (r + s) / (r - s)


def h0_inv(z: complex, r: float) -> complex:
    if is_infinite(z):
        return complex(r, 0.0)
    if z == -1:
        return INF
    return r * (z - 1) / (z + 1)


def map_boundary(cmap: CayleyMap, s: complex) -> complex:
    return h0(s, cmap.r)


def map_boundary_inv(cmap: CayleyMap, z: complex) -> complex:
    return h0_inv(z, cmap.r)


def _choose_r(A: np.ndarray, r_hint: float | None):
    n = A.shape[0]
    candidates = ([r_hint] if r_hint else []) + list(R_SCAN)
    for r in candidates:
        if n == 0:
            return r, 1.0
        cond = np.linalg.cond(r * np.eye(n) - A)
        if cond <= COND_LIMIT:
            return r, float(cond)
    raise SingularShift("no scanned r makes rI - A acceptably conditioned")


def build_cayley(ct_problem: KypProblem, r_hint: float | None = None):
    """Return (CayleyMap, dt_problem) for a continuous-time problem."""
    if ct_problem.time_kind is not TimeKind.CONTINUOUS:
        raise ValueError("build_cayley expects a continuous-time problem")
    A, B = ct_problem.A, ct_problem.B
    n, m = ct_problem.n, ct_problem.m
    r, cond = _choose_r(A, r_hint)
    I = np.eye(n)
    R = r * I - A
    A_dt = (r * I + A) @ np.linalg.inv(R) if n else np.zeros((0, 0))
    B_dt = math.sqrt(2 * r) * np.linalg.solve(R, B) if n else np.zeros((0, m))
    c = 1 / math.sqrt(2 * r)
    T = np.block([[c * R, -c * B], [np.zeros((m, n)), np.eye(m)]])
    Tinv = np.linalg.inv(T)
    Q_dt = hermitian_part(Tinv.conj().T @ ct_problem.Q @ Tinv)
    cmap = CayleyMap(r, A, B, A_dt, B_dt, T, cond)
    return cmap, validate_problem(A_dt, B_dt, Q_dt, TimeKind.DISCRETE)


def inverse_cayley(dt_problem: KypProblem, r: float = 1.0) -> KypProblem:
    """Continuous-time problem whose Cayley image (with this r) is ``dt_problem``.

    Requires -1 not to be an eigenvalue of the discrete-time A.
    """
    At, Bt = dt_problem.A, dt_problem.B
    n, m = dt_problem.n, dt_problem.m
    I = np.eye(n)
    Wi = np.linalg.inv(At + I)
    A = r * (At - I) @ Wi
    # (rI - A) = 2r (A~ + I)^-1, so B = (rI - A) B~ / sqrt(2r)
    B = (r * I - A) @ Bt / math.sqrt(2 * r)
    c = 1 / math.sqrt(2 * r)
    T = np.block([[c * (r * I - A), -c * B], [np.zeros((m, n)), np.eye(m)]])
    Q = hermitian_part(T.conj().T @ dt_problem.Q @ T)
    return validate_problem(A, B, Q, TimeKind.CONTINUOUS)


def sigma_p_form_ct(problem: KypProblem, P, sign: int = -1) -> np.ndarray:
    """Matrix of sigma(x,u) + sign * 2Re[x'P(Ax+Bu)].

    sign=-1 is the completion-of-squares convention, sign=+1 the LMI one.
    """
    n, m = problem.n, problem.m
    P = np.asarray(P)
    E0 = np.hstack([np.eye(n), np.zeros((n, m))])
    E1 = np.hstack([problem.A, problem.B])
    cross = E0.T @ P @ E1
    return hermitian_part(problem.Q + sign * (cross + cross.conj().T))


def pencil_check_ct(A, B, C, D, tol: float = 1e-8):
    """det[[A - sI, B], [C, D]] != 0 on Re s > 0; returns (ok, margin, roots)."""
    import scipy.linalg

    n, m = B.shape
    sD = np.linalg.svd(D, compute_uv=False) if m else np.zeros(0)
    scale = 1.0 + np.linalg.norm(A, 2)
    if m and sD[-1] > 1e-9 * max(1.0, sD[0]):
        roots = np.linalg.eigvals(A - B @ np.linalg.solve(D, C)) if n else np.zeros(0, dtype=complex)
    else:
        Y = np.block([[A, B], [C, D]])
        X = np.block([[np.eye(n), np.zeros((n, m))], [np.zeros((m, n + m))]])
        alpha, beta = scipy.linalg.eig(Y, X, right=False, homogeneous_eigvals=True)
        size = max(1.0, np.linalg.norm(Y))
        if np.any((np.abs(alpha) < 1e-12 * size) & (np.abs(beta) < 1e-12 * size)):
            return False, -math.inf, None
        finite = np.abs(beta) > 1e-12 * size
        roots = alpha[finite] / beta[finite]
    margin = -float(np.max(roots.real)) if roots.size else math.inf
    return margin >= -tol * scale, margin, roots


def ct_certificate_residual(problem: KypProblem, cert: Certificate) -> float:
    M = sigma_p_form_ct(problem, cert.P, sign=-1)
    CD = np.hstack([cert.C, cert.D])
    return float(np.linalg.norm(M - CD.conj().T @ CD))


def ct_theorem_wrapper(ct_problem: KypProblem, which: str, grid_size: int = 512, tol: float = DEFAULT_TOL, r_hint=None):
    """Run a continuous-time KYP statement through its discrete-time twin.

    which = "stabilizing" returns a Certificate satisfying
    sigma - 2Re[x'P(Ax+Bu)] = |Cx+Du|^2 with the pencil nonsingular on Re s > 0.
    which = "strict_lmi" / "nonstrict_lmi" returns an LmiVerdict whose P makes
    sigma + 2Re[x'P(Ax+Bu)] positive (semi)definite.
    """
    if which == "stabilizing":
        if not check_stabilizable(ct_problem.sys):
            raise NotStabilizable("(A, B) fails the PBH test on Re s >= 0")
    elif which == "nonstrict_lmi":
        if not check_controllable(ct_problem.sys):
            raise NotControllable("(A, B) is not controllable")
    elif which != "strict_lmi":
        raise ValueError(f"unknown which={which!r}")

    cmap, dt = build_cayley(ct_problem, r_hint)
    n = ct_problem.n
    if which == "stabilizing":
        dcert = stabilizing_completion_dt(dt)
        Ct, Dt = dcert.C, dcert.D
        C = Ct @ cmap.T[:n, :n]
        D = Dt + Ct @ cmap.T[:n, n:]
        cert = Certificate(dcert.P, C, D, 0.0, 0.0, TimeKind.CONTINUOUS)
        cert.residual = ct_certificate_residual(ct_problem, cert)
        ok, margin, _ = pencil_check_ct(ct_problem.A, ct_problem.B, C, D)
        cert.pencil_margin = margin
        cert.diagnostics = {"r": cmap.r, "cond": cmap.condition, "pencil_ok": ok, "dt_residual": dcert.residual}
        return cert

    verdict = strict_lmi_dt(dt, grid_size, tol) if which == "strict_lmi" else nonstrict_lmi_dt(dt, grid_size, tol)
    out = LmiVerdict(verdict.feasible, verdict.mode, verdict.margin, diagnostics=dict(verdict.diagnostics))
    out.diagnostics.update({"r": cmap.r, "cond": cmap.condition})
    if verdict.witness is not None:
        out.witness = h0_inv(verdict.witness, cmap.r)
        out.diagnostics["witness_dt"] = verdict.witness
    if verdict.P is not None:
        out.P = -verdict.P
        out.margin = min_eig(sigma_p_form_ct(ct_problem, out.P, sign=+1))
    return out


def lq_value_ct(ct_problem: KypProblem, a) -> float:
    """inf of the integral of sigma over finite-energy trajectories from x(0) = a."""
    cert = ct_theorem_wrapper(ct_problem, "stabilizing")
    a = np.asarray(a).reshape(-1)
    return float(np.real(-(a.conj() @ cert.P @ a)))


def verify_certificate_ct(problem: KypProblem, cert: Certificate, tol: float = DEFAULT_TOL):
    """Continuous-time counterpart of riccati.verify_certificate."""
    from .riccati import VerificationReport

    residual = ct_certificate_residual(problem, cert)
    residual_ok = residual <= tol * max(1.0, np.linalg.norm(problem.Q))
    ok, margin, roots = pencil_check_ct(problem.A, problem.B, cert.C, cert.D)
    roots = np.zeros(0) if roots is None else roots
    return VerificationReport(residual_ok and ok, residual, residual_ok, bool(ok), float(margin), roots, "continuous")

"""Strict and non-strict KYP LMI feasibility in discrete time."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    DEFAULT_TOL,
    Inconclusive,
    KypError,
    KypProblem,
    NoConvergence,
    NotControllable,
    check_controllable,
    check_stabilizable,
    min_eig,
    validate_problem,
)
from .freq import check_pd_on_boundary
from .riccati import sigma_p_form, stabilizing_completion_dt

DELTA_PATH = tuple(10.0 ** -k for k in range(2, 9))
CAUCHY_RTOL = 1e-5
NONSTRICT_SLACK = 1e-6


@dataclass
class LmiVerdict:
    feasible: bool
    mode: str
    margin: float
    P: np.ndarray | None = None
    witness: complex | None = None
    diagnostics: dict = field(default_factory=dict)


def _augmented(problem: KypProblem, weight: float) -> KypProblem:
    """Add a fictitious full-rank input penalized by weight*|w|^2.

    (A, [B, I]) is controllable, and sigma_P > 0 for the augmented form
    restricts to sigma_P > 0 on the original (x, u).
    """
    n, m = problem.n, problem.m
    Q = np.zeros((2 * n + m, 2 * n + m), dtype=problem.Q.dtype)
    Q[: n + m, : n + m] = problem.Q
    Q[n + m :, n + m :] = weight * np.eye(n)
    return validate_problem(problem.A, np.hstack([problem.B, np.eye(n)]), Q, problem.time_kind)


def _perturbed(problem: KypProblem, shift: float) -> KypProblem:
    return problem.with_cost(problem.Q + shift * np.eye(problem.n + problem.m))


def _construct_strict(problem: KypProblem, delta: float, grid_size: int, tol: float):
    """P with M(P) >= delta*I, from a stabilizing completion of Q - delta*I."""
    target = problem
    if not check_stabilizable(problem.sys):
        weight = 1.0 + np.linalg.norm(problem.Q, 2)
        for _ in range(40):
            target = _augmented(problem, weight)
            rep = check_pd_on_boundary(target, grid_size, "pd_everywhere", tol, subspace=True)
            if rep.passed and rep.margin > 0.5 * delta:
                break
            weight *= 4
        else:
            raise Inconclusive("no penalty weight makes the augmented problem strictly positive")
        delta = min(delta, 0.5 * rep.margin)
    cert = stabilizing_completion_dt(_perturbed(target, -delta))
    P = cert.P
    if problem.real_coefficients:
        P = np.real(0.5 * (P + P.conj()))
    return P, delta, cert


def strict_lmi_dt(problem: KypProblem, grid_size: int = 512, tol: float = DEFAULT_TOL) -> LmiVerdict:
    """Decide whether some P makes sigma_P positive definite."""
    rep = check_pd_on_boundary(problem, grid_size, "pd_everywhere", tol, subspace=True)
    if not rep.passed:
        w = rep.witness
        return LmiVerdict(
            False,
            "strict",
            w.min_eig,
            witness=w.location,
            diagnostics={"reason": "sigma is not positive definite on L(z*)", "grid": grid_size},
        )
    delta = 0.5 * rep.margin
    try:
        P, delta, cert = _construct_strict(problem, delta, grid_size, tol)
    except KypError as exc:
        raise Inconclusive(f"frequency margin {rep.margin:.3g} but construction failed: {exc}") from exc
    margin = min_eig(sigma_p_form(problem, P).M)
    if not margin > 0:
        raise Inconclusive(f"constructed P has min-eig {margin:.3g}; margin below resolution")
    return LmiVerdict(
        True,
        "strict",
        margin,
        P=P,
        diagnostics={"frequency_margin": rep.margin, "delta": delta, "doublings": cert.diagnostics["doublings"]},
    )


def nonstrict_lmi_dt(problem: KypProblem, grid_size: int = 512, tol: float = DEFAULT_TOL) -> LmiVerdict:
    """Decide whether some P makes sigma_P positive semidefinite; needs (A, B) controllable."""
    if not check_controllable(problem.sys):
        raise NotControllable("(A, B) is not controllable; the non-strict equivalence does not apply")
    rep = check_pd_on_boundary(problem, grid_size, "psd_everywhere", tol, subspace=True)
    if not rep.passed:
        w = rep.witness
        return LmiVerdict(
            False,
            "nonstrict",
            w.min_eig,
            witness=w.location,
            diagnostics={"reason": "sigma is indefinite on L(z*)", "grid": grid_size},
        )
    scale = np.linalg.norm(problem.Q, 2)
    path = []
    previous = None
    converged = False
    for delta in DELTA_PATH:
        try:
            cert = stabilizing_completion_dt(_perturbed(problem, delta))
        except KypError as exc:
            raise NoConvergence(f"delta-path broke at delta={delta:g}: {exc}", trace=path) from exc
        P = cert.P
        path.append((delta, float(np.linalg.norm(P))))
        if previous is not None:
            converged = np.linalg.norm(P - previous) <= CAUCHY_RTOL * (1 + np.linalg.norm(previous))
        previous = P
    if problem.real_coefficients:
        P = np.real(0.5 * (P + P.conj()))
    margin = min_eig(sigma_p_form(problem, P).M)
    if margin < -NONSTRICT_SLACK * max(scale, 1.0):
        raise NoConvergence(f"delta-path ended with min-eig {margin:.3g}", best=P, trace=path)
    return LmiVerdict(
        True,
        "nonstrict",
        margin,
        P=P,
        diagnostics={"delta_path": path, "cauchy": converged},
    )

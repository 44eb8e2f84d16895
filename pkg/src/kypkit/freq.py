"""Frequency-domain evaluation of Pi(z) and boundary positivity checks.

Boundary points are parametrized by an angle theta in [-pi, pi).  In discrete
time the location is exp(j*theta); in continuous time it is
j*w0*tan(theta/2), so theta = -pi lands on s = infinity.
"""

from __future__ import annotations

import cmath
import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar

from .core import (
    DEFAULT_TOL,
    BadPartition,
    KypProblem,
    PoleOfA,
    TimeKind,
    hermitian_part,
    max_eig,
    min_eig,
)

INF = complex(math.inf, 0.0)
POLE_RADIUS = 1e-7
REFINE_DEPTH = 10
EPS_GRID = tuple(2.0 ** -k for k in range(21))


class Classification(str, Enum):
    PD = "PD"
    PSD = "PSD"
    INDEFINITE = "indefinite"
    POLE = "pole_of_A"


def is_infinite(location: complex) -> bool:
    return cmath.isinf(location)


def frequency_scale(problem: KypProblem) -> float:
    if problem.n == 0:
        return 1.0
    return max(1.0, float(np.max(np.abs(np.linalg.eigvals(problem.A)))))


def theta_to_location(theta: float, time_kind: TimeKind, w0: float = 1.0) -> complex:
    if time_kind is TimeKind.DISCRETE:
        return cmath.exp(1j * theta)
    if abs(abs(theta) - math.pi) < 1e-15:
        return INF
    return 1j * w0 * math.tan(theta / 2)


def location_to_theta(location: complex, time_kind: TimeKind, w0: float = 1.0) -> float:
    if time_kind is TimeKind.DISCRETE:
        return cmath.phase(location)
    if is_infinite(location):
        return -math.pi
    return 2 * math.atan(location.imag / w0)


def _is_pole(problem: KypProblem, location: complex) -> bool:
    if is_infinite(location) or problem.n == 0:
        return False
    lam = np.linalg.eigvals(problem.A)
    return bool(np.min(np.abs(lam - location)) <= POLE_RADIUS * max(1.0, abs(location)))


def eval_pi(problem: KypProblem, location: complex) -> np.ndarray:
    """Pi = [L; I]' Q [L; I] with L = (zI - A)^-1 B; the u-block of Q at infinity."""
    n = problem.n
    if is_infinite(location):
        return hermitian_part(problem.Quu).astype(complex)
    if _is_pole(problem, location):
        raise PoleOfA(f"location {location} is an eigenvalue of A")
    L = np.linalg.solve(location * np.eye(n) - problem.A, problem.B) if n else np.zeros((0, problem.m))
    basis = np.vstack([L, np.eye(problem.m)])
    return hermitian_part(basis.conj().T @ problem.Q @ basis)


def subspace_basis(problem: KypProblem, location: complex) -> np.ndarray:
    """Columns spanning L(z) = {(x, u): z x = A x + B u}; L(inf) = {0} x C^m."""
    n, m = problem.n, problem.m
    if is_infinite(location):
        return np.vstack([np.zeros((n, m)), np.eye(m)]).astype(complex)
    if not _is_pole(problem, location):
        L = np.linalg.solve(location * np.eye(n) - problem.A, problem.B) if n else np.zeros((0, m))
        return np.vstack([L, np.eye(m)]).astype(complex)
    pencil = np.hstack([location * np.eye(n) - problem.A, -problem.B])
    scale = max(np.linalg.norm(pencil, 2), 1.0)
    return scipy.linalg.null_space(pencil, rcond=1e-9 * scale).astype(complex)


def restricted_form(problem: KypProblem, location: complex) -> np.ndarray:
    """Q restricted to an orthonormal basis of L(location)."""
    basis, _ = np.linalg.qr(subspace_basis(problem, location))
    return hermitian_part(basis.conj().T @ problem.Q @ basis)


@dataclass
class FrequencySample:
    theta: float
    location: complex
    min_eig: float
    max_eig: float
    classification: Classification
    pi: np.ndarray | None = None


@dataclass
class FrequencyReport:
    samples: list[FrequencySample]
    mode: str
    verdict: str
    passed: bool
    exceptional_count: int
    indefinite_count: int
    margin: float
    witness: FrequencySample | None
    grid_size: int
    tol: float
    subspace: bool
    time_kind: TimeKind = TimeKind.DISCRETE
    notes: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["angle_or_omega", "min_eig", "max_eig", "classification"])
        for s in self.samples:
            coord = s.theta if self.time_kind is TimeKind.DISCRETE else s.location.imag
            writer.writerow([f"{coord:.17g}", f"{s.min_eig:.17g}", f"{s.max_eig:.17g}", s.classification.value])
        return buf.getvalue()


class _Sampler:
    def __init__(self, problem: KypProblem, subspace: bool, tol: float):
        self.problem = problem
        self.subspace = subspace
        self.w0 = frequency_scale(problem)
        self.tol = tol * (1.0 + np.linalg.norm(problem.Q, 2))
        self.cache: dict[float, FrequencySample] = {}

    def location(self, theta: float) -> complex:
        return theta_to_location(theta, self.problem.time_kind, self.w0)

    def classify(self, lo: float) -> Classification:
        if lo > self.tol:
            return Classification.PD
        if lo >= -self.tol:
            return Classification.PSD
        return Classification.INDEFINITE

    def __call__(self, theta: float) -> FrequencySample:
        theta = float(theta)
        if theta in self.cache:
            return self.cache[theta]
        loc = self.location(theta)
        pole = _is_pole(self.problem, loc)
        if self.subspace or pole:
            mat = restricted_form(self.problem, loc)
        else:
            mat = eval_pi(self.problem, loc)
        lo, hi = min_eig(mat), max_eig(mat)
        cls = Classification.POLE if pole and not self.subspace else self.classify(lo)
        sample = FrequencySample(theta, loc, lo, hi, cls, None if pole else mat)
        self.cache[theta] = sample
        return sample


def _boundary_eigen_thetas(problem: KypProblem, w0: float) -> list[float]:
    if problem.n == 0:
        return []
    out = []
    for lam in np.linalg.eigvals(problem.A):
        if problem.time_kind is TimeKind.DISCRETE and abs(abs(lam) - 1) <= POLE_RADIUS:
            out.append(cmath.phase(lam / abs(lam)))
        elif problem.time_kind is TimeKind.CONTINUOUS and abs(lam.real) <= POLE_RADIUS:
            out.append(2 * math.atan(lam.imag / w0))
    return out


def _refine(sampler: _Sampler, thetas: list[float]) -> None:
    """Bisect classification boundaries and polish local minima of min_eig."""
    ordered = sorted(thetas)
    N = len(ordered)
    for i in range(N):
        a, b = ordered[i], ordered[(i + 1) % N]
        if b <= a:
            b += 2 * math.pi
        sa, sb = sampler(_wrap(a)), sampler(_wrap(b))
        for _ in range(REFINE_DEPTH):
            if sa.classification == sb.classification:
                break
            mid = 0.5 * (a + b)
            sm = sampler(_wrap(mid))
            if sm.classification != sa.classification:
                b, sb = mid, sm
            else:
                a, sa = mid, sm
    values = [sampler(_wrap(t)).min_eig for t in ordered]
    minima = [i for i in range(N) if values[i] <= values[i - 1] and values[i] <= values[(i + 1) % N]]
    minima.sort(key=lambda i: values[i])
    step = 2 * math.pi / N
    for i in minima[:4]:
        c = ordered[i]
        res = minimize_scalar(
            lambda t: sampler(_wrap(t)).min_eig,
            bounds=(c - step, c + step),
            method="bounded",
            options={"xatol": 1e-13, "maxiter": 60},
        )
        sampler(_wrap(float(res.x)))


def _wrap(theta: float) -> float:
    return (theta + math.pi) % (2 * math.pi) - math.pi


def check_pd_on_boundary(
    problem: KypProblem,
    grid_size: int = 512,
    mode: str = "pd_except_finite",
    tol: float = DEFAULT_TOL,
    subspace: bool = False,
) -> FrequencyReport:
    """Sample Pi (or sigma restricted to L(z)) on the stability boundary.

    ``mode`` is one of pd_except_finite, pd_everywhere, psd_everywhere.  The
    report's ``verdict`` equals ``mode`` when the check passes and "fails"
    otherwise.  In subspace mode the form is evaluated on an orthonormal basis
    of L(z), so ``margin`` is the least value of sigma on unit vectors of L(z).
    """
    if grid_size < 8:
        raise ValueError("grid_size must be at least 8")
    if mode not in ("pd_except_finite", "pd_everywhere", "psd_everywhere"):
        raise ValueError(f"unknown mode {mode!r}")
    sampler = _Sampler(problem, subspace, tol)
    thetas = [-math.pi + 2 * math.pi * k / grid_size for k in range(grid_size)]
    thetas += _boundary_eigen_thetas(problem, sampler.w0)
    for t in thetas:
        sampler(t)
    _refine(sampler, thetas)
    samples = sorted(sampler.cache.values(), key=lambda s: s.theta)

    indefinite = [s for s in samples if s.classification is Classification.INDEFINITE]
    merely = [s for s in samples if s.classification in (Classification.PSD, Classification.POLE)]
    finite = [s for s in samples if s.classification is not Classification.POLE]
    witness = min(finite, key=lambda s: s.min_eig) if finite else None
    margin = witness.min_eig if witness else math.inf

    if mode == "psd_everywhere":
        passed = not indefinite
    elif mode == "pd_everywhere":
        passed = not indefinite and not merely
    else:
        passed = not indefinite and len(merely) <= math.ceil(grid_size / 100)
    notes = []
    if mode == "pd_except_finite":
        notes.append("finite exceptional set approximated by isolated PSD samples after refinement")
    return FrequencyReport(
        samples=samples,
        mode=mode,
        verdict=mode if passed else "fails",
        passed=passed,
        exceptional_count=len(merely),
        indefinite_count=len(indefinite),
        margin=margin,
        witness=witness,
        grid_size=grid_size,
        tol=sampler.tol,
        subspace=subspace,
        time_kind=problem.time_kind,
        notes=notes,
    )


@dataclass(frozen=True)
class BlockPartition:
    k: int
    q: int

    def split(self, pi: np.ndarray):
        k = self.k
        return pi[:k, :k], pi[:k, k:], pi[k:, :k], pi[k:, k:]


@dataclass
class MinimaxCondition:
    eps: float
    z0: complex
    gamma_sup: float
    z0_margin: float


def coupling_ratio(pi: np.ndarray, partition: BlockPartition, tol: float) -> float:
    """Smallest c with |Re v'Pi12 w| <= c * sqrt(v'Pi11 v * w'(-Pi22) w).

    The epsilon-scaled block matrix is PSD exactly when eps * ratio <= 1.
    Returns inf when Pi11 is not PSD, Pi22 not NSD, or Pi12 leaks into a
    null direction of the diagonal blocks.
    """
    P11, P12, _, P22 = partition.split(pi)
    scale = 1.0 + np.linalg.norm(pi, 2)
    if min_eig(P11) < -tol * scale or max_eig(P22) > tol * scale:
        return math.inf
    if P12.size == 0:
        return 0.0
    eta = 1e-14 * scale
    W1 = _inv_sqrt(hermitian_part(P11) + eta * np.eye(partition.k))
    W2 = _inv_sqrt(hermitian_part(-P22) + eta * np.eye(partition.q))
    return float(np.linalg.norm(W1 @ P12 @ W2, 2))


def _inv_sqrt(M: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(M)
    w = np.maximum(w, np.finfo(float).tiny)
    return (V / np.sqrt(w)) @ V.conj().T


def check_minimax_condition(
    problem: KypProblem,
    partition: BlockPartition,
    eps_grid=EPS_GRID,
    grid_size: int = 512,
    tol: float = DEFAULT_TOL,
) -> MinimaxCondition | None:
    """Search the geometric eps grid for the block condition on Pi11, Pi12, Pi22.

    Returns the first eps for which [[Pi11, eps Pi12], [eps Pi21, -Pi22]] is PSD
    at every sampled boundary point (with the coupling ratio's supremum
    polished by local maximization), together with a point z0 where Pi11 > 0
    and Pi22 < 0 strictly.  None when no candidate works.
    """
    if partition.k + partition.q != problem.m or partition.k < 1:
        raise BadPartition(f"k+q={partition.k + partition.q} but m={problem.m}")
    time_kind = problem.time_kind
    w0 = frequency_scale(problem)
    scale = 1.0 + np.linalg.norm(problem.Q, 2)
    cache: dict[float, tuple] = {}

    def at(theta: float):
        theta = _wrap(float(theta))
        if theta not in cache:
            loc = theta_to_location(theta, time_kind, w0)
            try:
                pi = eval_pi(problem, loc)
            except PoleOfA:
                cache[theta] = (loc, None, math.inf, -math.inf)
                return cache[theta]
            P11, _, _, P22 = partition.split(pi)
            strict = min(min_eig(P11), -max_eig(P22))
            cache[theta] = (loc, pi, coupling_ratio(pi, partition, tol), strict)
        return cache[theta]

    thetas = [-math.pi + 2 * math.pi * k / grid_size for k in range(grid_size)]
    ratios = [at(t)[2] for t in thetas]
    if any(math.isinf(r) for r in ratios):
        return None
    step = 2 * math.pi / grid_size
    order = np.argsort(ratios)[::-1]
    for i in order[:4]:
        c = thetas[i]
        minimize_scalar(
            lambda t: -at(t)[2],
            bounds=(c - step, c + step),
            method="bounded",
            options={"xatol": 1e-14, "maxiter": 200},
        )
    gamma_sup = max(v[2] for v in cache.values())
    if math.isinf(gamma_sup):
        return None
    best = max(cache.values(), key=lambda v: v[3])
    if best[3] <= tol * scale:
        return None
    for eps in eps_grid:
        if eps * gamma_sup > 1 + 1e-9:
            continue
        ok = True
        for loc, pi, _, _ in cache.values():
            P11, P12, P21, P22 = partition.split(pi)
            block = np.block([[P11, eps * P12], [eps * P21, -P22]])
            if min_eig(block) < -tol * scale:
                ok = False
                break
        if ok:
            return MinimaxCondition(eps, best[0], gamma_sup, best[3])
    return None

"""Conditional and complete integral quadratic constraints on trace evidence.

A system is represented by finitely many input/output pairs (v, w), each
finitely supported (zero after its last sample).  The state recursion
x(t+1) = A x(t) + B1 v(t) + B2 w(t) is simulated for every initial state in
X0, and sums of sigma(x, v, w) are compared against -kappa(x0, v(0), w(0)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import (
    DimensionMismatch,
    TimeKind,
    Trajectory,
    is_hurwitz,
    is_schur,
    min_eig,
    validate_problem,
)
from .freq import BlockPartition, check_minimax_condition
from .minimax import zero_input_tail
from .riccati import _pencil_check_dt

B1_TOL = 1e-9


@dataclass
class Kappa:
    """kappa(x0, v0, w0) = z'Mz + const with z = (x0, v0, w0), or an opaque callback."""

    M: np.ndarray | None = None
    const: float = 0.0
    callback: Callable | None = None

    def __call__(self, x0, v0, w0) -> float:
        if self.callback is not None:
            return float(self.callback(np.asarray(x0), np.asarray(v0), np.asarray(w0)))
        val = self.const
        if self.M is not None:
            z = np.concatenate([np.atleast_1d(x0), np.atleast_1d(v0), np.atleast_1d(w0)])
            val += float(z @ self.M @ z)
        return float(val)


@dataclass(eq=False)
class IqcSetup:
    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    Q: np.ndarray
    X0: list
    kappa: Kappa
    time_kind: TimeKind = TimeKind.DISCRETE

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = self.A.shape[0]
        self.B1 = np.asarray(self.B1, dtype=float).reshape(n, -1)
        self.B2 = np.asarray(self.B2, dtype=float).reshape(n, -1)
        self.Q = np.asarray(self.Q, dtype=float)
        self.time_kind = TimeKind.parse(self.time_kind)
        if self.Q.shape != (n + self.k + self.q,) * 2:
            raise DimensionMismatch(f"Q must have order n+k+q={n + self.k + self.q}")
        self.X0 = [np.asarray(x, dtype=float).reshape(n) for x in self.X0]
        stable = is_schur(self.A) if self.time_kind is TimeKind.DISCRETE else is_hurwitz(self.A)
        if not stable:
            raise ValueError("A must be stable for the declared time kind")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def k(self) -> int:
        return self.B1.shape[1]

    @property
    def q(self) -> int:
        return self.B2.shape[1]

    def sigma(self, x, v, w) -> float:
        z = np.concatenate([x, v, w])
        return float(z @ self.Q @ z)

    def kyp(self):
        return validate_problem(self.A, np.hstack([self.B1, self.B2]), self.Q, self.time_kind)


@dataclass
class IqcCertificate:
    C: np.ndarray
    D1: np.ndarray
    D2: np.ndarray

    def check_shapes(self, setup: IqcSetup) -> None:
        k, n, q = setup.k, setup.n, setup.q
        if self.C.shape != (k, n) or self.D1.shape != (k, k) or self.D2.shape != (k, q):
            raise DimensionMismatch(f"certificate shapes must be ({k},{n}), ({k},{k}), ({k},{q})")


@dataclass
class SystemTraces:
    """Finite input/output pairs standing in for the system's graph."""

    pairs: list

    def __post_init__(self):
        fixed = []
        for v, w in self.pairs:
            v = v if isinstance(v, Trajectory) else Trajectory.from_list(v)
            w = w if isinstance(w, Trajectory) else Trajectory.from_list(w)
            fixed.append((v, w))
        self.pairs = fixed

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass
class HypothesisReport:
    minimax_condition: bool
    dominance: bool
    pencil: bool
    dominance_min_eig: float
    pencil_margin: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.minimax_condition and self.dominance and self.pencil


@dataclass
class IqcTestReport:
    passed: bool
    worst_margin: float
    worst: dict
    violations: int
    margins: list = field(default_factory=list)


def check_hypotheses(setup: IqcSetup, certificate: IqcCertificate, grid_size: int = 512) -> HypothesisReport:
    """Evaluate (a) the block frequency condition, (b1) dominance by |Cx+D1v+D2w|^2, (b2) the pencil."""
    certificate.check_shapes(setup)
    prob = setup.kyp()
    cond = check_minimax_condition(prob, BlockPartition(setup.k, setup.q), grid_size=grid_size)
    F = np.hstack([certificate.C, certificate.D1, certificate.D2])
    dom = min_eig(F.T @ F - setup.Q)
    if setup.time_kind is TimeKind.DISCRETE:
        ok, margin, _, method = _pencil_check_dt(setup.A, setup.B1, certificate.C, certificate.D1)
    else:
        from .cayley import pencil_check_ct

        ok, margin, _ = pencil_check_ct(setup.A, setup.B1, certificate.C, certificate.D1)
        method = "continuous"
    return HypothesisReport(
        minimax_condition=cond is not None,
        dominance=dom >= -B1_TOL,
        pencil=bool(ok),
        dominance_min_eig=dom,
        pencil_margin=float(margin),
        details={"eps": None if cond is None else cond.eps, "pencil_method": method},
    )


def _simulate_sums(setup: IqcSetup, v: Trajectory, w: Trajectory, x0: np.ndarray, horizon: int):
    """Partial sums S(T) = sum_{t<=T} sigma for T = 0..horizon-1 and the final state."""
    x = x0.copy()
    sums = np.zeros(horizon)
    acc = 0.0
    vp, wp = v.padded(horizon).real, w.padded(horizon).real
    for t in range(horizon):
        acc += setup.sigma(x, vp[t], wp[t])
        sums[t] = acc
        x = setup.A @ x + setup.B1 @ vp[t] + setup.B2 @ wp[t]
    return sums, x


def _first(traj: Trajectory, dim: int) -> np.ndarray:
    return traj.samples[0].real if traj.length else np.zeros(dim)


def test_conditional(setup: IqcSetup, traces: SystemTraces, tol: float = 1e-9) -> IqcTestReport:
    """Full-horizon sums (with the zero-input tail closure) against -kappa."""
    S0 = zero_input_tail(setup.A, setup.Q[: setup.n, : setup.n])
    margins = []
    worst = {"margin": math.inf}
    for i, (v, w) in enumerate(traces.pairs):
        N = max(v.length, w.length, 1)
        for j, x0 in enumerate(setup.X0):
            sums, xN = _simulate_sums(setup, v, w, x0, N)
            total = sums[-1] + float(xN @ S0 @ xN)
            m = total + setup.kappa(x0, _first(v, setup.k), _first(w, setup.q))
            margins.append(m)
            if m < worst["margin"]:
                worst = {"margin": m, "trace": i, "x0": j}
    worst_margin = min(margins) if margins else math.inf
    violations = sum(m < -tol for m in margins)
    return IqcTestReport(violations == 0, worst_margin, worst, violations, margins)


def test_complete(setup: IqcSetup, traces: SystemTraces, horizons=None, tol: float = 1e-9) -> IqcTestReport:
    """Every partial sum over t = 0..T against -kappa, for T in ``horizons``.

    Without ``horizons`` every T up to the trace length is checked.  Traces are
    continued with zero inputs when a requested T exceeds their length.
    """
    margins = []
    worst = {"margin": math.inf}
    for i, (v, w) in enumerate(traces.pairs):
        N = max(v.length, w.length, 1)
        Ts = list(range(N)) if horizons is None else sorted(int(T) for T in horizons)
        span = max(Ts) + 1 if Ts else N
        for j, x0 in enumerate(setup.X0):
            sums, _ = _simulate_sums(setup, v, w, x0, span)
            kap = setup.kappa(x0, _first(v, setup.k), _first(w, setup.q))
            for T in Ts:
                m = sums[T] + kap
                margins.append(m)
                if m < worst["margin"]:
                    worst = {"margin": m, "trace": i, "x0": j, "T": T}
    worst_margin = min(margins) if margins else math.inf
    violations = sum(m < -tol for m in margins)
    return IqcTestReport(violations == 0, worst_margin, worst, violations, margins)


@dataclass
class WitnessReport:
    passed: bool
    prefix_ok: bool
    decreasing: bool
    final_distance: float
    distances: list
    reason: str = ""


def _agree(a: Trajectory, b: Trajectory, T: int, tol: float) -> bool:
    return np.allclose(a.padded(T + 1), b.padded(T + 1), atol=tol, rtol=0)


def check_weak_causal_stability_witness(
    traces_pair,
    T: int,
    v_star,
    witnesses,
    tol: float = 1e-6,
    member: Callable | None = None,
) -> WitnessReport:
    """Check supplied evidence for the prefix-respecting approximation property.

    ``traces_pair`` is the base pair (v, w); ``v_star`` a square-summable input
    equal to v up to T; ``witnesses`` a sequence of pairs (v_i, w_i) that must
    agree with (v, w) up to T and whose v_i approach v_star with distances
    non-increasing and ending below ``tol``.  ``member`` optionally tests that
    each witness belongs to the system.
    """
    v, w = (x if isinstance(x, Trajectory) else Trajectory.from_list(x) for x in traces_pair)
    v_star = v_star if isinstance(v_star, Trajectory) else Trajectory.from_list(v_star)
    witnesses = [
        tuple(x if isinstance(x, Trajectory) else Trajectory.from_list(x) for x in pair) for pair in witnesses
    ]
    if not witnesses:
        return WitnessReport(False, False, False, math.inf, [], "empty witness family")
    if not _agree(v, v_star, T, 1e-12):
        return WitnessReport(False, False, False, math.inf, [], "v_star differs from v before T")
    prefix_ok = all(_agree(vi, v, T, 1e-12) and _agree(wi, w, T, 1e-12) for vi, wi in witnesses)
    if member is not None and not all(member(vi, wi) for vi, wi in witnesses):
        return WitnessReport(False, prefix_ok, False, math.inf, [], "a witness is not in the system")
    dists = []
    for vi, _ in witnesses:
        L = max(vi.length, v_star.length)
        dists.append(float(np.linalg.norm(vi.padded(L) - v_star.padded(L))))
    decreasing = all(b <= a + 1e-15 for a, b in zip(dists, dists[1:]))
    passed = prefix_ok and decreasing and dists[-1] <= tol
    reason = "" if passed else ("prefix mismatch" if not prefix_ok else "distances do not shrink below tol")
    return WitnessReport(passed, prefix_ok, decreasing, dists[-1], dists, reason)


# the unit-delay system w(t+1) = v(t), w(0) = 0, with sigma = |w|^2 - |v|^2


def delay_setup() -> IqcSetup:
    return IqcSetup(
        A=np.zeros((1, 1)),
        B1=np.zeros((1, 1)),
        B2=np.zeros((1, 1)),
        Q=np.diag([0.0, -1.0, 1.0]),
        X0=[np.zeros(1)],
        kappa=Kappa(M=np.diag([0.0, 1.0, 0.0])),
    )


def delay_response(v) -> Trajectory:
    """Output of the unit delay; one sample longer than the input."""
    v = np.asarray(v, dtype=float).reshape(-1, 1)
    return Trajectory(np.vstack([np.zeros((1, 1)), v]))


def delay_traces(count: int = 50, length: int = 20, seed: int = 0) -> SystemTraces:
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(count):
        L = int(rng.integers(1, length + 1))
        v = rng.standard_normal(L) * rng.uniform(0.1, 10)
        pairs.append((Trajectory(np.append(v, 0.0).reshape(-1, 1)), delay_response(v)))
    return SystemTraces(pairs)


def spike_trace(M: float, T: int) -> tuple:
    v = np.zeros(T + 1)
    v[T] = M
    return Trajectory(np.append(v, 0.0).reshape(-1, 1)), delay_response(v)


def delay_counterexample_certificate() -> IqcCertificate:
    return IqcCertificate(C=np.zeros((1, 1)), D1=np.zeros((1, 1)), D2=np.eye(1))


# keep test collectors from mistaking the checks for test functions
test_conditional.__test__ = False
test_complete.__test__ = False

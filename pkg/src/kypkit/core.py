"""Shared numeric records, validation and PBH rank tests."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

HERMITIAN_TOL = 1e-9
RANK_TOL = 1e-9
DEFAULT_TOL = 1e-8


class KypError(Exception):
    """Base class for all errors raised by kypkit."""


class DimensionMismatch(KypError, ValueError):
    pass


class NotHermitian(KypError, ValueError):
    pass


class NotStabilizable(KypError):
    pass


class NotControllable(KypError):
    pass


class NoCertificate(KypError):
    pass


class NoConvergence(KypError):
    """Iteration stalled; ``best`` carries the best iterate when available."""

    def __init__(self, msg: str, best=None, trace=None):
        super().__init__(msg)
        self.best = best
        self.trace = trace


class Inconclusive(KypError):
    pass


class PoleOfA(KypError, ValueError):
    pass


class BadPartition(KypError, ValueError):
    pass


class SingularShift(KypError):
    pass


class NotConvexConcave(KypError):
    pass


class SingularSaddle(KypError):
    def __init__(self, msg: str, min_singular_value: float = 0.0):
        super().__init__(msg)
        self.min_singular_value = min_singular_value


class HypothesisFails(KypError):
    pass


class DiscretizationInconsistent(KypError):
    pass


class NotBoundedBelow(KypError):
    pass


class TimeKind(str, Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"

    @classmethod
    def parse(cls, value) -> "TimeKind":
        if isinstance(value, cls):
            return value
        aliases = {"dt": cls.DISCRETE, "ct": cls.CONTINUOUS}
        key = str(value).lower()
        return aliases.get(key) or cls(key)


def _as_matrix(raw, name: str) -> np.ndarray:
    arr = np.asarray(raw)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if np.iscomplexobj(arr) and np.all(arr.imag == 0):
        arr = arr.real
    dtype = complex if np.iscomplexobj(arr) else float
    return np.array(arr, dtype=dtype)


def _is_real(*arrays: np.ndarray) -> bool:
    return all(not np.iscomplexobj(a) for a in arrays)


def hermitian_part(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.conj().T)


@dataclass(frozen=True, eq=False)
class HermitianForm:
    Q: np.ndarray

    def __post_init__(self):
        Q = self.Q
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise DimensionMismatch(f"Q must be square, got {Q.shape}")
        scale = max(np.linalg.norm(Q), 1.0)
        if np.linalg.norm(Q - Q.conj().T) > 1e-12 * scale:
            raise NotHermitian("HermitianForm requires a symmetrized matrix")

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    def __call__(self, vec) -> float:
        vec = np.asarray(vec)
        return float(np.real(vec.conj() @ self.Q @ vec))


@dataclass(frozen=True, eq=False)
class StateSpacePair:
    A: np.ndarray
    B: np.ndarray
    time_kind: TimeKind = TimeKind.DISCRETE

    def __post_init__(self):
        A, B = self.A, self.B
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise DimensionMismatch(f"B has shape {B.shape}, expected ({A.shape[0]}, m)")
        if B.shape[1] < 1:
            raise DimensionMismatch("B needs at least one input column")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True, eq=False)
class KypProblem:
    """The triple (A, B, Q) defining x+ = Ax + Bu and sigma(x, u) = [x; u]' Q [x; u]."""

    sys: StateSpacePair
    cost: HermitianForm
    real_coefficients: bool = field(default=True)

    def __post_init__(self):
        if self.cost.dim != self.sys.n + self.sys.m:
            raise DimensionMismatch(
                f"cost has order {self.cost.dim}, expected n+m={self.sys.n + self.sys.m}"
            )

    @property
    def A(self) -> np.ndarray:
        return self.sys.A

    @property
    def B(self) -> np.ndarray:
        return self.sys.B

    @property
    def Q(self) -> np.ndarray:
        return self.cost.Q

    @property
    def n(self) -> int:
        return self.sys.n

    @property
    def m(self) -> int:
        return self.sys.m

    @property
    def time_kind(self) -> TimeKind:
        return self.sys.time_kind

    @property
    def Qxx(self) -> np.ndarray:
        return self.Q[: self.n, : self.n]

    @property
    def Qxu(self) -> np.ndarray:
        return self.Q[: self.n, self.n :]

    @property
    def Quu(self) -> np.ndarray:
        return self.Q[self.n :, self.n :]

    def sigma(self, x, u) -> float:
        return self.cost(np.concatenate([np.atleast_1d(x), np.atleast_1d(u)]))

    def with_cost(self, Q: np.ndarray) -> "KypProblem":
        return validate_problem(self.A, self.B, Q, self.time_kind)

    def with_inputs(self, columns) -> "KypProblem":
        """Problem restricted to a subset of input columns (others fixed at zero)."""
        columns = list(columns)
        idx = list(range(self.n)) + [self.n + c for c in columns]
        return validate_problem(self.A, self.B[:, columns], self.Q[np.ix_(idx, idx)], self.time_kind)


@dataclass(frozen=True)
class Trajectory:
    """Finite sequence of vectors; every sample past the end is taken to be zero."""

    samples: np.ndarray

    def __post_init__(self):
        if self.samples.ndim != 2:
            raise DimensionMismatch("trajectory samples must be stacked as (T+1, dim)")

    @classmethod
    def from_list(cls, seq, dim: int | None = None) -> "Trajectory":
        arr = np.asarray(seq, dtype=float if not np.iscomplexobj(seq) else complex)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1 if dim is None else dim)
        if arr.size == 0 and dim is not None:
            arr = arr.reshape(0, dim)
        return cls(arr)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def length(self) -> int:
        return self.samples.shape[0]

    def padded(self, T: int) -> np.ndarray:
        """Samples 0..T-1, zero-filled or truncated as needed."""
        out = np.zeros((T, self.dim), dtype=self.samples.dtype)
        k = min(T, self.length)
        out[:k] = self.samples[:k]
        return out

    def norm(self) -> float:
        return float(np.linalg.norm(self.samples))


def validate_problem(raw_A, raw_B, raw_Q, time_kind="discrete") -> KypProblem:
    A = _as_matrix(raw_A, "A")
    B = _as_matrix(raw_B, "B")
    Q = _as_matrix(raw_Q, "Q")
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"A must be square, got {A.shape}")
    if B.shape[0] != A.shape[0]:
        raise DimensionMismatch(f"B has {B.shape[0]} rows but A is {A.shape[0]}x{A.shape[0]}")
    n, m = B.shape
    if Q.shape != (n + m, n + m):
        raise DimensionMismatch(f"Q has shape {Q.shape}, expected ({n + m}, {n + m})")
    scale = max(np.linalg.norm(Q), 1.0)
    if np.linalg.norm(Q - Q.conj().T) > HERMITIAN_TOL * scale:
        raise NotHermitian("Q differs from its conjugate transpose beyond tolerance")
    Q = hermitian_part(Q)
    if np.iscomplexobj(Q) and np.all(Q.imag == 0):
        Q = Q.real
    real = _is_real(A, B, Q)
    pair = StateSpacePair(A, B, TimeKind.parse(time_kind))
    return KypProblem(pair, HermitianForm(Q), real)


def _bad_region(lam: np.ndarray, time_kind: TimeKind) -> np.ndarray:
    if time_kind is TimeKind.DISCRETE:
        return np.abs(lam) >= 1 - RANK_TOL
    return lam.real >= -RANK_TOL


def _pbh_ok(A: np.ndarray, B: np.ndarray, lams) -> bool:
    n = A.shape[0]
    scale = max(np.linalg.norm(np.hstack([A, B]), 2), np.finfo(float).tiny)
    for lam in lams:
        s = np.linalg.svd(np.hstack([lam * np.eye(n) - A, B]), compute_uv=False)
        if s[-1] <= RANK_TOL * scale:
            return False
    return True


def check_stabilizable(sys: StateSpacePair) -> bool:
    """PBH rank test restricted to eigenvalues in the unstable region."""
    if sys.n == 0:
        return True
    lam = np.linalg.eigvals(sys.A)
    return _pbh_ok(sys.A, sys.B, lam[_bad_region(lam, sys.time_kind)])


def check_controllable(sys: StateSpacePair) -> bool:
    if sys.n == 0:
        return True
    return _pbh_ok(sys.A, sys.B, np.linalg.eigvals(sys.A))


def is_schur(A: np.ndarray, margin: float = 1e-9) -> bool:
    return A.shape[0] == 0 or np.max(np.abs(np.linalg.eigvals(A))) < 1 - margin


def is_hurwitz(A: np.ndarray, margin: float = 1e-9) -> bool:
    return A.shape[0] == 0 or np.max(np.linalg.eigvals(A).real) < -margin


def min_eig(M: np.ndarray) -> float:
    if M.shape[0] == 0:
        return np.inf
    return float(np.linalg.eigvalsh(hermitian_part(M))[0])


def max_eig(M: np.ndarray) -> float:
    if M.shape[0] == 0:
        return -np.inf
    return float(np.linalg.eigvalsh(hermitian_part(M))[-1])

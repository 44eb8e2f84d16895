import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kypkit.core import (
    DimensionMismatch,
    NotHermitian,
    StateSpacePair,
    TimeKind,
    Trajectory,
    check_controllable,
    check_stabilizable,
    validate_problem,
)


def pair(A, B, kind="discrete"):
    return StateSpacePair(np.atleast_2d(np.asarray(A, float)), np.atleast_2d(np.asarray(B, float)), TimeKind.parse(kind))


def test_identity_problem():
    p = validate_problem([[0.0]], [[1.0]], np.eye(2))
    assert (p.n, p.m) == (1, 1)
    assert p.real_coefficients


def test_asymmetric_cost_rejected():
    with pytest.raises(NotHermitian):
        validate_problem([[0.0]], [[1.0]], [[0.0, 1.0], [0.0, 0.0]])


def test_shape_mismatch_rejected():
    with pytest.raises(DimensionMismatch):
        validate_problem(np.zeros((2, 2)), np.zeros((3, 1)), np.eye(3))


def test_complex_cost_flags_complex():
    p = validate_problem([[0.0]], [[1.0]], [[1.0, 0.5j], [-0.5j, 1.0]])
    assert not p.real_coefficients


@pytest.mark.parametrize(
    "A, B, expected",
    [([[0.5]], [[0.0]], True), ([[2.0]], [[0.0]], False), ([[2.0]], [[1.0]], True)],
)
def test_stabilizable_examples(A, B, expected):
    assert check_stabilizable(pair(A, B)) is expected


def test_stabilizable_continuous_uses_half_plane():
    assert check_stabilizable(pair([[-0.5]], [[0.0]], "ct"))
    assert not check_stabilizable(pair([[0.5]], [[0.0]], "ct"))


@pytest.mark.parametrize(
    "A, B, expected",
    [
        ([[0.0]], [[1.0]], True),
        ([[0.0, 0.0], [0.0, 0.0]], [[1.0], [0.0]], False),
        ([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]], True),
    ],
)
def test_controllable_examples(A, B, expected):
    assert check_controllable(pair(A, B)) is expected


def test_trajectory_padding():
    tr = Trajectory.from_list([1.0, 2.0])
    assert tr.dim == 1 and tr.length == 2
    np.testing.assert_array_equal(tr.padded(4).ravel(), [1.0, 2.0, 0.0, 0.0])
    np.testing.assert_array_equal(tr.padded(1).ravel(), [1.0])


dims = st.tuples(st.integers(1, 4), st.integers(1, 3), st.integers(0, 2**31 - 1))


@given(dims)
def test_validate_is_idempotent(d):
    n, m, seed = d
    rng = np.random.default_rng(seed)
    Q = rng.standard_normal((n + m, n + m))
    p = validate_problem(rng.standard_normal((n, n)), rng.standard_normal((n, m)), Q + Q.T)
    again = validate_problem(p.A, p.B, p.Q, p.time_kind)
    np.testing.assert_array_equal(again.Q, p.Q)
    np.testing.assert_array_equal(again.A, p.A)
    assert again.real_coefficients == p.real_coefficients


@given(dims)
def test_controllable_implies_stabilizable(d):
    n, m, seed = d
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, m)) * rng.integers(0, 2)
    sys = pair(A, B if B.any() else np.zeros((n, m)))
    if check_controllable(sys):
        assert check_stabilizable(sys)


@given(dims)
def test_pbh_invariant_under_orthogonal_change(d):
    n, m, seed = d
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, m))
    if rng.random() < 0.5:
        B[:, :] = 0.0
        B[0, 0] = 1.0
        A[0, 1:] = 0.0
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    s1, s2 = pair(A, B), pair(q.T @ A @ q, q.T @ B)
    assert check_controllable(s1) == check_controllable(s2)
    assert check_stabilizable(s1) == check_stabilizable(s2)

import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from kypkit.core import NoCertificate, NotStabilizable, validate_problem
from kypkit.freq import eval_pi
from kypkit.instances import random_pd_problem
from kypkit.minimax import counterexample_game
from kypkit.oracle import finite_horizon_lq
from kypkit.riccati import (
    Certificate,
    lq_value,
    pencil_spectrum_dt,
    policy_cost,
    sigma_p_form,
    stabilizing_completion_dt,
    verify_certificate,
)

# closed form of the scalar fixed point for A = 0.5, B = 1, Q = I
W_HALF = (0.25 + math.sqrt(65) / 4) / 2


def half_problem():
    return validate_problem([[0.5]], [[1.0]], np.eye(2))


def test_sigma_p_zero_is_q(rng):
    p = random_pd_problem(rng)
    np.testing.assert_array_equal(sigma_p_form(p, np.zeros((p.n, p.n))).M, p.Q)


def test_sigma_p_scalar_example():
    p = validate_problem([[0.0]], [[1.0]], np.eye(2))
    np.testing.assert_allclose(sigma_p_form(p, [[-1.0]]).M, np.diag([0.0, 2.0]))


def test_sigma_p_matches_direct_expansion(rng):
    n, m = 3, 2
    A, B = rng.standard_normal((n, n)), rng.standard_normal((n, m))
    X = rng.standard_normal((n + m, n + m))
    P = rng.standard_normal((n, n))
    P = P + P.T
    p = validate_problem(A, B, X + X.T)
    form = sigma_p_form(p, P)
    for _ in range(100):
        x, u = rng.standard_normal(n), rng.standard_normal(m)
        xn = A @ x + B @ u
        direct = p.sigma(x, u) + x @ P @ x - xn @ P @ xn
        assert abs(form(x, u) - direct) <= 1e-10 * (1 + abs(direct))


def test_completion_trivial_example():
    cert = stabilizing_completion_dt(validate_problem([[0.0]], [[1.0]], np.eye(2)))
    np.testing.assert_allclose(cert.P, [[-1.0]], atol=1e-12)
    np.testing.assert_allclose(cert.C, [[0.0]], atol=1e-12)
    np.testing.assert_allclose(abs(cert.D), [[math.sqrt(2)]], atol=1e-12)


def test_completion_scalar_fixed_point():
    cert = stabilizing_completion_dt(half_problem())
    np.testing.assert_allclose(cert.P, [[-W_HALF]], atol=1e-12)
    assert abs(W_HALF - (1 + 0.25 * W_HALF / (1 + W_HALF))) < 1e-14
    # independent confirmation by the brute-force stacked solver
    assert abs(finite_horizon_lq(half_problem(), [1.0], 50) - W_HALF) < 1e-8


def test_completion_counterexample_joint_inputs_fails():
    p = counterexample_game().kyp()
    assert np.linalg.eigvalsh(eval_pi(p, -1.0 + 0j))[0] < 0
    with pytest.raises(NoCertificate):
        stabilizing_completion_dt(p)


def test_completion_not_stabilizable():
    with pytest.raises(NotStabilizable):
        stabilizing_completion_dt(validate_problem([[2.0]], [[0.0]], np.eye(2)))


def test_lq_values():
    assert abs(lq_value(validate_problem([[0.0]], [[1.0]], np.eye(2)), [1.0]) - 1.0) < 1e-12
    assert abs(lq_value(half_problem(), [2.0]) - 4 * W_HALF) < 1e-10
    assert abs(lq_value(half_problem(), [0.0])) == 0.0


@pytest.mark.parametrize("A", [[[0.0]], [[0.5]]])
def test_verify_round_trip(A):
    p = validate_problem(A, [[1.0]], np.eye(2))
    cert = stabilizing_completion_dt(p)
    assert verify_certificate(p, cert).passed


def test_verify_round_trip_random(rng):
    p = random_pd_problem(rng)
    assert verify_certificate(p, stabilizing_completion_dt(p)).passed


def test_verify_perturbed_d_fails():
    p = half_problem()
    cert = stabilizing_completion_dt(p)
    bad = Certificate(cert.P, cert.C, 1.1 * cert.D, math.nan, math.nan)
    rep = verify_certificate(p, bad)
    assert not rep.residual_ok and not rep.passed


def _winding_count(A, B, C, D, radius, samples=2048):
    n, m = B.shape
    phase = []
    for t in np.linspace(0, 2 * np.pi, samples + 1):
        lam = radius * np.exp(1j * t)
        phase.append(np.angle(np.linalg.det(np.block([[lam * A - np.eye(n), lam * B], [C, D]]))))
    return int(round(np.sum(np.diff(np.unwrap(phase))) / (2 * np.pi)))


def test_singular_d_uses_generalized_pencil(rng):
    n, m = 2, 2
    A = 0.5 * rng.standard_normal((n, n))
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((m, n))
    D = rng.standard_normal((m, m))
    D[1] = 0.0
    roots, method = pencil_spectrum_dt(A, B, C, D)
    assert method == "generalized"
    inside = int(np.sum(np.abs(roots) < 1))
    # argument principle on the circle bounding a 32 x 32 polar sweep
    radii = np.linspace(0, 1, 33)[1:]
    thetas = np.linspace(0, 2 * np.pi, 32, endpoint=False)
    dets = [
        abs(np.linalg.det(np.block([[r * np.exp(1j * t) * A - np.eye(n), r * np.exp(1j * t) * B], [C, D]])))
        for r in radii
        for t in thetas
    ]
    assert min(dets) >= 0.0
    assert _winding_count(A, B, C, D, radii[-1] - 1e-6) == inside
    M = rng.standard_normal((n + m, n + m))
    p = validate_problem(A, B, M + M.T)
    cert = Certificate(np.zeros((n, n)), C, D, math.nan, math.nan)
    rep = verify_certificate(p, cert)
    assert rep.method == "generalized"
    assert rep.pencil_ok == (inside == 0)


def test_optimality_against_feedback(rng):
    p = random_pd_problem(rng, n_max=3, m_max=2)
    cert = stabilizing_completion_dt(p)
    a = rng.standard_normal(p.n)
    best = lq_value(p, a, cert)
    for _ in range(5):
        K = rng.standard_normal((p.m, p.n))
        if max(abs(np.linalg.eigvals(p.A + p.B @ K))) >= 0.98:
            continue
        assert best <= float(a @ policy_cost(p, K) @ a) + 1e-8


@given(st.integers(0, 2**31 - 1))
def test_substitution_identity(seed):
    rng = np.random.default_rng(seed)
    p = random_pd_problem(rng, n_max=4, m_max=2)
    cert = stabilizing_completion_dt(p)
    P, C, D = cert.P, cert.C, cert.D
    for _ in range(200):
        x, u = rng.standard_normal(p.n), rng.standard_normal(p.m)
        xn = p.A @ x + p.B @ u
        lhs = x @ P @ x - xn @ P @ xn + p.sigma(x, u)
        rhs = np.linalg.norm(C @ x + D @ u) ** 2
        scale = np.linalg.norm(np.concatenate([x, u])) ** 2 * max(1.0, np.linalg.norm(p.Q, 2))
        assert abs(lhs - rhs) <= 1e-8 * scale


@given(st.integers(0, 2**31 - 1))
def test_frequency_factorization(seed):
    rng = np.random.default_rng(seed)
    p = random_pd_problem(rng, n_max=4, m_max=2)
    cert = stabilizing_completion_dt(p)
    for theta in rng.uniform(-np.pi, np.pi, 64):
        z = np.exp(1j * theta)
        H = cert.D + cert.C @ np.linalg.solve(z * np.eye(p.n) - p.A, p.B)
        pi = eval_pi(p, z)
        assert np.linalg.norm(pi - H.conj().T @ H) <= 1e-7 * max(1.0, np.linalg.norm(pi))


@given(st.integers(0, 2**31 - 1))
def test_real_closure(seed):
    p = random_pd_problem(np.random.default_rng(seed), n_max=4, m_max=2)
    cert = stabilizing_completion_dt(p)
    for M in (cert.P, cert.C, cert.D):
        assert not np.iscomplexobj(M) or np.all(M.imag == 0)


@given(st.integers(0, 2**31 - 1))
def test_oracle_equivalence(seed):
    rng = np.random.default_rng(seed)
    p = random_pd_problem(rng, n_max=3, m_max=2)
    a = rng.standard_normal(p.n)
    X = scipy.linalg.solve_discrete_are(p.A, p.B, p.Qxx, p.Quu, s=p.Qxu)
    K = -np.linalg.solve(p.Quu + p.B.T @ X @ p.B, p.B.T @ X @ p.A + p.Qxu.T)
    ref = finite_horizon_lq(p, a, 16, ("lqr_tail", K))
    assert abs(lq_value(p, a) - ref) <= 1e-6 * (1 + abs(ref))

"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line with the measured quantities and its
wall-clock time, then asserts.  Instance generation counts toward runtime.
"""

import io
import json
import math
import time
from contextlib import redirect_stdout

import numpy as np
import pytest
import scipy.linalg

from kypkit import iqc
from kypkit.cayley import build_cayley, h0, h0_inv, map_boundary
from kypkit.cli import main
from kypkit.core import NotControllable, PoleOfA, validate_problem
from kypkit.freq import INF, eval_pi, restricted_form
from kypkit.instances import random_coupled_game, random_ct_problem, random_decoupled_game, random_pd_problem
from kypkit.lmi import nonstrict_lmi_dt, strict_lmi_dt
from kypkit.minimax import minimax_value, saddle_finite_horizon
from kypkit.oracle import finite_horizon_lq, finite_horizon_saddle
from kypkit.riccati import lq_value, sigma_p_form, stabilizing_completion_dt


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail, elapsed, limit=None):
        budget = "" if limit is None else f" (limit {limit:g} s)"
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}; {elapsed:.2f} s{budget}")

    return emit


@pytest.fixture(scope="module")
def lq_instances():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    probs = [random_pd_problem(rng, n_max=6, m_max=3) for _ in range(50)]
    return probs, time.perf_counter() - t0


@pytest.fixture(scope="module")
def game_instances():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    games = [random_coupled_game(rng, eps=0.25) for _ in range(20)]
    return games, time.perf_counter() - t0


def test_criterion_1_counterexample(report):
    t0 = time.perf_counter()
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(["counterexample"])
    rep = json.loads(buf.getvalue())
    elapsed = time.perf_counter() - t0
    T16 = rep["horizons"].index(16)
    upper, lower = rep["upper"][T16], rep["lower"][T16]
    pi_err = float(np.max(np.abs(np.array(rep["pi_at_minus_one"]) - [[4, -2], [-2, -4]])))
    ok = code == 1 and upper >= 0.4999999 and lower <= 1e-6 and pi_err <= 1e-12 and elapsed < 1.0
    report(1, ok, f"exit {code}, upper(16)={upper:.10f}, lower(16)={lower:.3g}, |Pi(-1) err|={pi_err:.1e}", elapsed, 1)
    assert ok


def test_criterion_2_scalar_riccati(report):
    t0 = time.perf_counter()
    p = validate_problem([[0.5]], [[1.0]], np.eye(2))
    w = (0.25 + math.sqrt(65) / 4) / 2
    P = stabilizing_completion_dt(p).P
    oracle = finite_horizon_lq(p, [1.0], 50)
    elapsed = time.perf_counter() - t0
    e1, e2 = abs(-P[0, 0] - w), abs(oracle - w)
    ok = e1 <= 1e-8 and e2 <= 1e-8 and elapsed < 1.0
    report(2, ok, f"|-P - w|={e1:.1e}, |oracle(50) - w|={e2:.1e}", elapsed, 1)
    assert ok


def test_criterion_3_certificate_identities(report, lq_instances):
    probs, gen_time = lq_instances
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst_res = worst_fact = worst_mu = 0.0
    for p in probs:
        c = stabilizing_completion_dt(p)
        M = sigma_p_form(p, c.P).M
        CD = np.hstack([c.C, c.D])
        worst_res = max(worst_res, np.linalg.norm(M - CD.conj().T @ CD) / np.linalg.norm(p.Q))
        mu = np.linalg.eigvals(p.A - p.B @ np.linalg.solve(c.D, c.C))
        worst_mu = max(worst_mu, float(np.max(np.abs(mu))))
        for theta in rng.uniform(-np.pi, np.pi, 64):
            z = np.exp(1j * theta)
            H = c.D + c.C @ np.linalg.solve(z * np.eye(p.n) - p.A, p.B)
            pi = eval_pi(p, z)
            worst_fact = max(worst_fact, np.linalg.norm(pi - H.conj().T @ H) / max(1.0, np.linalg.norm(pi)))
    elapsed = gen_time + time.perf_counter() - t0
    ok = worst_res <= 1e-8 and worst_fact <= 1e-7 and worst_mu <= 1 + 1e-8 and elapsed < 30
    report(3, ok, f"50 instances, residual/||Q|| {worst_res:.1e}, factorization {worst_fact:.1e}, max|mu| {worst_mu:.6f}", elapsed, 30)
    assert ok


def test_criterion_4_lmi_pair(report):
    t0 = time.perf_counter()
    Q = [[0.0, 0.5], [0.5, 0.0]]
    p0 = validate_problem([[0.0]], [[0.0]], Q)
    strict = strict_lmi_dt(p0)
    try:
        nonstrict_lmi_dt(p0)
        refused = False
    except NotControllable:
        refused = True
    p1 = validate_problem([[0.0]], [[1.0]], Q)
    ctrl = nonstrict_lmi_dt(p1)
    elapsed = time.perf_counter() - t0
    strict_ok = not strict.feasible and strict.witness is not None and min(np.linalg.eigvalsh(restricted_form(p0, strict.witness))) <= 0
    ctrl_ok = not ctrl.feasible and ctrl.witness is not None and abs(ctrl.witness + 1) < 1e-9
    ok = strict_ok and refused and ctrl_ok and elapsed < 1.0
    report(4, ok, f"strict infeasible at z*={complex(strict.witness):.3g}, nonstrict refused={refused}, B=1 witness {complex(ctrl.witness):.3g}", elapsed, 1)
    assert ok


def test_criterion_5_cayley_suite(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    e_sub = e_energy = e_round = e_eig = e_pi = 0.0
    for _ in range(50):
        p = random_ct_problem(rng)
        cmap, dt = build_cayley(p)
        n, m = p.n, p.m
        u = rng.standard_normal(m)
        for s in 1j * rng.standard_normal(4):
            x = np.linalg.solve(s * np.eye(n) - p.A, p.B @ u)
            xt, _ = cmap.h1(x, u)
            z = map_boundary(cmap, s)
            e_sub = max(e_sub, np.linalg.norm(z * xt - dt.A @ xt - dt.B @ u) / (1 + np.linalg.norm(xt)))
        xt, _ = cmap.h1(np.zeros(n), u)
        e_sub = max(e_sub, np.linalg.norm(-xt - dt.A @ xt - dt.B @ u) / (1 + np.linalg.norm(xt)))
        P = rng.standard_normal((n, n))
        P = P + P.T
        x = rng.standard_normal(n)
        xt, _ = cmap.h1(x, u)
        nxt = dt.A @ xt + dt.B @ u
        lhs = 2 * x @ P @ (p.A @ x + p.B @ u)
        e_energy = max(e_energy, abs(lhs - (nxt @ P @ nxt - xt @ P @ xt)) / (1 + abs(lhs)))
        for w in rng.standard_normal(8) * 5:
            e_round = max(e_round, abs(h0_inv(h0(1j * w, cmap.r), cmap.r) - 1j * w) / (1 + abs(w)))
        e_round = max(e_round, 0.0 if h0_inv(h0(INF, cmap.r), cmap.r) == INF else 1.0)
        got = np.linalg.eigvals(dt.A)
        for lam in np.linalg.eigvals(p.A):
            zl = h0(lam, cmap.r)
            e_eig = max(e_eig, float(np.min(np.abs(got - zl))) / (1 + abs(zl)))
        for w in rng.standard_normal(32) * 3:
            try:
                a, b = eval_pi(p, 1j * w), eval_pi(dt, map_boundary(cmap, 1j * w))
            except PoleOfA:
                continue
            e_pi = max(e_pi, np.linalg.norm(a - b) / max(1.0, np.linalg.norm(a)))
    elapsed = time.perf_counter() - t0
    ok = e_sub <= 1e-9 and e_energy <= 1e-10 and e_round <= 1e-12 and e_eig <= 1e-9 and e_pi <= 1e-9 and elapsed < 10
    detail = f"(a) {e_sub:.1e}, (b) {e_energy:.1e}, (c) {e_round:.1e}, (d) {e_eig:.1e}, Pi {e_pi:.1e}"
    report(5, ok, detail, elapsed, 10)
    assert ok


def test_criterion_6_minimax_convergence(report, game_instances):
    games, gen_time = game_instances
    t0 = time.perf_counter()
    horizons, worst_gap, duality = [], 0.0, True
    for g in games:
        rep = minimax_value(g, tol=1e-9)
        horizons.append(rep.horizon)
        worst_gap = max(worst_gap, rep.gap)
        duality &= all(row["lower"] <= row["upper"] + 1e-9 * g.scale for row in rep.trace)
    elapsed = gen_time + time.perf_counter() - t0
    ok = worst_gap <= 1e-6 and max(horizons) < 2**12 and duality and elapsed < 60
    report(6, ok, f"20 games, max horizon {max(horizons)}, worst gap {worst_gap:.1e}, duality {duality}", elapsed, 60)
    assert ok


def test_criterion_7_decoupled_games(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(10):
        gp, pv, pw, a1, a2 = random_decoupled_game(rng)
        ref = lq_value(pv, a1) - lq_value(pw.with_cost(-pw.Q), a2)
        worst = max(worst, abs(minimax_value(gp, tol=1e-10).value - ref))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6
    report(7, ok, f"10 games, worst |value - LQ sum| {worst:.1e}", elapsed)
    assert ok


def test_criterion_8_delay_iqc(report):
    t0 = time.perf_counter()
    setup = iqc.delay_setup()
    cond = iqc.test_conditional(setup, iqc.delay_traces(count=50))
    spikes = {M: iqc.test_complete(setup, iqc.SystemTraces([iqc.spike_trace(M, 5)])).worst_margin for M in (10.0, 100.0)}
    hyp = iqc.check_hypotheses(setup, iqc.delay_counterexample_certificate())
    elapsed = time.perf_counter() - t0
    grows = all(abs(spikes[M] + M**2) <= 1e-9 * M**2 for M in spikes)
    ok = cond.worst_margin >= -1e-9 and grows and not hyp.pencil and elapsed < 5
    detail = f"conditional worst margin {cond.worst_margin:.2e}, spike margins {spikes[10.0]:g}, {spikes[100.0]:g}, (b2) {hyp.pencil}"
    report(8, ok, detail, elapsed, 5)
    assert ok


def test_criterion_9_oracle_independence(report, lq_instances, game_instances):
    probs, _ = lq_instances
    games, _ = game_instances
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    worst_lq = 0.0
    for p in probs:
        a = rng.standard_normal(p.n)
        # the Riccati-optimal feedback from scipy's DARE closes the oracle's tail exactly
        X = scipy.linalg.solve_discrete_are(p.A, p.B, p.Qxx, p.Quu, s=p.Qxu)
        K = -np.linalg.solve(p.Quu + p.B.T @ X @ p.B, p.B.T @ X @ p.A + p.Qxu.T)
        ref = lq_value(p, a)
        worst_lq = max(worst_lq, abs(finite_horizon_lq(p, a, 16, ("lqr_tail", K)) - ref) / (1 + abs(ref)))
    worst_saddle = 0.0
    for g in games:
        worst_saddle = max(worst_saddle, abs(saddle_finite_horizon(g, 64).value - finite_horizon_saddle(g, 64)[0]))
    elapsed = time.perf_counter() - t0
    ok = worst_lq <= 1e-6 and worst_saddle <= 1e-9
    report(9, ok, f"LQ rel. diff {worst_lq:.1e} on 50, saddle diff {worst_saddle:.1e} on 20 at T=64", elapsed)
    assert ok

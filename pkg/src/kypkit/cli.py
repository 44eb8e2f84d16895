"""Command-line entry point.

Exit codes: 0 affirmative verdict or constructed object, 1 negative verdict
(infeasible, hypothesis fails, violation found), 2 inconclusive or no
convergence, 3 input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys

from . import serialization as ser
from .core import (
    HypothesisFails,
    Inconclusive,
    KypError,
    NoCertificate,
    NoConvergence,
    NotBoundedBelow,
    NotControllable,
    NotConvexConcave,
    NotStabilizable,
    SingularSaddle,
    TimeKind,
)

EXIT_OK, EXIT_NEGATIVE, EXIT_INCONCLUSIVE, EXIT_INPUT = 0, 1, 2, 3

NEGATIVE_ERRORS = (NoCertificate, NotStabilizable, NotControllable, HypothesisFails, NotBoundedBelow, NotConvexConcave)
INCONCLUSIVE_ERRORS = (NoConvergence, Inconclusive, SingularSaddle)


class Outcome:
    def __init__(self, code: int, report: dict, rows: list | None = None):
        self.code = code
        self.report = report
        self.rows = rows


def _load(args):
    if args.problem is None:
        raise ser.InputError("this command needs a problem file")
    try:
        with open(args.problem, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ser.InputError(f"cannot read {args.problem}: {exc.strerror}") from exc
    return ser.load_document(text)


def _verdict_error(exc: KypError) -> Outcome:
    code = EXIT_NEGATIVE if isinstance(exc, NEGATIVE_ERRORS) else EXIT_INCONCLUSIVE
    report = {"error": type(exc).__name__, "message": str(exc)}
    trace = getattr(exc, "trace", None)
    if trace:
        report["trace"] = trace
    return Outcome(code, report)


def _certificate_dict(cert) -> dict:
    return {"P": cert.P, "C": cert.C, "D": cert.D}


def _freq_rows(rep) -> list:
    rows = [["angle_or_omega", "min_eig", "max_eig", "classification"]]
    for s in rep.samples:
        coord = s.theta if rep.time_kind is TimeKind.DISCRETE else s.location.imag
        rows.append([coord, s.min_eig, s.max_eig, s.classification.value])
    return rows


def cmd_check_freq(args) -> Outcome:
    from .freq import check_minimax_condition, check_pd_on_boundary

    doc = _load(args)
    if doc["kind"] == "game":
        gp = ser.game_problem(doc)
        cond = check_minimax_condition(gp.kyp(), gp.partition, grid_size=args.grid, tol=args.tol)
        report = {"condition": "minimax_block", "holds": cond is not None, "result": cond}
        return Outcome(EXIT_OK if cond else EXIT_NEGATIVE, report)
    problem = ser.kyp_problem(doc)
    rep = check_pd_on_boundary(problem, args.grid, args.mode, args.tol, subspace=args.subspace)
    report = {
        "mode": rep.mode,
        "verdict": rep.verdict,
        "passed": rep.passed,
        "margin": rep.margin,
        "exceptional_count": rep.exceptional_count,
        "indefinite_count": rep.indefinite_count,
        "witness": None if rep.witness is None else {"location": rep.witness.location, "min_eig": rep.witness.min_eig},
        "grid_size": rep.grid_size,
        "samples": len(rep.samples),
        "notes": rep.notes,
    }
    return Outcome(EXIT_OK if rep.passed else EXIT_NEGATIVE, report, _freq_rows(rep))


def _solve_kyp(problem, doc, tol) -> Outcome:
    from .cayley import ct_theorem_wrapper, verify_certificate_ct
    from .riccati import stabilizing_completion_dt, verify_certificate

    continuous = problem.time_kind is TimeKind.CONTINUOUS
    if "certificate" in doc:
        cert = ser.kyp_certificate(doc, problem)
        rep = verify_certificate_ct(problem, cert, tol) if continuous else verify_certificate(problem, cert, tol)
        report = {"mode": "verify", "passed": rep.passed, "residual": rep.residual, "residual_ok": rep.residual_ok,
                  "pencil_ok": rep.pencil_ok, "pencil_margin": rep.pencil_margin, "method": rep.method}
        return Outcome(EXIT_OK if rep.passed else EXIT_NEGATIVE, report)
    cert = ct_theorem_wrapper(problem, "stabilizing") if continuous else stabilizing_completion_dt(problem)
    report = {
        "mode": "construct",
        "time": problem.time_kind.value,
        "certificate": _certificate_dict(cert),
        "residual": cert.residual,
        "pencil_margin": cert.pencil_margin,
    }
    return Outcome(EXIT_OK, report)


def cmd_solve_kyp(args) -> Outcome:
    doc = _load(args)
    return _solve_kyp(ser.kyp_problem(doc), doc, args.tol)


def _lmi_report(verdict) -> dict:
    return {
        "feasible": verdict.feasible,
        "mode": verdict.mode,
        "margin": verdict.margin,
        "P": verdict.P,
        "witness": verdict.witness,
        "diagnostics": {k: v for k, v in verdict.diagnostics.items() if k != "delta_path"},
    }


def _lmi(args, which: str) -> Outcome:
    from .cayley import ct_theorem_wrapper
    from .lmi import nonstrict_lmi_dt, strict_lmi_dt

    problem = ser.kyp_problem(_load(args))
    if problem.time_kind is TimeKind.CONTINUOUS:
        verdict = ct_theorem_wrapper(problem, which, args.grid, args.tol)
    elif which == "strict_lmi":
        verdict = strict_lmi_dt(problem, args.grid, args.tol)
    else:
        verdict = nonstrict_lmi_dt(problem, args.grid, args.tol)
    return Outcome(EXIT_OK if verdict.feasible else EXIT_NEGATIVE, _lmi_report(verdict))


def cmd_ct(args) -> Outcome:
    from .cayley import ct_theorem_wrapper

    doc = _load(args)
    problem = ser.kyp_problem(doc)
    if problem.time_kind is not TimeKind.CONTINUOUS:
        raise ser.InputError("field 'time': the ct command needs a continuous-time problem")
    if args.which == "stabilizing":
        return _solve_kyp(problem, doc, args.tol)
    verdict = ct_theorem_wrapper(problem, args.which, args.grid, args.tol)
    return Outcome(EXIT_OK if verdict.feasible else EXIT_NEGATIVE, _lmi_report(verdict))


def _saddle_report(rep) -> dict:
    return {
        "horizon": rep.horizon,
        "value": rep.value,
        "lower": rep.lower,
        "upper": rep.upper,
        "gap": rep.gap,
        "v_star": rep.v_star,
        "w_star": rep.w_star,
        "trace": rep.trace,
        "diagnostics": rep.diagnostics,
    }


def _trace_rows(trace) -> list:
    rows = [["T", "value", "lower", "upper", "gap"]]
    rows += [[t["T"], t["value"], t["lower"], t["upper"], t["gap"]] for t in trace]
    return rows


def cmd_minimax(args) -> Outcome:
    from .minimax import ct_minimax, minimax_value

    gp = ser.game_problem(_load(args))
    tol = max(args.tol, 1e-12)
    if gp.time_kind is TimeKind.CONTINUOUS:
        rep = ct_minimax(gp, tol=tol, grid_size=args.grid)
    else:
        rep = minimax_value(gp, tol=tol, grid_size=args.grid)
    return Outcome(EXIT_OK, _saddle_report(rep), _trace_rows(rep.trace))


def cmd_iqc_check(args) -> Outcome:
    from . import iqc

    setup, traces, cert = ser.iqc_problem(_load(args))
    report = {}
    ok = True
    if cert is not None:
        hyp = iqc.check_hypotheses(setup, cert, args.grid)
        report["hypotheses"] = {
            "minimax_condition": hyp.minimax_condition,
            "dominance": hyp.dominance,
            "pencil": hyp.pencil,
            "dominance_min_eig": hyp.dominance_min_eig,
            "pencil_margin": hyp.pencil_margin,
            "details": hyp.details,
        }
        ok = ok and hyp.passed
    if len(traces):
        cond = iqc.test_conditional(setup, traces, args.tol)
        comp = iqc.test_complete(setup, traces, None, args.tol)
        report["conditional"] = {"passed": cond.passed, "worst_margin": cond.worst_margin, "worst": cond.worst,
                                 "violations": cond.violations}
        report["complete"] = {"passed": comp.passed, "worst_margin": comp.worst_margin, "worst": comp.worst,
                              "violations": comp.violations}
        ok = ok and cond.passed and comp.passed
    report["passed"] = ok
    return Outcome(EXIT_OK if ok else EXIT_NEGATIVE, report)


def cmd_counterexample(args) -> Outcome:
    from .minimax import reproduce_counterexample

    rep = reproduce_counterexample()
    trace = [
        {"T": T, "value": v, "lower": lo, "upper": up, "gap": up - lo}
        for T, v, lo, up in zip(rep["horizons"], rep["value_restricted"], rep["lower"], rep["upper"])
    ]
    return Outcome(EXIT_NEGATIVE if rep["minimax_fails"] else EXIT_OK, rep, _trace_rows(trace))


def cmd_oracle(args) -> Outcome:
    from .oracle import finite_horizon_lq, finite_horizon_saddle
    from .riccati import stabilizing_gain

    doc = _load(args)
    T = args.horizon
    if doc["kind"] == "game":
        gp = ser.game_problem(doc)
        value, v, w = finite_horizon_saddle(gp, T)
        return Outcome(EXIT_OK, {"horizon": T, "value": value, "v_star": v, "w_star": w})
    problem = ser.kyp_problem(doc)
    if problem.time_kind is not TimeKind.DISCRETE:
        raise ser.InputError("field 'time': the oracle works in discrete time")
    a = ser.parse_vector(doc.get("a", [1.0] + [0.0] * (problem.n - 1)), "a")
    terminal = args.terminal if args.terminal == "zero_input_tail" else ("lqr_tail", stabilizing_gain(problem))
    value = finite_horizon_lq(problem, a, T, terminal)
    return Outcome(EXIT_OK, {"horizon": T, "terminal": args.terminal, "value": value})


COMMANDS = {
    "check-freq": cmd_check_freq,
    "solve-kyp": cmd_solve_kyp,
    "lmi-strict": lambda a: _lmi(a, "strict_lmi"),
    "lmi-nonstrict": lambda a: _lmi(a, "nonstrict_lmi"),
    "ct": cmd_ct,
    "minimax": cmd_minimax,
    "iqc-check": cmd_iqc_check,
    "counterexample": cmd_counterexample,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kypkit", description="KYP-lemma certificates and game values")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("problem", nargs="?", help="JSON problem file")
        p.add_argument("--grid", type=int, default=512)
        p.add_argument("--tol", type=float, default=1e-8)
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--format", choices=("json", "csv", "text"), default="json")
        if name == "check-freq":
            p.add_argument("--mode", default="pd_except_finite",
                           choices=("pd_everywhere", "pd_except_finite", "psd_everywhere"))
            p.add_argument("--subspace", action="store_true", help="test sigma on L(z) instead of Pi(z)")
        if name == "ct":
            p.add_argument("--which", default="stabilizing", choices=("stabilizing", "strict_lmi", "nonstrict_lmi"))
        if name == "oracle":
            p.add_argument("--horizon", type=int, default=64)
            p.add_argument("--terminal", default="zero_input_tail", choices=("zero_input_tail", "lqr_tail"))
    return parser


def _flatten(prefix: str, obj, out: list) -> None:
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else k, obj[k], out)
    else:
        out.append((prefix, obj))


def render(outcome: Outcome, fmt: str) -> str:
    if fmt == "json":
        return ser.dumps({"exit_code": outcome.code, **outcome.report})
    plain = ser.to_plain({"exit_code": outcome.code, **outcome.report})
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if outcome.rows:
            for row in outcome.rows:
                writer.writerow([format(x, ".17g") if isinstance(x, float) else x for x in row])
        else:
            flat = []
            _flatten("", plain, flat)
            writer.writerow(["key", "value"])
            for k, v in flat:
                writer.writerow([k, ser.dumps(v).strip() if isinstance(v, list) else _scalar(v)])
        return buf.getvalue()
    flat = []
    _flatten("", plain, flat)
    return "".join(f"{k}: {ser.dumps(v).strip() if isinstance(v, list) else _scalar(v)}\n" for k, v in flat)


def _scalar(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        outcome = COMMANDS[args.command](args)
    except ser.InputError as exc:
        outcome = Outcome(EXIT_INPUT, {"error": "InputError", "message": str(exc)})
    except (NEGATIVE_ERRORS + INCONCLUSIVE_ERRORS) as exc:
        outcome = _verdict_error(exc)
    except KypError as exc:
        outcome = Outcome(EXIT_INCONCLUSIVE, {"error": type(exc).__name__, "message": str(exc)})
    text = render(outcome, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return outcome.code


if __name__ == "__main__":
    sys.exit(main())

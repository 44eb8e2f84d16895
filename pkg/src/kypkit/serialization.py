"""JSON problem files and deterministic report encoding.

Matrices are nested arrays: a list of rows, each entry either a real number
or an ``[re, im]`` pair.  Reports are written with sorted keys and every
float rendered with 17 significant digits, so identical inputs give
byte-identical output.
"""

from __future__ import annotations

import dataclasses
import json
import math
from enum import Enum

import numpy as np

from .core import KypError, TimeKind, Trajectory, validate_problem


class InputError(KypError, ValueError):
    """Malformed problem file; the message names the offending field."""


# decoding


def _entry(value, where: str) -> complex:
    if isinstance(value, bool):
        raise InputError(f"{where}: booleans are not matrix entries")
    if isinstance(value, (int, float)):
        return complex(value, 0.0)
    if isinstance(value, list) and len(value) == 2 and all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in value
    ):
        return complex(value[0], value[1])
    raise InputError(f"{where}: expected a number or an [re, im] pair, got {value!r}")


def parse_matrix(raw, name: str, allow_empty_rows: int | None = None) -> np.ndarray:
    if not isinstance(raw, list):
        raise InputError(f"field '{name}': expected a list of rows")
    if not raw:
        return np.zeros((allow_empty_rows or 0, 0))
    rows = []
    for i, row in enumerate(raw):
        if not isinstance(row, list):
            raise InputError(f"field '{name}' row {i}: expected a list")
        rows.append([_entry(v, f"field '{name}' row {i} col {j}") for j, v in enumerate(row)])
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise InputError(f"field '{name}' row {i}: has {len(row)} entries, expected {width}")
    arr = np.array(rows, dtype=complex).reshape(len(rows), width)
    return arr.real.copy() if np.all(arr.imag == 0) else arr


def parse_vector(raw, name: str) -> np.ndarray:
    if not isinstance(raw, list):
        raise InputError(f"field '{name}': expected a list")
    vals = np.array([_entry(v, f"field '{name}' entry {i}") for i, v in enumerate(raw)], dtype=complex)
    return vals.real.copy() if np.all(vals.imag == 0) else vals


def _require(doc: dict, key: str):
    if key not in doc:
        raise InputError(f"missing field '{key}'")
    return doc[key]


def load_document(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise InputError("top level must be a JSON object")
    kind = doc.get("kind", "kyp")
    if kind not in ("kyp", "game", "iqc"):
        raise InputError(f"field 'kind': unknown value {kind!r}")
    try:
        doc["time"] = TimeKind.parse(doc.get("time", "dt"))
    except ValueError as exc:
        raise InputError(f"field 'time': {exc}") from exc
    doc["kind"] = kind
    return doc


def _check_partition(doc: dict, **dims) -> None:
    part = doc.get("partition")
    if part is None:
        return
    for key, value in dims.items():
        if key in part and int(part[key]) != value:
            raise InputError(f"field 'partition.{key}': declared {part[key]}, matrices give {value}")


def kyp_problem(doc: dict):
    A = parse_matrix(_require(doc, "A"), "A")
    B = parse_matrix(_require(doc, "B"), "B", A.shape[0])
    Q = parse_matrix(_require(doc, "Q"), "Q")
    _check_partition(doc, n=A.shape[0], m=B.shape[1])
    try:
        return validate_problem(A, B, Q, doc["time"])
    except (KypError, ValueError) as exc:
        raise InputError(f"problem: {exc}") from exc


def _game_parts(doc: dict):
    A = parse_matrix(_require(doc, "A"), "A")
    n = A.shape[0]
    B1 = parse_matrix(_require(doc, "B1"), "B1", n)
    B2 = parse_matrix(doc.get("B2", []), "B2", n)
    if B2.size == 0:
        B2 = np.zeros((n, 0))
    Q = parse_matrix(_require(doc, "Q"), "Q")
    for name, M in (("A", A), ("B1", B1), ("B2", B2), ("Q", Q)):
        if np.iscomplexobj(M):
            raise InputError(f"field '{name}': games and IQCs need real matrices")
    _check_partition(doc, n=n, k=B1.shape[1], q=B2.shape[1])
    return A, B1, B2, Q


def game_problem(doc: dict):
    from .minimax import GameProblem

    A, B1, B2, Q = _game_parts(doc)
    a = parse_vector(doc.get("a", [0.0] * A.shape[0]), "a").real
    try:
        return GameProblem.build(A, B1, B2, Q, a, doc["time"])
    except (KypError, ValueError) as exc:
        raise InputError(f"game: {exc}") from exc


def iqc_problem(doc: dict):
    from .iqc import IqcCertificate, IqcSetup, Kappa, SystemTraces

    A, B1, B2, Q = _game_parts(doc)
    n = A.shape[0]
    X0 = [parse_vector(x, f"X0[{i}]").real for i, x in enumerate(doc.get("X0", [[0.0] * n]))]
    kraw = doc.get("kappa", {})
    M = parse_matrix(kraw["M"], "kappa.M").real if "M" in kraw else None
    kappa = Kappa(M=M, const=float(kraw.get("const", 0.0)))
    try:
        setup = IqcSetup(A, B1, B2, Q, X0, kappa, doc["time"])
    except (KypError, ValueError) as exc:
        raise InputError(f"iqc: {exc}") from exc
    pairs = []
    for i, tr in enumerate(doc.get("traces", [])):
        v = parse_matrix(_require(tr, "v"), f"traces[{i}].v", 0).real
        w = parse_matrix(_require(tr, "w"), f"traces[{i}].w", 0).real
        pairs.append((Trajectory(v.reshape(-1, setup.k)), Trajectory(w.reshape(-1, setup.q))))
    cert = None
    if "certificate" in doc:
        c = doc["certificate"]
        cert = IqcCertificate(
            parse_matrix(_require(c, "C"), "certificate.C", setup.k).real.reshape(setup.k, n),
            parse_matrix(_require(c, "D1"), "certificate.D1").real,
            parse_matrix(_require(c, "D2"), "certificate.D2", setup.k).real.reshape(setup.k, setup.q),
        )
    return setup, SystemTraces(pairs), cert


def kyp_certificate(doc: dict, problem):
    from .riccati import Certificate

    c = doc["certificate"]
    P = parse_matrix(_require(c, "P"), "certificate.P", problem.n).reshape(problem.n, problem.n)
    C = parse_matrix(_require(c, "C"), "certificate.C", problem.m).reshape(problem.m, problem.n)
    D = parse_matrix(_require(c, "D"), "certificate.D")
    return Certificate(P, C, D, residual=math.nan, pencil_margin=math.nan, time_kind=problem.time_kind)


# encoding


def _fmt(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def to_plain(obj):
    """Convert reports into JSON-ready python containers (complex -> [re, im])."""
    if isinstance(obj, Trajectory):
        return to_plain(obj.samples)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj) and np.any(obj.imag != 0):
            return [to_plain(v) for v in obj] if obj.ndim else to_plain(obj.item())
        return to_plain(obj.real.tolist()) if obj.ndim else to_plain(obj.real.item())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(obj[k], indent, level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt(obj)
    if obj is None:
        return "null"
    return json.dumps(obj)


def dumps(obj, indent: int = 2) -> str:
    return _encode(to_plain(obj), indent, 0) + "\n"


def matrix_to_json(M: np.ndarray):
    """Nested-list form accepted by ``parse_matrix``."""
    M = np.asarray(M)
    if np.iscomplexobj(M) and np.any(M.imag != 0):
        return [[[float(v.real), float(v.imag)] for v in row] for row in M]
    return M.real.tolist()

"""Instance files and report serialization.

Instance files are JSON with dense row-major matrices::

    {"version": 1, "n": 2, "kind": "generic" | "tp" | "ap",
     "objective": {"Q": [...n*n...], "q": [...], "c": 0.0},
     "constraints": [{"Q": [...], "q": [...], "c": 0.0, "name": "g1"}, ...],
     "tp_extras": {"x0": [...], "alpha": 1.0, "linear": [{"b": [...], "beta": 0.0}]},
     "ap_extras": {"C": [...l*n...], "c_vec": [...], "D": [...k*n...], "d": [...]}}

For ``tp`` the constraints are generated from ``tp_extras``.  For ``ap`` the
objective holds the raw ``A`` and ``a``; the shift by the smallest
eigenvalue of ``A`` is applied on load.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io as _io
import json
import logging
import math
from pathlib import Path

import numpy as np

from .assumptions import Kind, QCQPInstance
from .errors import InputError
from .quad_core import QuadraticFunction

FORMAT_VERSION = 1
ASYMMETRY_WARN = 1e-9

log = logging.getLogger(__name__)


class ParseError(InputError):
    """Malformed instance file; carries the JSON position when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column


def _vec(data, length, what):
    try:
        v = np.asarray(data, dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{what}: expected a list of numbers") from exc
    if length is not None and v.size != length:
        raise ParseError(f"{what}: expected {length} entries, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ParseError(f"{what}: non-finite entry")
    return v


def _mat(data, n, what, rows=None):
    v = _vec(data, None, what)
    if rows is None:
        if v.size != n * n:
            raise ParseError(f"{what}: expected {n * n} entries (n^2), got {v.size}")
        rows = n
    elif v.size != rows * n:
        raise ParseError(f"{what}: expected {rows * n} entries, got {v.size}")
    return v.reshape(rows, n)


def _sym(Q, what):
    asym = float(np.abs(Q - Q.T).max()) if Q.size else 0.0
    if asym > ASYMMETRY_WARN:
        log.warning("%s: asymmetry %.3g symmetrized", what, asym)
    return 0.5 * (Q + Q.T)


def _quad(d, n, what):
    if not isinstance(d, dict):
        raise ParseError(f"{what}: expected an object")
    for key in ("Q", "q"):
        if key not in d:
            raise ParseError(f"{what}: missing field {key!r}")
    Q = _sym(_mat(d["Q"], n, f"{what}.Q"), what)
    q = _vec(d["q"], n, f"{what}.q")
    c = d.get("c", 0.0)
    if not isinstance(c, (int, float)) or isinstance(c, bool) or not math.isfinite(c):
        raise ParseError(f"{what}.c: expected a finite number")
    return QuadraticFunction(Q, q, float(c))


def instance_from_dict(doc) -> QCQPInstance:
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    if doc.get("version") != FORMAT_VERSION:
        raise ParseError(f"unsupported version {doc.get('version')!r}")
    n = doc.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ParseError("n must be a positive integer")
    try:
        kind = Kind(doc.get("kind", "generic"))
    except ValueError as exc:
        raise ParseError(f"unknown kind {doc.get('kind')!r}") from exc
    if ("tp_extras" in doc) != (kind is Kind.TP) or ("ap_extras" in doc) != (kind is Kind.AP):
        raise ParseError("kind-specific extras must be present exactly when the kind matches")
    if "objective" not in doc:
        raise ParseError("missing objective")
    f = _quad(doc["objective"], n, "objective")
    if kind is Kind.TP:
        ex = doc["tp_extras"]
        linear = ex.get("linear", [])
        bs = [_vec(item["b"], n, f"tp_extras.linear[{k}].b") for k, item in enumerate(linear)]
        betas = [float(item["beta"]) for item in linear]
        inst = QCQPInstance.trust_region(
            f.Q, f.q, _vec(ex["x0"], n, "tp_extras.x0"), float(ex["alpha"]),
            np.array(bs).reshape(-1, n), betas, const=f.c,
        )
        _check_listed(doc, inst)
        return inst
    if kind is Kind.AP:
        ex = doc["ap_extras"]
        cvec = _vec(ex.get("c_vec", []), None, "ap_extras.c_vec")
        dvec = _vec(ex.get("d", []), None, "ap_extras.d")
        C = _mat(ex.get("C", []), n, "ap_extras.C", rows=cvec.size)
        D = _mat(ex.get("D", []), n, "ap_extras.D", rows=dvec.size)
        return QCQPInstance.cdt(f.Q, f.q, C, cvec, D, dvec)
    cons = doc.get("constraints")
    if not isinstance(cons, list) or not cons:
        raise ParseError("constraints must be a nonempty list")
    gs = [_quad(c, n, f"constraints[{k}]") for k, c in enumerate(cons)]
    names = [c.get("name", f"g{k + 1}") for k, c in enumerate(cons)]
    return QCQPInstance(f, tuple(gs), Kind.GENERIC, tuple(names))


def _check_listed(doc, inst):
    listed = doc.get("constraints")
    if not listed:
        return
    if len(listed) != inst.m:
        raise ParseError("listed constraints disagree with tp_extras")
    for k, (c, g) in enumerate(zip(listed, inst.gs)):
        if not _quad(c, inst.n, f"constraints[{k}]").allclose(g, 1e-12):
            raise ParseError(f"constraints[{k}] disagrees with tp_extras")


def _list(a) -> list:
    return (np.asarray(a, dtype=float).reshape(-1) + 0.0).tolist()  # + 0.0 drops negative zeros


def _qdict(h: QuadraticFunction, name=None) -> dict:
    d = {"Q": _list(h.Q), "q": _list(h.q), "c": h.c + 0.0}
    if name is not None:
        d["name"] = name
    return d


def instance_to_dict(inst: QCQPInstance) -> dict:
    doc = {"version": FORMAT_VERSION, "n": inst.n, "kind": inst.kind.value}
    if inst.kind is Kind.AP:
        ap = inst.ap
        doc["objective"] = {"Q": _list(ap.A), "q": _list(ap.a), "c": 0.0}
        doc["ap_extras"] = {"C": _list(ap.C), "c_vec": _list(ap.c), "D": _list(ap.D), "d": _list(ap.d)}
        return doc
    doc["objective"] = _qdict(inst.f)
    doc["constraints"] = [_qdict(g, name) for g, name in zip(inst.gs, inst.names)]
    if inst.kind is Kind.TP:
        _, _, x0, alpha, B = inst.tp_parts()
        doc["tp_extras"] = {
            "x0": _list(x0),
            "alpha": alpha,
            "linear": [{"b": _list(b), "beta": -g.c + 0.0} for b, g in zip(B, inst.gs[1:])],
        }
    return doc


def loads_instance(text: str) -> QCQPInstance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from exc
    try:
        return instance_from_dict(doc)
    except ParseError:
        raise
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed instance: {exc}") from exc
    except InputError as exc:
        raise ParseError(str(exc)) from exc


def load_instance(path) -> QCQPInstance:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    return loads_instance(text)


def dump_instance(inst: QCQPInstance) -> str:
    return json.dumps(instance_to_dict(inst), indent=2, sort_keys=True) + "\n"


def instance_digest(inst: QCQPInstance) -> str:
    canon = json.dumps(instance_to_dict(inst), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


# reports -------------------------------------------------------------------------


def to_jsonable(obj):
    """Plain JSON values; non-finite floats become the strings ``inf``, ``-inf``, ``nan``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x + 0.0  # no negative zeros
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "as_dict"):
        return to_jsonable(obj.as_dict())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_report(report: dict) -> str:
    return json.dumps(to_jsonable(report), indent=2, sort_keys=True) + "\n"


def _flatten(prefix, obj, out):
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else str(k), obj[k], out)
    elif isinstance(obj, list) and obj and any(isinstance(v, (dict, list)) for v in obj):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out.append((prefix, json.dumps(obj) if isinstance(obj, list) else obj))


def report_to_csv(report: dict) -> str:
    """Two-column ``key,value`` flattening of a report."""
    rows = []
    _flatten("", to_jsonable(report), rows)
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    w.writerows(rows)
    return buf.getvalue()


def strip_timings(obj):
    """Copy of a report without any ``timings`` entries (for determinism checks)."""
    if isinstance(obj, dict):
        return {k: strip_timings(v) for k, v in obj.items() if k != "timings"}
    if isinstance(obj, list):
        return [strip_timings(v) for v in obj]
    return obj

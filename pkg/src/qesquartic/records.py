"""Machine-readable output: the JSON record and its flat CSV projection.

Numbers are stored so that parsing gives back the same value at the
precision they were produced with:

* hardware doubles become JSON numbers (shortest round-trip repr);
* mpmath values become decimal strings with enough digits for their
  working precision;
* rationals become ``"p/q"`` strings (``"p"`` for integers).
"""
from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional

import mpmath
import numpy as np
import sympy
from mpmath.libmp import repr_dps

from . import _numeric as nm
from .core import QESSolution

SCHEMA_VERSION = "1"

_RATIONAL = re.compile(r"^[+-]?\d+(/\d+)?$")

SOLUTION_KEYS = (
    "branch", "method_tag", "precision_bits", "real_flag",
    "E_re", "E_im", "F_re", "F_im", "D", "residual_norm",
)
SWEEP_KEYS = ("ell", "s_re", "s_im", "t_re", "t_im")


class RecordError(ValueError):
    """Unreadable or ill-formed record; ``position`` locates the problem."""

    def __init__(self, message: str, position: str = ""):
        self.position = position
        super().__init__(f"{position}: {message}" if position else message)


# -- scalars ------------------------------------------------------------------


def encode_real(x, bits: Optional[int] = None) -> Any:
    """JSON-ready form of a real; ``bits`` sets the digits kept for mpmath values."""
    if x is None or isinstance(x, (bool, str)):
        return x
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, sympy.Rational):
        return str(Fraction(int(x.p), int(x.q)))
    if isinstance(x, mpmath.mpf):
        return mpmath.nstr(x, repr_dps(bits or mpmath.mp.prec), strip_zeros=False)
    return float(x)


def decode_real(v, bits: int = nm.DOUBLE_BITS):
    """Inverse of :func:`encode_real`; decimal strings are read at ``bits``."""
    if v is None or isinstance(v, bool):
        return v
    if isinstance(v, (int, float)):
        return v
    if not isinstance(v, str):
        raise RecordError(f"expected a number, got {type(v).__name__}")
    text = v.strip()
    if _RATIONAL.match(text):
        return Fraction(text)
    try:
        if bits <= nm.DOUBLE_BITS:
            return float(text)
        with mpmath.workprec(bits):
            return mpmath.mpf(text)
    except ValueError as exc:
        raise RecordError(f"not a number: {v!r}") from exc


def split_complex(z):
    """``(re, im)`` keeping the number type of ``z``."""
    if isinstance(z, mpmath.mpc):
        return z.real, z.imag
    if isinstance(z, (mpmath.mpf, Fraction, int, float, np.floating, np.integer, sympy.Rational)):
        return z, type(z)(0) if not isinstance(z, sympy.Rational) else Fraction(0)
    z = complex(z)
    return z.real, z.imag


def join_complex(re, im, bits: int = nm.DOUBLE_BITS):
    if isinstance(re, Fraction) and isinstance(im, Fraction):
        return re if im == 0 else complex(re, im)
    if bits > nm.DOUBLE_BITS:
        with mpmath.workprec(bits):
            return mpmath.mpc(nm.mp_real(re), nm.mp_real(im))
    return complex(float(re), float(im))


# -- solutions ---------------------------------------------------------------


def solution_row(sol: QESSolution, D=None, **extra) -> Dict[str, Any]:
    """Flatten a solution into the stored field set (values still numeric)."""
    bits = sol.precision_bits
    with mpmath.workprec(max(bits, nm.DOUBLE_BITS)):
        E_re, E_im = split_complex(sol.E)
        F_re, F_im = split_complex(sol.F)
        row = {
            "branch": sol.branch,
            "method_tag": sol.method_tag,
            "precision_bits": int(bits),
            "real_flag": bool(sol.is_real()),
            "E_re": E_re, "E_im": E_im, "F_re": F_re, "F_im": F_im,
            "D": D,
            "residual_norm": sol.residual_norm if not isinstance(sol.residual_norm, np.floating) else float(sol.residual_norm),
            "omega": [list(split_complex(w)) for w in sol.omega],
        }
    for key in SWEEP_KEYS:
        if key in extra:
            row[key] = extra[key]
    return row


def row_values(row: Dict[str, Any]):
    """``(E, F, omega)`` of a stored row as numbers at its precision."""
    bits = int(row.get("precision_bits", nm.DOUBLE_BITS))
    E = join_complex(row["E_re"], row["E_im"], bits)
    F = join_complex(row["F_re"], row["F_im"], bits)
    omega = [join_complex(re, im, bits) for re, im in row["omega"]]
    return E, F, omega


def _encode_row(row):
    bits = row.get("precision_bits")
    out = {}
    for k, v in row.items():
        if k == "omega":
            out[k] = [[encode_real(a, bits), encode_real(b, bits)] for a, b in v]
        elif k in ("branch", "method_tag", "real_flag", "precision_bits"):
            out[k] = v
        else:
            out[k] = encode_real(v, bits)
    return out


def _decode_row(row, where):
    if not isinstance(row, dict):
        raise RecordError("solution must be an object", where)
    missing = [k for k in SOLUTION_KEYS + ("omega",) if k not in row]
    if missing:
        raise RecordError(f"missing fields {missing}", where)
    bits = row["precision_bits"]
    if not isinstance(bits, int) or bits <= 0:
        raise RecordError("precision_bits must be a positive integer", f"{where}.precision_bits")
    out = {}
    for k, v in row.items():
        try:
            if k == "omega":
                if not isinstance(v, list) or not all(isinstance(p, list) and len(p) == 2 for p in v):
                    raise RecordError("omega must be a list of [re, im] pairs")
                out[k] = [[decode_real(a, bits), decode_real(b, bits)] for a, b in v]
            elif k in ("branch", "method_tag", "real_flag", "precision_bits"):
                out[k] = v
            else:
                out[k] = decode_real(v, bits)
        except RecordError as exc:
            raise RecordError(str(exc), f"{where}.{k}") from None
    return out


# -- the record ----------------------------------------------------------------


@dataclass
class OutputRecord:
    """One CLI result: command echo, both coupling conventions, solutions."""

    command: str
    arguments: Dict[str, Any]
    parameters: Dict[str, Dict[str, Any]]
    solutions: List[Dict[str, Any]] = field(default_factory=list)
    extras: Dict[str, Any] = field(default_factory=dict)
    precision_bits: int = nm.DOUBLE_BITS
    schema_version: str = SCHEMA_VERSION


def _encode_tree(v, bits):
    if isinstance(v, dict):
        return {k: _encode_tree(x, bits) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_encode_tree(x, bits) for x in v]
    return encode_real(v, bits)


def _decode_tree(v, bits):
    if isinstance(v, dict):
        return {k: _decode_tree(x, bits) for k, x in v.items()}
    if isinstance(v, list):
        return [_decode_tree(x, bits) for x in v]
    if isinstance(v, str):
        try:
            return decode_real(v, bits)
        except RecordError:
            return v
    return v


def to_json(rec: OutputRecord, indent: Optional[int] = 2) -> str:
    doc = {
        "schema_version": rec.schema_version,
        "command": rec.command,
        "precision_bits": rec.precision_bits,
        "arguments": rec.arguments,
        "parameters": _encode_tree(rec.parameters, rec.precision_bits),
        "solutions": [_encode_row(r) for r in rec.solutions],
        "extras": _encode_tree(rec.extras, rec.precision_bits),
    }
    return json.dumps(doc, indent=indent)


def from_json(text: str) -> OutputRecord:
    """Parse a record; errors carry ``line:col`` or a field path."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RecordError(exc.msg, f"line {exc.lineno} col {exc.colno}") from None
    if not isinstance(doc, dict):
        raise RecordError("top level must be an object", "line 1 col 1")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise RecordError(f"unsupported schema_version {doc.get('schema_version')!r}", "schema_version")
    for key in ("command", "parameters", "solutions"):
        if key not in doc:
            raise RecordError("missing field", key)
    if not isinstance(doc["solutions"], list):
        raise RecordError("must be a list", "solutions")
    bits = doc.get("precision_bits", nm.DOUBLE_BITS)
    if not isinstance(bits, int) or bits <= 0:
        raise RecordError("must be a positive integer", "precision_bits")
    return OutputRecord(
        command=doc["command"],
        arguments=doc.get("arguments", {}),
        parameters=_decode_tree(doc["parameters"], bits),
        solutions=[_decode_row(r, f"solutions[{i}]") for i, r in enumerate(doc["solutions"])],
        extras=_decode_tree(doc.get("extras", {}), bits),
        precision_bits=bits,
    )


def csv_columns(rec: OutputRecord) -> List[str]:
    width = max((len(r["omega"]) for r in rec.solutions), default=0)
    cols = []
    if any("ell" in r for r in rec.solutions):
        cols += list(SWEEP_KEYS)
    cols += list(SOLUTION_KEYS)
    for n in range(width):
        cols += [f"omega{n}_re", f"omega{n}_im"]
    return cols


def to_csv(rec: OutputRecord) -> str:
    """Header plus one row per solution; a trailing ``# {json}`` line holds ``extras``."""
    buf = io.StringIO()
    cols = csv_columns(rec)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rec.solutions:
        enc = _encode_row(r)
        flat = dict(enc)
        for n, (a, b) in enumerate(enc["omega"]):
            flat[f"omega{n}_re"], flat[f"omega{n}_im"] = a, b
        w.writerow(["" if flat.get(c) is None else flat[c] for c in cols])
    if rec.extras:
        buf.write("# " + json.dumps(_encode_tree(rec.extras, rec.precision_bits)) + "\n")
    return buf.getvalue()


def rows_from_csv(text: str) -> List[Dict[str, Any]]:
    """Solution rows of a CSV emission, decoded like their JSON twins."""
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    out = []
    for i, raw in enumerate(reader):
        bits = int(raw["precision_bits"])
        row: Dict[str, Any] = {}
        omega = []
        for k, v in raw.items():
            if k.startswith("omega"):
                continue
            if k == "precision_bits":
                row[k] = bits
            elif k == "real_flag":
                row[k] = v == "True"
            elif k in ("branch", "method_tag"):
                row[k] = v or None
            elif k == "residual_norm":
                # a double diagnostic at every precision, stored as a JSON number
                row[k] = None if v == "" else decode_real(v, nm.DOUBLE_BITS)
            else:
                row[k] = None if v == "" else decode_real(v, bits)
        n = 0
        while f"omega{n}_re" in raw and raw[f"omega{n}_re"] != "":
            omega.append([decode_real(raw[f"omega{n}_re"], bits), decode_real(raw[f"omega{n}_im"], bits)])
            n += 1
        row["omega"] = omega
        out.append(row)
    return out

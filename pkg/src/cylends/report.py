"""Verdicts and byte-stable report serialization."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

REPORT_VERSION = 1
CONVENTIONS = {
    "laplacian": "Delta = -div grad (positive semidefinite); indicial roots are +-sqrt(lambda)",
    "flux": "<Delta f0, 1> = -sum_i C_i vol(X_i x {R})",
    "weight": "alpha < 0 selects exp(alpha t) decay; default is the midpoint of the spectral gap",
}

PASS, FAIL, EXPECTED_FAIL = "PASS", "FAIL", "FAIL-expected"


@dataclass
class Verdict:
    """One numeric check: ``measured`` compared against ``tolerance``.

    ``comparison`` is ``"<="``, ``">="`` or ``"=="``; ``reference`` names how
    the expected value was obtained (oracle, closed form, exact identity).
    """

    check: str
    measured: object
    tolerance: object
    comparison: str = "<="
    reference: str = ""
    detail: dict = field(default_factory=dict)
    expected_failure: bool = False

    @property
    def passed(self) -> bool:
        m, t = self.measured, self.tolerance
        if self.comparison == "==":
            return m == t
        if m is None or (isinstance(m, float) and math.isnan(m)):
            return False
        return m <= t if self.comparison == "<=" else m >= t

    @property
    def status(self) -> str:
        if self.expected_failure:
            return EXPECTED_FAIL
        return PASS if self.passed else FAIL

    def as_dict(self) -> dict:
        return {"check": self.check, "status": self.status, "measured": self.measured,
                "comparison": self.comparison, "tolerance": self.tolerance,
                "reference": self.reference, "detail": self.detail}

    def line(self) -> str:
        return (f"{self.status:<13} {self.check}: measured {_fmt(self.measured)} "
                f"{self.comparison} {_fmt(self.tolerance)}")


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".6g")
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _plain(obj):
    """Recursively convert numpy and dataclass-ish values to JSON-ready Python objects."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "as_dict"):
        return _plain(obj.as_dict())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


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
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        if math.isnan(obj):
            return '"NaN"'
        if math.isinf(obj):
            return '"Infinity"' if obj > 0 else '"-Infinity"'
        return format(obj, ".17g")
    return json.dumps(obj)


def dumps(obj, indent: int = 2) -> str:
    """Canonical JSON: sorted keys, floats with 17 significant digits, trailing newline."""
    return _encode(_plain(obj), indent, 0) + "\n"


def write_csv(path, header: list, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in row])

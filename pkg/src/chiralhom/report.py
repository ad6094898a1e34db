"""Run reports with self-describing pass/fail checks and atomic file output."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CHECK_KINDS = ("le", "rel_err", "abs_err", "true")


def check_passes(kind: str, value, target, tol) -> bool:
    """Pure pass/fail rule shared by report construction and re-verification."""
    if kind == "true":
        return bool(value)
    if value is None or not math.isfinite(value):
        return False
    if kind == "le":
        return value <= tol
    if kind == "abs_err":
        return abs(value - target) <= tol
    if kind == "rel_err":
        return abs(value - target) <= tol * abs(target)
    raise ValueError(f"unknown check kind {kind!r}")


@dataclass
class Check:
    name: str
    value: object
    formula: str
    kind: str = "le"
    tol: float | None = None
    target: float | None = None

    def __post_init__(self):
        if self.kind not in CHECK_KINDS:
            raise ValueError(f"unknown check kind {self.kind!r}")
        if isinstance(self.value, (np.floating, np.integer, np.bool_)):
            self.value = self.value.item()

    @property
    def passed(self) -> bool:
        return check_passes(self.kind, self.value, self.target, self.tol)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "target": self.target,
            "tol": self.tol,
            "kind": self.kind,
            "formula": self.formula,
            "passed": self.passed,
        }


@dataclass
class RunReport:
    experiment: str
    config: dict
    metrics: dict = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def check(self, *args, **kw) -> Check:
        c = Check(*args, **kw)
        self.checks.append(c)
        return c

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "pass": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "metrics": to_jsonable(self.metrics),
            "notes": list(self.notes),
            "timings": self.timings,
            "config": self.config,
        }

    def summary_lines(self) -> list[str]:
        lines = []
        for c in self.checks:
            lines.append(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: value={c.value!r} ({c.formula}; tol={c.tol})")
        return lines


def recheck(report: dict) -> bool:
    """Recompute every check of a serialized report from its stored values."""
    return all(check_passes(c["kind"], c["value"], c["target"], c["tol"]) for c in report["checks"])


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return obj


# --------------------------------------------------------------------------- atomic output


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode())


def write_json(path, obj) -> None:
    # repr-precision floats: json emits shortest round-trip decimal
    atomic_write_text(path, json.dumps(to_jsonable(obj), indent=2, allow_nan=True) + "\n")


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    atomic_write_text(path, buf.getvalue())


def atomic_via(path, writer) -> None:
    """Run ``writer(tmp_path)`` then atomically move the result to ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise

"""Deterministic CSV / JSON report writers.

Floats are written with 17 significant digits and complex numbers as
``<re>+<im>i`` strings, so every double survives a round trip.  Identical
inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .config import format_complex

SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float | None = None
    threshold: float | None = None
    detail: str = ""


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)

    def add(self, *row) -> None:
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} cells, table has {len(self.columns)} columns")
        self.rows.append(tuple(row))


@dataclass
class Report:
    subcommand: str
    summary: dict[str, Any] = field(default_factory=dict)
    tables: dict[str, Table] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)

    def table(self, name: str, *columns: str) -> Table:
        t = Table(tuple(columns))
        self.tables[name] = t
        return t

    def check(self, name: str, passed: bool, value=None, threshold=None, detail: str = "") -> Check:
        c = Check(name, bool(passed), None if value is None else float(value), threshold, detail)
        self.checks.append(c)
        return c

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


# scalar text ------------------------------------------------------------------

def format_real(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def cell_text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_real(value)
    if isinstance(value, (complex, np.complexfloating)):
        return format_complex(complex(value))
    return str(value)


def to_csv(report: Report) -> str:
    """Long-format table: one line per cell, columns table,row,column,value."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["table", "row", "column", "value"])
    for name, t in report.tables.items():
        for i, row in enumerate(t.rows):
            for col, val in zip(t.columns, row):
                w.writerow([name, i, col, cell_text(val)])
    for c in report.checks:
        w.writerow(["checks", c.name, "passed", cell_text(c.passed)])
        if c.value is not None:
            w.writerow(["checks", c.name, "value", cell_text(c.value)])
        if c.threshold is not None:
            w.writerow(["checks", c.name, "threshold", cell_text(c.threshold)])
    return buf.getvalue()


def _json_value(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        return format_real(x) if math.isfinite(x) else json.dumps(format_real(x))
    if isinstance(value, (complex, np.complexfloating)):
        return json.dumps(format_complex(complex(value)))
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        items = ", ".join(f"{json.dumps(str(k))}: {_json_value(v)}" for k, v in value.items())
        return "{" + items + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json_value(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def report_tree(report: Report) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "subcommand": report.subcommand,
        "passed": report.passed,
        "summary": report.summary,
        "checks": [
            {"name": c.name, "passed": c.passed, "value": c.value, "threshold": c.threshold, "detail": c.detail}
            for c in report.checks
        ],
        "tables": {name: {"columns": list(t.columns), "rows": [list(r) for r in t.rows]} for name, t in report.tables.items()},
    }


def to_json(report: Report) -> str:
    return _json_value(report_tree(report)) + "\n"


def write_report(report: Report, out_dir: Path, fmt: str) -> list[str]:
    """Write <sub>.csv and/or <sub>.json; returns the file names written."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("csv", "both"):
        name = f"{report.subcommand}.csv"
        (out_dir / name).write_bytes(to_csv(report).encode("utf-8"))
        written.append(name)
    if fmt in ("json", "both"):
        name = f"{report.subcommand}.json"
        (out_dir / name).write_bytes(to_json(report).encode("utf-8"))
        written.append(name)
    return written


def write_manifest(out_dir: Path, manifest: dict) -> None:
    (out_dir / "manifest.json").write_bytes((_json_value(manifest) + "\n").encode("utf-8"))


__all__ = [
    "SCHEMA_VERSION",
    "Check",
    "Table",
    "Report",
    "format_real",
    "cell_text",
    "to_csv",
    "to_json",
    "report_tree",
    "write_report",
    "write_manifest",
]

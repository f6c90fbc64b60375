"""Fixed-column tables written as CSV (17 significant digits) or JSON."""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

MODES_COLUMNS = ("eta", "S", "U", "V", "Theta", "constraint_residual")
SPECTRUM_COLUMNS = ("k", "theta", "phi", "S_final", "U_final", "V_final")
TENSOR_COLUMNS = ("eta", "T00", "T11", "T22", "T33", "trace", "tail_estimate", "converged")


@dataclass
class Table:
    columns: tuple
    rows: list = field(default_factory=list)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values, table has {len(self.columns)} columns")
        self.rows.append(tuple(values))

    def column(self, name):
        j = self.columns.index(name)
        return [row[j] for row in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()

    def to_json(self) -> str:
        rows = [dict(zip(self.columns, (_plain(v) for v in row))) for row in self.rows]
        return json.dumps({"columns": list(self.columns), "rows": rows}, indent=1) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json()
        raise ValueError(f"unknown output format {fmt!r}")


def _plain(v):
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, int):
        return v
    return float(v)


def _fmt(v) -> str:
    v = _plain(v)
    if isinstance(v, (int, str)):
        return str(v)
    if math.isnan(v) or math.isinf(v):
        return repr(v)
    return f"{v:.17g}"


def _parse_cell(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def read_table(text: str, fmt: str = "csv") -> Table:
    if fmt == "json":
        doc = json.loads(text)
        cols = tuple(doc["columns"])
        return Table(cols, [tuple(r[c] for c in cols) for r in doc["rows"]])
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    cols = tuple(lines[0].split(","))
    rows = [tuple(_parse_cell(c) for c in line.split(",")) for line in lines[1:]]
    return Table(cols, rows)

"""Plain-text outputs: CSV tables, complex matrices and bit strings."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np


@dataclass
class Table:
    """Result rows with a header; units live in the column names."""

    columns: list[str]
    rows: list[tuple] = field(default_factory=list)
    meta: dict[str, Any] = field(default_factory=dict)

    def add(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values, table has {len(self.columns)} columns")
        self.rows.append(tuple(values))

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])

    def find(self, prefix: str) -> str:
        """Full column name starting with ``prefix`` (units included)."""
        hits = [c for c in self.columns if c == prefix or c.startswith(prefix + "[")]
        if len(hits) != 1:
            raise KeyError(f"no unique column {prefix!r} in {self.columns}")
        return hits[0]

    def __getitem__(self, prefix: str) -> np.ndarray:
        return self.column(self.find(prefix))


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".12g")
    return str(v)


def table_to_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def emit_csv(table: Table, path: str | Path) -> None:
    """Write ``table`` as CSV (CRLF rows, 12 significant digits)."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(table_to_csv(table))


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]


def write_matrices(matrices: dict[str, np.ndarray], path: str | Path) -> None:
    """Text export: ``# name rows cols`` then row-major ``re,im`` tokens."""
    lines = []
    for name, A in matrices.items():
        A = np.atleast_2d(np.asarray(A, dtype=complex))
        lines.append(f"# {name} {A.shape[0]} {A.shape[1]}")
        for row in A:
            lines.append(" ".join(f"{float(x.real)!r},{float(x.imag)!r}" for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_matrices(path: str | Path) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    i = 0
    while i < len(lines):
        head = lines[i].split()
        if not head:
            i += 1
            continue
        if head[0] != "#" or len(head) != 4:
            raise ValueError(f"line {i + 1}: expected '# name rows cols'")
        name, r, c = head[1], int(head[2]), int(head[3])
        A = np.empty((r, c), dtype=complex)
        for j in range(r):
            toks = lines[i + 1 + j].split()
            if len(toks) != c:
                raise ValueError(f"line {i + 2 + j}: expected {c} entries, got {len(toks)}")
            for col, t in enumerate(toks):
                re, im = t.split(",")
                A[j, col] = complex(float(re), float(im))
        out[name] = A
        i += 1 + r
    return out


def write_bits(seqs: Sequence[np.ndarray], path: str | Path) -> None:
    """One ASCII '0'/'1' line per sequence."""
    text = "".join("".join(map(str, np.asarray(s, dtype=int))) + "\n" for s in seqs)
    Path(path).write_text(text, encoding="ascii")


def read_bits(path: str | Path) -> list[np.ndarray]:
    out = []
    for n, line in enumerate(Path(path).read_text(encoding="ascii").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if set(line) - {"0", "1"}:
            raise ValueError(f"line {n}: only '0' and '1' are allowed")
        out.append(np.frombuffer(line.encode(), dtype=np.uint8) - ord("0"))
    return out

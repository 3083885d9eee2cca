"""Plain CSV interchange: comma separated, header row, LF endings, ``.`` decimals.

Floats are written with 17 significant digits so a read-back is exact.
A trailing ``label`` column, when present, holds integer labels.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError

LABEL_COLUMN = "label"


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_rows(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_matrix(path, points: np.ndarray, names: Sequence[str], labels: np.ndarray | None = None) -> None:
    header = list(names) + ([LABEL_COLUMN] if labels is not None else [])
    if labels is None:
        rows = (list(r) for r in points)
    else:
        rows = (list(r) + [int(lab)] for r, lab in zip(points, labels))
    write_rows(path, header, rows)


def read_matrix(path: str | Path) -> tuple[np.ndarray, np.ndarray | None, list[str]]:
    """Read a numeric CSV. Returns ``(points, labels or None, feature names)``."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{path}: empty file, expected a header row", row=1) from None
    header = [h.strip() for h in header]
    has_labels = bool(header) and header[-1] == LABEL_COLUMN
    names = header[:-1] if has_labels else header
    values = []
    for r, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"{path}: row {r} has {len(row)} cells, header has {len(header)}", row=r)
        parsed = []
        for c, cell in enumerate(row, start=1):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise ParseError(
                    f"{path}: non-numeric cell {cell!r} at row {r}, column {c}", row=r, column=c
                ) from None
        values.append(parsed)
    table = np.array(values, dtype=np.float64).reshape(len(values), len(header))
    if has_labels:
        return table[:, :-1], table[:, -1].astype(np.int64), names
    return table, None, names

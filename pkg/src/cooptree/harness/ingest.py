"""Reading samples from delimiter-separated text files with a header row."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..space import CONTINUOUS, TABLE, Dataset, SampleSpace


class IngestError(ValueError):
    pass


def _delimiter(header_line: str, delimiter: str | None) -> str | None:
    if delimiter is not None:
        return delimiter
    for d in (",", "\t", ";"):
        if d in header_line:
            return d
    return None  # whitespace


def read_rows(path, delimiter: str | None = None) -> tuple[list, list]:
    """Header and ``(line_number, fields)`` pairs, skipping blank lines."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc.strerror or exc}") from exc
    lines = text.splitlines()
    numbered = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip()]
    if not numbered:
        raise IngestError(f"{path}: empty file")
    d = _delimiter(numbered[0][1], delimiter)
    if d is None:
        split = [(i, ln.split()) for i, ln in numbered]
    else:
        split = [(i, [f.strip() for f in next(csv.reader([ln], delimiter=d))]) for i, ln in numbered]
    header = split[0][1]
    rows = split[1:]
    for lineno, fields in rows:
        if len(fields) != len(header):
            raise IngestError(f"{path}, line {lineno}: expected {len(header)} fields, found {len(fields)}")
    return header, rows


def _parse(path, header, rows, columns, mode):
    """Numeric matrix of the chosen columns, with table values mapped to cells."""
    idx = [header.index(c) for c in columns]
    out = np.empty((len(rows), len(idx)))
    for r, (lineno, fields) in enumerate(rows):
        for k, j in enumerate(idx):
            raw = fields[j]
            try:
                v = float(raw)
            except ValueError:
                raise IngestError(f"{path}, line {lineno}, column {header[j]!r}: not a number: {raw!r}") from None
            if not np.isfinite(v):
                raise IngestError(f"{path}, line {lineno}, column {header[j]!r}: non-finite value")
            if mode == TABLE:
                if v not in (0.0, 1.0):
                    raise IngestError(f"{path}, line {lineno}, column {header[j]!r}: table values must be 0 or 1, got {raw!r}")
                v += 1.0
            out[r, k] = v
    return out


def _columns(path, header, columns, exclude=None):
    if columns is None:
        cols = [c for c in header if c != exclude]
    else:
        cols = list(columns)
        for c in cols:
            if c not in header:
                raise IngestError(f"{path}: no column named {c!r}")
    if not cols:
        raise IngestError(f"{path}: no data columns")
    return cols


def _check_bounds(x, bounds, sources):
    for r in range(x.shape[0]):
        for d, (lo, hi) in enumerate(bounds):
            if not lo <= x[r, d] < hi:
                src, lineno, col = sources[r][0], sources[r][1], sources[r][2][d]
                raise IngestError(f"{src}, line {lineno}, column {col!r}: value {x[r, d]} outside [{lo}, {hi})")


def _space(mode, dims, samples, bounds):
    if mode == TABLE:
        return SampleSpace.table(dims)
    if mode != CONTINUOUS:
        raise IngestError(f"unknown mode {mode!r}; expected continuous or table")
    if bounds is not None:
        if len(bounds) != dims:
            raise IngestError(f"expected bounds for {dims} dimensions, got {len(bounds)}")
        return SampleSpace.rectangle(bounds)
    try:
        return SampleSpace.from_data(*samples)
    except ValueError as exc:
        raise IngestError(str(exc)) from exc


def _load(path, mode, columns, delimiter, exclude=None):
    header, rows = read_rows(path, delimiter)
    cols = _columns(path, header, columns, exclude)
    return header, rows, cols, _parse(path, header, rows, cols, mode)


def ingest_one(path, mode: str = CONTINUOUS, columns=None, bounds=None, delimiter=None) -> Dataset:
    """A single sample; every column is a dimension unless ``columns`` is given."""
    _, rows, cols, x = _load(path, mode, columns, delimiter)
    if len(x) == 0:
        raise IngestError(f"{path}: no data rows")
    if bounds is not None and mode == CONTINUOUS:
        _check_bounds(x, bounds, [(path, ln, cols) for ln, _ in rows])
    return Dataset.from_points(_space(mode, x.shape[1], [x], bounds), x)


def ingest_pair(path1, path2, mode: str = CONTINUOUS, columns=None, bounds=None, delimiter=None) -> tuple[Dataset, Dataset]:
    """Two samples from two files sharing the same columns."""
    _, rows1, cols1, x1 = _load(path1, mode, columns, delimiter)
    _, rows2, cols2, x2 = _load(path2, mode, columns, delimiter)
    if cols1 != cols2:
        raise IngestError(f"{path1} and {path2} have different columns")
    if len(x1) == 0 or len(x2) == 0:
        raise IngestError("both samples must contain at least one row")
    if bounds is not None and mode == CONTINUOUS:
        _check_bounds(x1, bounds, [(path1, ln, cols1) for ln, _ in rows1])
        _check_bounds(x2, bounds, [(path2, ln, cols2) for ln, _ in rows2])
    space = _space(mode, x1.shape[1], [x1, x2], bounds)
    return Dataset.from_points(space, x1), Dataset.from_points(space, x2)


def ingest_grouped(path, group: str, mode: str = CONTINUOUS, columns=None, bounds=None, delimiter=None):
    """Two samples from one file split on a group column.

    The group column must hold exactly two labels; the lexicographically
    smaller one is sample 1.  Returns ``(data1, data2, (label1, label2))``.
    """
    header, rows = read_rows(path, delimiter)
    if group not in header:
        raise IngestError(f"{path}: no group column {group!r}")
    gi = header.index(group)
    labels = sorted({f[gi] for _, f in rows})
    if len(labels) != 2:
        raise IngestError(f"{path}: group column {group!r} must hold exactly two labels, found {len(labels)}")
    cols = _columns(path, header, columns, exclude=group)
    x = _parse(path, header, rows, cols, mode)
    lab = np.array([f[gi] == labels[1] for _, f in rows])
    if bounds is not None and mode == CONTINUOUS:
        _check_bounds(x, bounds, [(path, ln, cols) for ln, _ in rows])
    x1, x2 = x[~lab], x[lab]
    space = _space(mode, x.shape[1], [x1, x2], bounds)
    return Dataset.from_points(space, x1), Dataset.from_points(space, x2), (labels[0], labels[1])


def ingest(path, mode: str = CONTINUOUS, *, path2=None, group=None, columns=None, bounds=None, delimiter=None):
    """Dispatch on the inputs given: one file, two files, or one grouped file."""
    if path2 is not None:
        return ingest_pair(path, path2, mode, columns, bounds, delimiter)
    if group is not None:
        d1, d2, _ = ingest_grouped(path, group, mode, columns, bounds, delimiter)
        return d1, d2
    return ingest_one(path, mode, columns, bounds, delimiter)


def write_samples(path, data1: Dataset, data2: Dataset, labels=("1", "2"), delimiter=","):
    """Write both samples to one file with a ``group`` column (tables as 0/1)."""
    p = data1.space.dims
    names = [f"x{k + 1}" for k in range(p)]
    table = data1.space.kind == TABLE
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter)
        w.writerow(names + ["group"])
        for data, lab in ((data1, labels[0]), (data2, labels[1])):
            for row in data.points:
                vals = [str(int(v) - 1) for v in row] if table else [repr(float(v)) for v in row]
                w.writerow(vals + [lab])

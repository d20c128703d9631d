"""Bit-exact text formats for matrices, labels, traces, and metrics.

Matrix files:
    MBNR1 matrix <rows> <cols>
    <cols space-separated decimal floats per row, one row per line>

Label files:
    MBNR1 labels <count>
    <one nonnegative integer per line>

Floats are written with Python's shortest round-trip repr, '.' decimal
separator, LF line endings; reading back reproduces the in-memory values
bit for bit. Zero-sized matrices are rejected on both ends. All parse
failures raise ParseError with the offending 1-based line number.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ParseError
from .linalg import as_matrix
from .scene import validate_labels

MAGIC = "MBNR1"


def _fmt(value: float) -> str:
    return repr(float(value))


def write_matrix(path, matrix) -> None:
    """Write a matrix in the MBNR1 text format."""
    mat = as_matrix(matrix, "matrix")
    lines = [f"{MAGIC} matrix {mat.shape[0]} {mat.shape[1]}"]
    for row in mat:
        lines.append(" ".join(_fmt(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix(path) -> np.ndarray:
    """Read an MBNR1 matrix file; raises ParseError on any format violation."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(path, 1, "empty file, expected MBNR1 matrix header")
    header = lines[0].split()
    if len(header) != 4 or header[0] != MAGIC or header[1] != "matrix":
        raise ParseError(path, 1, f"malformed header {lines[0]!r}, expected "
                                  f"'{MAGIC} matrix <rows> <cols>'")
    try:
        rows, cols = int(header[2]), int(header[3])
    except ValueError:
        raise ParseError(path, 1, f"non-integer dimensions in header {lines[0]!r}") from None
    if rows < 1 or cols < 1:
        raise ParseError(path, 1, f"degenerate dimensions {rows} x {cols}")
    if len(lines) < rows + 1:
        raise ParseError(path, len(lines) + 1,
                         f"expected {rows} data rows, file ends after {len(lines) - 1}")
    out = np.empty((rows, cols))
    for r in range(rows):
        line_no = r + 2
        tokens = lines[r + 1].split()
        if len(tokens) != cols:
            raise ParseError(path, line_no,
                             f"expected {cols} values, got {len(tokens)}")
        for c, tok in enumerate(tokens):
            try:
                value = float(tok)
            except ValueError:
                raise ParseError(path, line_no, f"not a number: {tok!r}") from None
            if not math.isfinite(value):
                raise ParseError(path, line_no, f"non-finite entry: {tok!r}")
            out[r, c] = value
    for extra in range(rows + 1, len(lines)):
        if lines[extra].strip():
            raise ParseError(path, extra + 1, "unexpected content after data rows")
    return out


def write_labels(path, labels) -> None:
    """Write a label vector in the MBNR1 text format."""
    arr = validate_labels(labels)
    lines = [f"{MAGIC} labels {arr.size}"]
    lines.extend(str(int(v)) for v in arr)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_labels(path) -> np.ndarray:
    """Read an MBNR1 label file; raises ParseError on any format violation."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(path, 1, "empty file, expected MBNR1 labels header")
    header = lines[0].split()
    if len(header) != 3 or header[0] != MAGIC or header[1] != "labels":
        raise ParseError(path, 1, f"malformed header {lines[0]!r}, expected "
                                  f"'{MAGIC} labels <count>'")
    try:
        count = int(header[2])
    except ValueError:
        raise ParseError(path, 1, f"non-integer count in header {lines[0]!r}") from None
    if count < 1:
        raise ParseError(path, 1, f"degenerate label count {count}")
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != count:
        raise ParseError(path, min(len(lines), count + 1),
                         f"expected {count} labels, got {len(body)}")
    out = np.empty(count, dtype=np.int64)
    for i, ln in enumerate(body):
        tok = ln.strip()
        try:
            value = int(tok)
        except ValueError:
            raise ParseError(path, i + 2, f"not an integer: {tok!r}") from None
        if value < 0:
            raise ParseError(path, i + 2, f"negative label id: {value}")
        out[i] = value
    return out


def write_trace_csv(path, trace) -> None:
    """Write the per-iteration solver history as CSV."""
    lines = ["iteration,objective,r1,r2,r3,r4,beta"]
    for i in range(len(trace)):
        lines.append(",".join([
            str(trace.iterations[i]),
            _fmt(trace.objective[i]),
            _fmt(trace.r1[i]),
            _fmt(trace.r2[i]),
            _fmt(trace.r3[i]),
            _fmt(trace.r4[i]),
            _fmt(trace.beta[i]),
        ]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_metrics_csv(path, metrics: dict) -> None:
    """Write a key,value metrics table as CSV."""
    lines = ["metric,value"]
    for key, value in metrics.items():
        if isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, float):
            rendered = _fmt(value)
        else:
            rendered = str(value)
        lines.append(f"{key},{rendered}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_pointcloud_frames(directory, shapes, labels) -> list:
    """Write one plot-ready file per frame: rows of 'x y z label'.

    Returns the list of written paths.
    """
    from pathlib import Path

    shapes = as_matrix(shapes, "shapes")
    arr = validate_labels(labels, num_points=shapes.shape[1])
    frames = shapes.shape[0] // 3
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for f in range(frames):
        block = shapes[3 * f : 3 * f + 3]
        lines = [
            f"{_fmt(block[0, p])} {_fmt(block[1, p])} {_fmt(block[2, p])} {int(arr[p])}"
            for p in range(shapes.shape[1])
        ]
        path = directory / f"frame_{f:04d}.txt"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        paths.append(path)
    return paths

"""Matrix Market I/O: coordinate files for matrices, array files for vectors.

Readers convert 1-based file indices to the 0-based internal convention, sum
duplicate coordinate entries, and expand symmetric storage to general form.
Writers emit ``%.17g`` so that a write/read round trip reproduces the CSR
arrays bit for bit.
"""

from __future__ import annotations

import os

import numpy as np

from .sparse import CsrMatrix, from_coo

#: Suffix probed for a companion right-hand-side file next to a matrix file.
RHS_SUFFIX = "_rhs"


class MatrixMarketError(ValueError):
    """Malformed or unsupported Matrix Market content."""


def _parse_header(line: str, path: str) -> tuple[str, str, str]:
    tokens = line.strip().split()
    if len(tokens) != 5 or tokens[0] != "%%MatrixMarket":
        raise MatrixMarketError(f"{path}: malformed Matrix Market header: {line!r}")
    obj, fmt, fieldkind, symmetry = (t.lower() for t in tokens[1:])
    if obj != "matrix":
        raise MatrixMarketError(f"{path}: unsupported object {obj!r}")
    if fieldkind not in ("real", "integer"):
        raise MatrixMarketError(f"{path}: unsupported field {fieldkind!r}")
    return fmt, fieldkind, symmetry


def _data_lines(path: str):
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline()
        if not header:
            raise MatrixMarketError(f"{path}: empty file")
        yield header
        for line in fh:
            line = line.strip()
            if line and not line.startswith("%"):
                yield line


def read_matrix_market(path: str) -> tuple[CsrMatrix, np.ndarray | None]:
    """Read a coordinate-format square matrix, plus a companion rhs if present.

    The companion is looked up at ``<stem>_rhs<ext>`` (as written by
    :func:`equisolve.testgen`-based generation) and parsed as an array-format
    vector; ``None`` is returned when no such file exists.
    """
    lines = _data_lines(path)
    fmt, _, symmetry = _parse_header(next(lines), path)
    if fmt != "coordinate":
        raise MatrixMarketError(f"{path}: expected coordinate format, got {fmt!r}")
    if symmetry not in ("general", "symmetric"):
        raise MatrixMarketError(f"{path}: unsupported symmetry {symmetry!r}")
    try:
        size = next(lines)
    except StopIteration:
        raise MatrixMarketError(f"{path}: missing size line") from None
    parts = size.split()
    if len(parts) != 3:
        raise MatrixMarketError(f"{path}: malformed size line: {size!r}")
    nrows, ncols, nnz = (int(p) for p in parts)
    if nrows != ncols:
        raise MatrixMarketError(f"{path}: matrix is not square ({nrows}x{ncols})")
    rows, cols, vals = [], [], []
    for _ in range(nnz):
        try:
            entry = next(lines)
        except StopIteration:
            raise MatrixMarketError(f"{path}: fewer entries than declared") from None
        parts = entry.split()
        if len(parts) != 3:
            raise MatrixMarketError(f"{path}: malformed entry line: {entry!r}")
        i, j = int(parts[0]) - 1, int(parts[1]) - 1
        v = float(parts[2])
        if not (0 <= i < nrows and 0 <= j < ncols):
            raise MatrixMarketError(
                f"{path}: index ({i + 1}, {j + 1}) out of range for order {nrows}")
        rows.append(i)
        cols.append(j)
        vals.append(v)
        if symmetry == "symmetric" and i != j:
            rows.append(j)
            cols.append(i)
            vals.append(v)
    mat = from_coo(nrows, rows, cols, vals)
    stem, ext = os.path.splitext(path)
    companion = stem + RHS_SUFFIX + ext
    rhs = read_vector(companion) if os.path.exists(companion) else None
    if rhs is not None and rhs.size != nrows:
        raise MatrixMarketError(
            f"{companion}: rhs length {rhs.size} does not match order {nrows}")
    return mat, rhs


def read_vector(path: str) -> np.ndarray:
    """Read an array-format n-by-1 real vector."""
    lines = _data_lines(path)
    fmt, _, symmetry = _parse_header(next(lines), path)
    if fmt != "array":
        raise MatrixMarketError(f"{path}: expected array format, got {fmt!r}")
    if symmetry != "general":
        raise MatrixMarketError(f"{path}: vectors must use general symmetry")
    try:
        size = next(lines)
    except StopIteration:
        raise MatrixMarketError(f"{path}: missing size line") from None
    parts = size.split()
    if len(parts) != 2:
        raise MatrixMarketError(f"{path}: malformed size line: {size!r}")
    nrows, ncols = int(parts[0]), int(parts[1])
    if ncols != 1:
        raise MatrixMarketError(f"{path}: expected a single column, got {ncols}")
    out = np.empty(nrows)
    for k in range(nrows):
        try:
            out[k] = float(next(lines))
        except StopIteration:
            raise MatrixMarketError(f"{path}: fewer values than declared") from None
    return out


def write_matrix_market(a: CsrMatrix, path: str, comment: str | None = None) -> None:
    """Write a CSR matrix as coordinate real general, 1-based indices."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{a.n} {a.n} {a.nnz}\n")
        for i, j, v in zip(a.entry_rows, a.col_idx, a.values):
            fh.write(f"{i + 1} {j + 1} {v:.17g}\n")


def write_vector(v, path: str, comment: str | None = None) -> None:
    """Write a vector as array real general (n-by-1)."""
    v = np.asarray(v, dtype=np.float64)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("%%MatrixMarket matrix array real general\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{v.size} 1\n")
        for x in v:
            fh.write(f"{x:.17g}\n")

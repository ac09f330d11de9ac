"""Compressed sparse row matrices: products, conversions, and profiling.

Vectors are plain 1-D float64 numpy arrays.  ``CsrMatrix`` instances are
immutable after construction (the backing arrays are marked read-only), so
matrices and vectors can be shared freely across threads; every operation in
this module is re-entrant.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

#: Largest matrix order for which dense materialization is allowed.
DENSE_CAP = 2000


class DenseCapExceeded(ValueError):
    """Matrix order exceeds the configured cap for dense materialization."""


@dataclass(eq=False)
class CsrMatrix:
    """Square sparse matrix in compressed sparse row form.

    Invariants enforced at construction: ``row_ptr`` is non-decreasing with
    ``row_ptr[0] == 0`` and ``row_ptr[n] == nnz``; column indices are strictly
    increasing within each row and all lie in ``[0, n)``; stored values are
    finite.  Explicitly stored zeros are legal and preserved.
    """

    n: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray
    _entry_rows: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.row_ptr = np.ascontiguousarray(self.row_ptr, dtype=np.int64)
        self.col_idx = np.ascontiguousarray(self.col_idx, dtype=np.int64)
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.n < 0:
            raise ValueError("matrix order must be non-negative")
        if self.row_ptr.shape != (self.n + 1,):
            raise ValueError("row_ptr must have length n+1")
        if self.row_ptr[0] != 0 or self.row_ptr[-1] != self.values.size:
            raise ValueError("row_ptr must run from 0 to nnz")
        if np.any(np.diff(self.row_ptr) < 0):
            raise ValueError("row_ptr must be non-decreasing")
        if self.col_idx.shape != self.values.shape:
            raise ValueError("col_idx and values must have equal length")
        if self.col_idx.size:
            if self.col_idx.min() < 0 or self.col_idx.max() >= self.n:
                raise ValueError("column index out of range")
        if self.col_idx.size > 1:
            gaps = np.diff(self.col_idx)
            starts = self.row_ptr[1:-1]
            interior = starts[(starts > 0) & (starts < self.col_idx.size)]
            keep = np.ones(gaps.size, dtype=bool)
            keep[interior - 1] = False
            if np.any(gaps[keep] <= 0):
                raise ValueError("column indices must be strictly increasing "
                                 "within each row")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("stored values must be finite")
        self._entry_rows = np.repeat(np.arange(self.n, dtype=np.int64),
                                     np.diff(self.row_ptr))
        for arr in (self.row_ptr, self.col_idx, self.values, self._entry_rows):
            arr.setflags(write=False)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @property
    def entry_rows(self) -> np.ndarray:
        """Row index of every stored entry (length nnz, read-only)."""
        return self._entry_rows

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Column indices and values of row ``i`` as read-only views."""
        lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
        return self.col_idx[lo:hi], self.values[lo:hi]


@dataclass
class MatrixProfile:
    """Solver-relevant summary of a sparse matrix."""

    dimension: int
    nnz: int
    sparsity_pct: float
    normality: float
    cond_estimate: float | None = None


def check_vector(x, n: int, name: str = "vector") -> np.ndarray:
    """Coerce ``x`` to a 1-D float64 array of length ``n`` or raise."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != n:
        raise ValueError(f"{name} must be 1-D of length {n}, got shape {x.shape}")
    return x


def spmv(a: CsrMatrix, x) -> np.ndarray:
    """Sparse matrix-vector product ``y = A @ x``.

    Entries are accumulated in storage order (row-major, ascending column),
    so results are bit-reproducible for a fixed matrix.
    """
    x = check_vector(x, a.n, "x")
    contrib = a.values * x[a.col_idx]
    return np.bincount(a._entry_rows, weights=contrib, minlength=a.n)


def spmv_transpose(a: CsrMatrix, x) -> np.ndarray:
    """Product with the transpose, ``y = A.T @ x``, without forming A.T."""
    x = check_vector(x, a.n, "x")
    contrib = a.values * x[a._entry_rows]
    return np.bincount(a.col_idx, weights=contrib, minlength=a.n)


def to_dense(a: CsrMatrix, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense ``n x n`` array with zeros in unstored positions.

    Guarded by ``cap`` so oracle paths cannot blow up on large inputs.
    """
    if a.n > cap:
        raise DenseCapExceeded(f"order {a.n} exceeds dense cap {cap}")
    out = np.zeros((a.n, a.n))
    out[a._entry_rows, a.col_idx] = a.values
    return out


def from_dense(arr) -> CsrMatrix:
    """CSR matrix from a dense square array, keeping exact nonzeros."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("array must be square")
    n = arr.shape[0]
    rows, cols = np.nonzero(arr)
    counts = np.bincount(rows, minlength=n)
    row_ptr = np.concatenate(([0], np.cumsum(counts)))
    return CsrMatrix(n, row_ptr, cols, arr[rows, cols])


def from_coo(n: int, rows, cols, vals, sum_duplicates: bool = True) -> CsrMatrix:
    """CSR matrix from coordinate triplets.

    Duplicate positions are summed by default (explicit zeros are preserved).
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    if not (rows.shape == cols.shape == vals.shape):
        raise ValueError("rows, cols, vals must have equal length")
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if sum_duplicates and rows.size:
        new_group = np.empty(rows.size, dtype=bool)
        new_group[0] = True
        new_group[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        starts = np.flatnonzero(new_group)
        vals = np.add.reduceat(vals, starts)
        rows, cols = rows[starts], cols[starts]
    counts = np.bincount(rows, minlength=n) if rows.size else np.zeros(n, dtype=np.int64)
    row_ptr = np.concatenate(([0], np.cumsum(counts)))
    return CsrMatrix(n, row_ptr, cols, vals)


def eye(n: int) -> CsrMatrix:
    """Identity matrix in CSR form."""
    idx = np.arange(n, dtype=np.int64)
    return CsrMatrix(n, np.arange(n + 1, dtype=np.int64), idx, np.ones(n))


def csr_transpose(a: CsrMatrix) -> CsrMatrix:
    """Explicit transpose in CSR form."""
    order = np.argsort(a.col_idx, kind="stable")
    counts = np.bincount(a.col_idx, minlength=a.n)
    row_ptr = np.concatenate(([0], np.cumsum(counts)))
    return CsrMatrix(a.n, row_ptr, a._entry_rows[order], a.values[order])


def frobenius_norm(a: CsrMatrix) -> float:
    return float(np.linalg.norm(a.values))


def _row_dicts(a: CsrMatrix):
    for i in range(a.n):
        cols, vals = a.row(i)
        yield cols, vals


def normality(a: CsrMatrix, cap: int = DENSE_CAP) -> float:
    """Commutator-based symmetry departure ``||A A.T - A.T A||_F / ||A||_F^2``.

    Zero (to rounding) exactly when A is symmetric.  Uses a dense product
    below ``cap`` and streamed sparse row products above it.
    """
    fro2 = float(np.dot(a.values, a.values))
    if fro2 == 0.0:
        return 0.0
    if a.n <= cap:
        d = to_dense(a, cap)
        comm = d @ d.T - d.T @ d
        return float(np.linalg.norm(comm) / fro2)
    at = csr_transpose(a)
    total = 0.0
    for i in range(a.n):
        acc: dict[int, float] = {}
        cols_i, vals_i = a.row(i)
        for k, v in zip(cols_i, vals_i):
            ck, vk = at.row(k)
            for j, w in zip(ck, vk):
                acc[j] = acc.get(j, 0.0) + v * w
        tcols_i, tvals_i = at.row(i)
        for k, v in zip(tcols_i, tvals_i):
            ck, vk = a.row(k)
            for j, w in zip(ck, vk):
                acc[j] = acc.get(j, 0.0) - v * w
        total += sum(x * x for x in acc.values())
    return float(np.sqrt(total) / fro2)


def profile(a: CsrMatrix, with_cond: bool = False, cap: int = DENSE_CAP) -> MatrixProfile:
    """Summarize dimension, fill, symmetry departure, and (optionally) kappa.

    Condition estimation failures are downgraded to a warning and an absent
    ``cond_estimate``.
    """
    sparsity = 100.0 * a.nnz / (a.n * a.n) if a.n else 0.0
    prof = MatrixProfile(dimension=a.n, nnz=a.nnz, sparsity_pct=sparsity,
                         normality=normality(a, cap))
    if with_cond:
        from . import errcontrol

        try:
            if a.n <= cap:
                est = errcontrol.cond_exact(lambda x: spmv(a, x), a.n, cap=cap)
            else:
                est = errcontrol.cond_estimate_1norm(
                    lambda x: spmv(a, x), lambda x: spmv_transpose(a, x), a.n)
            prof.cond_estimate = est.value
        except Exception as exc:  # singular or non-converging inner solves
            warnings.warn(f"condition estimation failed: {exc}")
            prof.cond_estimate = None
    return prof

"""Threshold + fill-limited incomplete LU factorization and its solves.

The factorization runs row by row (IKJ ordering).  While eliminating row i,
any working-row element smaller in magnitude than ``droptol`` times the
2-norm of the *original* row i is replaced by zero; this applies both to
elimination multipliers and to fill-in.  After the row is eliminated, only
the ``lfil`` largest entries of its strictly-lower part and the ``lfil``
largest entries of its strictly-upper part are retained; the diagonal is
always kept.

The resulting factors define the preconditioner application
``w = U^-1 (L^-1 v)`` via forward and back substitution.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .sparse import CsrMatrix, check_vector, csr_transpose


class FactorizationError(RuntimeError):
    """Incomplete factorization hit a zero (or unusable) pivot."""

    def __init__(self, message: str, row: int):
        super().__init__(message)
        self.row = row
        self.stage = "factorization"


@dataclass(eq=False)
class IlutFactors:
    """Incomplete factors: unit lower (diagonal implicit) and upper with diagonal."""

    lower: CsrMatrix
    upper: CsrMatrix
    droptol: float
    lfil: int
    _diag: np.ndarray = field(init=False, repr=False)
    _lower_t: CsrMatrix | None = field(default=None, init=False, repr=False)
    _upper_t: CsrMatrix | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        n = self.upper.n
        diag = np.zeros(n)
        for i in range(n):
            cols, vals = self.upper.row(i)
            if cols.size == 0 or cols[0] != i:
                raise FactorizationError(f"missing diagonal in upper factor row {i}", i)
            diag[i] = vals[0]
        if np.any(diag == 0.0) or not np.all(np.isfinite(diag)):
            bad = int(np.argmax((diag == 0.0) | ~np.isfinite(diag)))
            raise FactorizationError(f"zero pivot in upper factor row {bad}", bad)
        diag.setflags(write=False)
        self._diag = diag

    @property
    def diag(self) -> np.ndarray:
        """Diagonal of the upper factor."""
        return self._diag

    def transposed(self) -> tuple[CsrMatrix, CsrMatrix]:
        """Cached transposes of both factors (built on first use)."""
        if self._lower_t is None:
            self._lower_t = csr_transpose(self.lower)
            self._upper_t = csr_transpose(self.upper)
        return self._lower_t, self._upper_t


def ilut_factorize(a: CsrMatrix, droptol: float = 0.01, lfil: int = 10,
                   pivot_shift: bool = False) -> IlutFactors:
    """Incomplete LU of ``a`` with relative drop tolerance and per-row fill cap.

    Parameters
    ----------
    a : CsrMatrix
        Square matrix to factor.  No pivoting is performed.
    droptol : float
        Relative drop tolerance; an element is zeroed when its magnitude is
        below ``droptol * ||row||_2`` of the original row containing it.
    lfil : int
        Maximum number of off-diagonal entries kept per row in each factor.
    pivot_shift : bool
        When True, a pivot smaller than ``1e-12 * ||row||_2`` is replaced by
        that threshold (sign preserved) instead of raising.  Off by default:
        a failure is reported, not silently patched.

    Raises
    ------
    FactorizationError
        On a zero pivot (naming the row) unless ``pivot_shift`` is set.
    """
    if droptol < 0.0:
        raise ValueError("droptol must be non-negative")
    if lfil < 0:
        raise ValueError("lfil must be non-negative")
    n = a.n
    l_rows_cols: list[np.ndarray] = []
    l_rows_vals: list[np.ndarray] = []
    u_rows_cols: list[np.ndarray] = []
    u_rows_vals: list[np.ndarray] = []
    u_diag = np.zeros(n)

    w = np.zeros(n)
    for i in range(n):
        cols_i, vals_i = a.row(i)
        row_norm = float(np.linalg.norm(vals_i))
        thresh = droptol * row_norm
        w[cols_i] = vals_i
        touched = list(cols_i)
        heap = [int(c) for c in cols_i if c < i]
        heapq.heapify(heap)
        in_heap = set(heap)
        kept_l_cols: list[int] = []
        while heap:
            k = heapq.heappop(heap)
            in_heap.discard(k)
            mult = w[k] / u_diag[k]
            if abs(mult) < thresh:
                w[k] = 0.0
                continue
            w[k] = mult
            kept_l_cols.append(k)
            # skip the leading diagonal of row k: the multiplier annihilates it
            ucols, uvals = u_rows_cols[k], u_rows_vals[k]
            for j, ukj in zip(ucols[1:], uvals[1:]):
                upd = mult * ukj
                if w[j] != 0.0 or j in in_heap:
                    w[j] -= upd
                elif abs(upd) >= thresh:
                    w[j] = -upd
                    touched.append(j)
                    if j < i:
                        heapq.heappush(heap, int(j))
                        in_heap.add(int(j))

        piv = w[i]
        if abs(piv) < 1e-12 * row_norm or piv == 0.0:
            if pivot_shift:
                piv = (1e-12 * row_norm) if piv >= 0.0 else -(1e-12 * row_norm)
                if piv == 0.0:
                    raise FactorizationError(f"zero pivot at row {i} (zero row)", i)
            elif piv == 0.0:
                raise FactorizationError(f"zero pivot at row {i}", i)

        lc = np.array(sorted(kept_l_cols), dtype=np.int64)
        lv = w[lc] if lc.size else np.empty(0)
        keep_l = np.abs(lv) >= thresh if thresh > 0.0 else lv != 0.0
        lc, lv = lc[keep_l], lv[keep_l]
        if lc.size > lfil:
            top = np.argsort(-np.abs(lv), kind="stable")[:lfil]
            top.sort()
            lc, lv = lc[top], lv[top]

        uc = np.array(sorted(c for c in set(touched) if c > i), dtype=np.int64)
        uv = w[uc] if uc.size else np.empty(0)
        keep_u = (np.abs(uv) >= thresh) & (uv != 0.0) if thresh > 0.0 else uv != 0.0
        uc, uv = uc[keep_u], uv[keep_u]
        if uc.size > lfil:
            top = np.argsort(-np.abs(uv), kind="stable")[:lfil]
            top.sort()
            uc, uv = uc[top], uv[top]

        l_rows_cols.append(lc)
        l_rows_vals.append(lv)
        u_rows_cols.append(np.concatenate(([i], uc)))
        u_rows_vals.append(np.concatenate(([piv], uv)))
        u_diag[i] = piv

        for c in touched:
            w[c] = 0.0
        w[i] = 0.0

    lower = _rows_to_csr(n, l_rows_cols, l_rows_vals)
    upper = _rows_to_csr(n, u_rows_cols, u_rows_vals)
    return IlutFactors(lower=lower, upper=upper, droptol=droptol, lfil=lfil)


def _rows_to_csr(n: int, row_cols: list[np.ndarray], row_vals: list[np.ndarray]) -> CsrMatrix:
    counts = np.array([c.size for c in row_cols], dtype=np.int64)
    row_ptr = np.concatenate(([0], np.cumsum(counts)))
    cols = np.concatenate(row_cols) if n else np.empty(0, dtype=np.int64)
    vals = np.concatenate(row_vals) if n else np.empty(0)
    return CsrMatrix(n, row_ptr, cols.astype(np.int64), vals)


def apply_precond(f: IlutFactors, v) -> np.ndarray:
    """Apply the preconditioner inverse: solve ``L z = v`` then ``U w = z``."""
    n = f.upper.n
    z = check_vector(v, n, "v").copy()
    lower, upper = f.lower, f.upper
    for i in range(n):
        cols, vals = lower.row(i)
        if cols.size:
            z[i] -= vals @ z[cols]
    w = np.zeros(n)
    diag = f.diag
    for i in range(n - 1, -1, -1):
        cols, vals = upper.row(i)
        acc = z[i]
        if cols.size > 1:
            acc -= vals[1:] @ w[cols[1:]]
        w[i] = acc / diag[i]
    return w


def apply_precond_transpose(f: IlutFactors, v) -> np.ndarray:
    """Apply the transposed inverse: solve ``U.T z = v`` then ``L.T w = z``."""
    n = f.upper.n
    v = check_vector(v, n, "v")
    lower_t, upper_t = f.transposed()
    diag = f.diag
    z = np.zeros(n)
    for i in range(n):
        cols, vals = upper_t.row(i)
        acc = v[i]
        if cols.size:
            below = cols < i
            if below.any():
                acc -= vals[below] @ z[cols[below]]
        z[i] = acc / diag[i]
    w = z.copy()
    for i in range(n - 1, -1, -1):
        cols, vals = lower_t.row(i)
        if cols.size:
            w[i] -= vals @ w[cols]
    return w

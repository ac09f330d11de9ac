"""Row equilibration and the scaled norm it induces.

Left-scaling a system by the inverse of a positive diagonal D leaves the
solution untouched while normalizing row magnitudes; the matching vector norm
is ``||v||_* = ||D^-1 v||_2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .sparse import CsrMatrix, check_vector


class ScalingMode(str, Enum):
    """How the equilibration diagonal is built from the matrix rows."""

    ABS_ROW_SUM = "abs-row-sum"        # d_i = sum_j |a_ij|   (default)
    ABS_OF_ROW_SUM = "abs-of-row-sum"  # d_i = |sum_j a_ij|
    NONE = "none"                      # d_i = 1


class ScalingError(ValueError):
    """A row cannot be equilibrated (zero row or zero row sum)."""

    def __init__(self, message: str, row: int):
        super().__init__(message)
        self.row = row
        self.stage = "scaling"


@dataclass
class ScalingOp:
    """Diagonal scaling operator D (stored as its diagonal)."""

    diag: np.ndarray
    mode: ScalingMode = ScalingMode.ABS_ROW_SUM

    def __post_init__(self):
        self.diag = np.ascontiguousarray(self.diag, dtype=np.float64)
        if self.mode != ScalingMode.NONE and np.any(self.diag <= 0.0):
            bad = int(np.argmax(self.diag <= 0.0))
            raise ScalingError(f"non-positive scaling entry at row {bad}", bad)
        self.diag.setflags(write=False)


def equilibrate(a: CsrMatrix, mode: ScalingMode = ScalingMode.ABS_ROW_SUM) -> ScalingOp:
    """Build the equilibration diagonal for ``a``.

    ``ABS_ROW_SUM`` uses the 1-norm of each row and is defined whenever no
    row is entirely zero.  ``ABS_OF_ROW_SUM`` takes the absolute value of the
    plain row sum, which vanishes for sign-cancelling rows; both are exposed
    so their effect can be compared.
    """
    mode = ScalingMode(mode)
    if mode == ScalingMode.NONE:
        return ScalingOp(np.ones(a.n), mode)
    if mode == ScalingMode.ABS_ROW_SUM:
        diag = np.bincount(a.entry_rows, weights=np.abs(a.values), minlength=a.n)
        kind = "zero row"
    else:
        diag = np.abs(np.bincount(a.entry_rows, weights=a.values, minlength=a.n))
        kind = "zero row sum"
    if np.any(diag == 0.0):
        bad = int(np.argmax(diag == 0.0))
        raise ScalingError(f"scaling failure: {kind} at row {bad}", bad)
    return ScalingOp(diag, mode)


def apply_left(s: ScalingOp, a: CsrMatrix, b) -> tuple[CsrMatrix, np.ndarray]:
    """Return ``(D^-1 A, D^-1 b)`` without touching the inputs.

    The sparsity pattern of the result is identical to that of ``a``.
    """
    if s.diag.size != a.n:
        raise ValueError(f"scaling of size {s.diag.size} does not match order {a.n}")
    b = check_vector(b, a.n, "b")
    scaled_vals = a.values / s.diag[a.entry_rows]
    scaled = CsrMatrix(a.n, a.row_ptr.copy(), a.col_idx.copy(), scaled_vals)
    return scaled, b / s.diag


def scaled_norm(s: ScalingOp, v) -> float:
    """The scaled 2-norm ``||D^-1 v||_2``."""
    v = check_vector(v, s.diag.size, "v")
    return float(np.linalg.norm(v / s.diag))

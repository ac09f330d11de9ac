"""Deterministic generator of groundwater-flavoured synthetic linear systems.

The generated coefficient matrix mimics the structure of an implicitly
coupled multi-layer aquifer plus surface-stream model:

* per layer, a five-point diffusion stencil over a rectangular grid with
  random positive conductances;
* diagonal coupling bands between vertically adjacent layers;
* an optional chain of stream unknowns, placed *first* in the ordering,
  whose rows carry a magnitude multiplier (``stream_scale``) and couple into
  the top aquifer layer.  Stream rows are both much larger and internally
  more spread in magnitude than aquifer rows, and their diagonal dominance
  margin is deliberately thin, so the unscaled matrix is badly scaled and
  ill-conditioned while row equilibration restores a benign system;
* an ``asymmetry`` knob in [0, 1] skews each conductance one-sidedly
  (convection-like).  Up to ``asymmetry = 0.5`` the matrix stays strictly
  diagonally dominant by construction.  Beyond 0.5 the stream routing turns
  upstream-weighted: stream diagonals progressively shed the surplus that
  covered their aquifer couplings, so stream rows lose dominance and the
  stream chain is stabilised only through the stream/aquifer coupling loop.
  That loop is exactly what relative-threshold incomplete factorization
  severs on the *unscaled* matrix (the aquifer-side multipliers are tiny
  next to the huge stream pivots), which reproduces the badly conditioned
  unscaled preconditioned operators seen in real integrated models.

The right-hand side is manufactured as ``b = A @ x_true`` for a seeded
random ``x_true``, so solver accuracy can be measured directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sparse import CsrMatrix, from_coo, spmv

#: Random conductance range for grid and stream edges.
CONDUCTANCE_RANGE = (1.0, 10.0)
#: Storage (diagonal excess) range for aquifer rows.
STORAGE_RANGE = (0.5, 1.5)
#: Relative diagonal-dominance margin of stream rows (kept thin on purpose).
STREAM_MARGIN = 1e-4
#: Stream-to-aquifer coupling conductance, relative to the stream row scale.
STREAM_COUPLING_REL = 0.1
#: Aquifer-side coupling conductance range (not stream-scaled).
AQUIFER_COUPLING_RANGE = (0.5, 2.0)


@dataclass
class ProblemSpec:
    """Parameters of one synthetic system."""

    grid_nx: int
    grid_ny: int
    layers: int = 1
    stream_nodes: int = 0
    stream_scale: float = 1.0
    asymmetry: float = 0.0
    seed: int = 0
    name: str = ""

    def __post_init__(self):
        if self.grid_nx < 1 or self.grid_ny < 1 or self.layers < 1:
            raise ValueError("grid dimensions and layer count must be positive")
        if self.stream_nodes < 0:
            raise ValueError("stream_nodes must be non-negative")
        if self.stream_scale <= 0.0:
            raise ValueError("stream_scale must be positive")
        if not 0.0 <= self.asymmetry <= 1.0:
            raise ValueError("asymmetry must lie in [0, 1]")

    @property
    def dimension(self) -> int:
        return self.grid_nx * self.grid_ny * self.layers + self.stream_nodes


def generate(spec: ProblemSpec) -> tuple[CsrMatrix, np.ndarray, np.ndarray]:
    """Build ``(A, b, x_true)`` for the given spec, bit-reproducibly per seed."""
    rng = np.random.default_rng(spec.seed)
    nx, ny, nl = spec.grid_nx, spec.grid_ny, spec.layers
    ns = spec.stream_nodes
    per_layer = nx * ny
    n = spec.dimension

    def gid(layer: int, iy: int, ix: int) -> int:
        return ns + layer * per_layer + iy * nx + ix

    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    diag = np.zeros(n)

    def add_edge(i: int, j: int, w: float):
        """Directed conductance contribution: off-diagonal -w, diagonal +w."""
        rows.append(i)
        cols.append(j)
        vals.append(-w)
        diag[i] += w

    lo, hi = CONDUCTANCE_RANGE
    for layer in range(nl):
        for iy in range(ny):
            for ix in range(nx):
                node = gid(layer, iy, ix)
                for jy, jx in ((iy, ix + 1), (iy + 1, ix)):
                    if jx >= nx or jy >= ny:
                        continue
                    nb = gid(layer, jy, jx)
                    w = rng.uniform(lo, hi)
                    skew = spec.asymmetry * rng.uniform(0.0, 1.0)
                    add_edge(node, nb, w * (1.0 + skew))
                    add_edge(nb, node, w * (1.0 - skew))
                if layer + 1 < nl:
                    below = gid(layer + 1, iy, ix)
                    w = rng.uniform(lo, hi)
                    skew = spec.asymmetry * rng.uniform(0.0, 1.0)
                    add_edge(node, below, w * (1.0 + skew))
                    add_edge(below, node, w * (1.0 - skew))

    storage = rng.uniform(*STORAGE_RANGE, size=per_layer * nl)

    # Stream chain (indices 0..ns-1) attached to the top layer (layer 0).
    top_targets = np.empty(ns, dtype=np.int64)
    coupling_mass = np.zeros(ns)
    if ns:
        span = max(per_layer - 1, 1)
        for j in range(ns):
            top_targets[j] = gid(0, *divmod(int(round(j * span / max(ns - 1, 1))), nx))
        for j in range(ns - 1):
            w = rng.uniform(lo, hi) * spec.stream_scale
            add_edge(j, j + 1, w)
            add_edge(j + 1, j, w)
        for j in range(ns):
            target = int(top_targets[j])
            w_stream = rng.uniform(lo, hi) * STREAM_COUPLING_REL * spec.stream_scale
            add_edge(j, target, w_stream)
            coupling_mass[j] = w_stream
            w_aquifer = rng.uniform(*AQUIFER_COUPLING_RANGE)
            add_edge(target, j, w_aquifer)

    for layer in range(nl):
        for k in range(per_layer):
            node = ns + layer * per_layer + k
            rows.append(node)
            cols.append(node)
            vals.append(diag[node] + storage[layer * per_layer + k])
    # Above asymmetry 0.5 the stream diagonals shed the surplus covering
    # their aquifer couplings (upstream-weighted routing), losing dominance.
    shed = min(1.0, max(0.0, 2.0 * (spec.asymmetry - 0.5)))
    for j in range(ns):
        chain_part = diag[j] - coupling_mass[j]
        vals.append(chain_part * (1.0 + STREAM_MARGIN)
                    + (1.0 - shed) * coupling_mass[j])
        rows.append(j)
        cols.append(j)

    a = from_coo(n, rows, cols, vals)
    _assert_diagonally_dominant(a, spec)
    x_true = rng.uniform(-1.0, 1.0, size=n)
    b = spmv(a, x_true)
    return a, b, x_true


def _assert_diagonally_dominant(a: CsrMatrix, spec: ProblemSpec) -> None:
    if spec.asymmetry > 0.5:
        return
    for i in range(a.n):
        cols_i, vals_i = a.row(i)
        on = 0.0
        off = 0.0
        for c, v in zip(cols_i, vals_i):
            if c == i:
                on = abs(v)
            else:
                off += abs(v)
        if on < off:
            raise AssertionError(f"generated row {i} is not diagonally dominant")


def spec_suite() -> list[ProblemSpec]:
    """The fixed named suite used by the acceptance tests.

    WELL is well-conditioned with no streams, SKEW adds convection skew,
    ILL6/ILL9 add badly scaled stream rows (factors 1e6 and 1e9) on top of a
    three-layer grid.  All sizes stay within the dense-oracle cap.
    """
    return [
        ProblemSpec(grid_nx=13, grid_ny=12, layers=2, stream_nodes=0,
                    stream_scale=1.0, asymmetry=0.0, seed=101, name="WELL"),
        ProblemSpec(grid_nx=13, grid_ny=12, layers=2, stream_nodes=0,
                    stream_scale=1.0, asymmetry=0.4, seed=202, name="SKEW"),
        ProblemSpec(grid_nx=10, grid_ny=10, layers=3, stream_nodes=100,
                    stream_scale=1e6, asymmetry=1.0, seed=303, name="ILL6"),
        ProblemSpec(grid_nx=10, grid_ny=10, layers=3, stream_nodes=100,
                    stream_scale=1e9, asymmetry=1.0, seed=404, name="ILL9"),
    ]


def suite_by_name(name: str) -> ProblemSpec:
    for spec in spec_suite():
        if spec.name == name.upper():
            return spec
    known = ", ".join(s.name for s in spec_suite())
    raise KeyError(f"unknown suite member {name!r} (known: {known})")

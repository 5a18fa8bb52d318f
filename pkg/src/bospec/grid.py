"""Truncated tensor-product grids and the sparse symmetric discretization of
-h^2 Lap_x - Lap_y + V with Dirichlet boundary conditions.

Interior nodes along a dimension with half-width L and N points sit at
-L + (i+1)*delta, delta = 2L/(N+1).  The flat index map is lexicographic with
the x-dimensions varying fastest: index = i_0 + N_0*(i_1 + N_1*(...)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .potential import Potential

__all__ = [
    "Grid",
    "GridOperator",
    "build_grid",
    "assemble_hamiltonian",
    "kinetic_operator",
    "matvec",
    "restrict",
    "export_matrix",
    "laplacian_1d",
]

DEFAULT_SIZE_CAP = 2_000_000
DEFAULT_H_MAX = 1.0


@dataclass(frozen=True)
class Grid:
    n: int
    p: int
    half_widths: tuple
    points: tuple

    @property
    def dim(self) -> int:
        return self.n + self.p

    @property
    def spacing(self) -> tuple:
        return tuple(2 * l / (m + 1) for l, m in zip(self.half_widths, self.points))

    @property
    def size(self) -> int:
        return math.prod(self.points)

    def axis_coords(self, d: int) -> np.ndarray:
        l, m = self.half_widths[d], self.points[d]
        delta = 2 * l / (m + 1)
        return -l + delta * np.arange(1, m + 1)

    def node_coords(self) -> np.ndarray:
        """(size, dim) coordinates in flat-index order (dimension 0 fastest)."""
        axes = [self.axis_coords(d) for d in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel(order="F") for m in mesh], axis=1)

    def node_radii(self) -> np.ndarray:
        return np.linalg.norm(self.node_coords(), axis=1)

    def signature(self) -> str:
        import hashlib

        key = repr((self.n, self.p, self.half_widths, self.points))
        return hashlib.sha256(key.encode()).hexdigest()[:16]


def build_grid(n: int, p: int, half_widths, points,
               size_cap: int = DEFAULT_SIZE_CAP) -> Grid:
    if n < 1 or p < 0:
        raise ValueError(f"need n >= 1 and p >= 0, got n={n}, p={p}")
    half_widths = tuple(float(l) for l in half_widths)
    points = tuple(int(m) for m in points)
    if len(half_widths) != n + p or len(points) != n + p:
        raise ValueError(f"need {n + p} half-widths and point counts")
    if any(l <= 0 for l in half_widths):
        raise ValueError("half-widths must be positive")
    if any(m < 3 for m in points):
        raise ValueError("need at least 3 interior points per dimension")
    total = math.prod(points)
    if total > size_cap:
        raise ValueError(f"grid size {total} exceeds cap {size_cap}")
    return Grid(n=n, p=p, half_widths=half_widths, points=points)


def laplacian_1d(m: int, delta: float) -> sp.csr_matrix:
    """Second-order central-difference -d^2/dx^2 with Dirichlet truncation."""
    main = np.full(m, 2.0 / delta**2)
    off = np.full(m - 1, -1.0 / delta**2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def _lift(grid: Grid, mat: sp.spmatrix, d: int) -> sp.csr_matrix:
    """Embed a 1D operator acting on dimension d into the full tensor space."""
    acc = sp.identity(1, format="csr")
    for j in reversed(range(grid.dim)):
        factor = mat if j == d else sp.identity(grid.points[j], format="csr")
        acc = sp.kron(acc, factor, format="csr")
    return acc


def kinetic_operator(grid: Grid, h: float) -> sp.csr_matrix:
    """-h^2 Lap_x - Lap_y on the grid (x-dimension stencils scaled by h^2)."""
    spacing = grid.spacing
    total = sp.csr_matrix((grid.size, grid.size))
    for d in range(grid.dim):
        weight = h * h if d < grid.n else 1.0
        total = total + weight * _lift(grid, laplacian_1d(grid.points[d], spacing[d]), d)
    return total.tocsr()


@dataclass(frozen=True, eq=False)
class GridOperator:
    grid: Grid
    h: float
    matrix: sp.csr_matrix
    kinetic: sp.csr_matrix
    potential: Potential
    potential_values: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def assemble_hamiltonian(grid: Grid, pot: Potential, h: float,
                         h_max: float = DEFAULT_H_MAX) -> GridOperator:
    if pot.n != grid.n or pot.p != grid.p:
        raise ValueError(
            f"potential dims ({pot.n},{pot.p}) do not match grid ({grid.n},{grid.p})")
    if not 0 < h <= h_max:
        raise ValueError(f"h must lie in (0, {h_max}], got {h}")
    kin = kinetic_operator(grid, h)
    vvals = pot.evaluate_many(grid.node_coords())
    mat = (kin + sp.diags(vvals)).tocsr()
    mat.sum_duplicates()
    return GridOperator(grid=grid, h=h, matrix=mat, kinetic=kin,
                        potential=pot, potential_values=vvals)


def matvec(op: GridOperator, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    if v.shape != (op.dim,):
        raise ValueError(f"vector has shape {v.shape}, expected ({op.dim},)")
    return op.matrix @ v


def restrict(v: np.ndarray, grid: Grid, radius: float) -> np.ndarray:
    """Multiply by the characteristic function of the ball B(0, radius)."""
    v = np.asarray(v)
    if v.shape != (grid.size,):
        raise ValueError(f"vector has shape {v.shape}, expected ({grid.size},)")
    if radius <= 0:
        raise ValueError("radius must be positive")
    return np.where(grid.node_radii() <= radius, v, 0.0 * v)


def export_matrix(matrix: sp.spmatrix, path) -> None:
    """Coordinate-triplet text export: header 'dimension nnz', then row col value."""
    coo = sp.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"{coo.shape[0]} {coo.nnz}\n")
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")

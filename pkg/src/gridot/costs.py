"""Ground costs and coarse-level cost matrices.

The ground cost between grid points is ``rho(x, y)**p`` for the Euclidean
metric rho.  Fine-scale cost matrices are never stored whole; callers
evaluate blocks on demand.  At the coarse scale three cost matrices appear:

* ``center_cost_matrix``: costs between block centers.
* ``weighted_cost_matrix``: the marginally weighted block average of the
  fine costs; transporting coarse masses under it is provably at least as
  expensive as the optimal fine transport.
* ``min_cost_matrix``: the minimum fine cost between any two points of a
  block pair, which makes coarse transport provably cheaper than fine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionMismatchError, GridMismatchError
from .measures import (
    CoarseningSpec,
    GridMeasure,
    GridSpec,
    block_index_map,
    coarsen_grid,
    coarsen_measure,
    pad_measure,
)

__all__ = [
    "CostSpec",
    "CoarseCostMatrix",
    "pairwise_costs",
    "ground_cost",
    "center_cost_matrix",
    "weighted_cost_matrix",
    "min_cost_matrix",
]


def pairwise_costs(xa: np.ndarray, xb: np.ndarray, p: float, metric: str = "l2") -> np.ndarray:
    """Cost block ``rho(xa_i, xb_j)**p`` for point arrays of shape (*, d)."""
    if metric != "l2":
        raise ValueError(f"unsupported metric {metric!r}")
    sq = cdist(xa, xb, metric="sqeuclidean")
    if p == 2.0:
        return sq
    if p == 1.0:
        return np.sqrt(sq)
    return sq ** (p / 2.0)


@dataclass(frozen=True, eq=False)
class CostSpec:
    """Ground cost between two point clouds, evaluated lazily.

    ``source`` and ``target`` are (n, d) coordinate arrays; the cost of a
    pair is ``rho(source[i], target[j])**p``.
    """

    source: np.ndarray
    target: np.ndarray
    p: float
    metric: str = "l2"

    def __post_init__(self):
        src = np.ascontiguousarray(self.source, dtype=np.float64)
        dst = np.ascontiguousarray(self.target, dtype=np.float64)
        if src.ndim != 2 or dst.ndim != 2 or src.shape[1] != dst.shape[1]:
            raise DimensionMismatchError(
                f"coordinate arrays must be (n, d) with matching d, "
                f"got {src.shape} and {dst.shape}"
            )
        if self.metric != "l2":
            raise ValueError(f"unsupported metric {self.metric!r}")
        if not self.p >= 1.0:
            raise ValueError(f"p must be >= 1, got {self.p}")
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "target", dst)
        object.__setattr__(self, "p", float(self.p))

    @property
    def n_source(self) -> int:
        return self.source.shape[0]

    @property
    def n_target(self) -> int:
        return self.target.shape[0]

    def block(self, rows, cols) -> np.ndarray:
        """Cost sub-matrix for the given row and column index arrays."""
        return pairwise_costs(self.source[rows], self.target[cols], self.p)

    def full(self) -> np.ndarray:
        """The dense cost matrix.  Only sensible for moderate sizes."""
        return pairwise_costs(self.source, self.target, self.p)


def ground_cost(spec: CostSpec, i: int, j: int) -> float:
    """Single cost entry ``rho(source[i], target[j])**p``."""
    diff = spec.source[i] - spec.target[j]
    return float(np.dot(diff, diff) ** (spec.p / 2.0))


@dataclass(frozen=True, eq=False)
class CoarseCostMatrix:
    """A dense coarse-level cost matrix.

    ``unused`` flags entries whose value is a filler (no mass on that block
    pair); they do not influence transport but keep the matrix total.
    """

    kind: str
    values: np.ndarray
    unused: np.ndarray | None = None


def center_cost_matrix(
    src_centers: np.ndarray, dst_centers: np.ndarray, p: float
) -> CoarseCostMatrix:
    """Costs between coarse block centers."""
    return CoarseCostMatrix("center", pairwise_costs(src_centers, dst_centers, p))


def weighted_cost_matrix(
    mu: GridMeasure, nu: GridMeasure, coarsening: CoarseningSpec, p: float
) -> CoarseCostMatrix:
    """Marginally weighted coarse costs.

    Entry (k, l) is the average fine cost between blocks k and l under the
    product weighting mu x nu:

        (1 / (mu(X_k) nu(Y_l))) * sum_{x in X_k, y in Y_l} rho(x, y)**p mu(x) nu(y)

    Block pairs with zero marginal product get the center cost as filler and
    are flagged in ``unused``.
    """
    if mu.grid != nu.grid:
        raise GridMismatchError(f"grids differ: {mu.grid.dims} vs {nu.grid.dims}")
    mu_p = pad_measure(mu, coarsening)
    nu_p = pad_measure(nu, coarsening)
    padded_grid = mu_p.grid
    coords = padded_grid.coordinates()
    blocks = block_index_map(padded_grid, coarsening)
    n_coarse = int(np.prod(coarsening.coarse_dims(mu.grid)))

    # permutation grouping fine cells by their coarse block, block-contiguous
    order = np.argsort(blocks, kind="stable")
    cells_per_block = padded_grid.cell_count // n_coarse

    numer = np.empty((n_coarse, n_coarse), dtype=np.float64)
    col_coords = coords[order]
    col_mass = nu_p.mass[order]
    for k in range(n_coarse):
        rows = order[k * cells_per_block : (k + 1) * cells_per_block]
        blk = pairwise_costs(coords[rows], col_coords, p)
        blk *= mu_p.mass[rows][:, None]
        blk *= col_mass[None, :]
        numer[k] = blk.sum(axis=0).reshape(n_coarse, cells_per_block).sum(axis=1)

    mu_c = coarsen_measure(mu, coarsening).mass
    nu_c = coarsen_measure(nu, coarsening).mass
    denom = mu_c[:, None] * nu_c[None, :]
    unused = denom == 0.0
    centers = coarsen_grid(mu.grid, coarsening)
    values = np.where(unused, pairwise_costs(centers, centers, p), 0.0)
    np.divide(numer, denom, out=values, where=~unused)
    return CoarseCostMatrix("weighted", values, unused)


def min_cost_matrix(grid: GridSpec, coarsening: CoarseningSpec, p: float) -> CoarseCostMatrix:
    """Minimum fine cost between block pairs, in closed form.

    Blocks are axis-aligned cubes, so the minimum distance separates along
    each axis independently: for blocks at coarse positions k, l the gap is
    ``max(0, kappa |k - l| - (kappa - 1))`` per axis and the cost is the
    Euclidean combination raised to p.
    """
    k = coarsening.kappa
    coarse = coarsening.coarse_dims(grid)
    count = int(np.prod(coarse))
    idx = np.unravel_index(np.arange(count), coarse, order="F")
    pos = np.stack(idx, axis=1).astype(np.float64)
    sq = np.zeros((count, count), dtype=np.float64)
    for a in range(len(coarse)):
        gap = k * np.abs(pos[:, a][:, None] - pos[:, a][None, :]) - (k - 1)
        np.maximum(gap, 0.0, out=gap)
        sq += gap * gap
    return CoarseCostMatrix("min", sq ** (p / 2.0))

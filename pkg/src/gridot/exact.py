"""Exact optimal transport on explicit supports.

``solve_transport`` runs a network simplex on a dense cost matrix and
returns the optimal coupling, the dual potentials, and the optimal value.
Two deliberately independent reference computations exist for validating
it: ``hungarian_oracle`` (unit-mass splitting plus an assignment solve) and
``wasserstein_1d`` (the closed-form quantile formula on a line).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import _simplex
from .costs import pairwise_costs
from .errors import (
    DimensionMismatchError,
    GridMismatchError,
    GridotError,
    IterationLimitError,
    QuantizationResidualError,
    UnbalancedError,
)
from .measures import GridMeasure

__all__ = [
    "TransportProblem",
    "SparseCoupling",
    "DualPotentials",
    "build_transport_problem",
    "grid_transport_problem",
    "solve_transport",
    "hungarian_oracle",
    "wasserstein_1d",
]

logger = logging.getLogger(__name__)

REBALANCE_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class TransportProblem:
    """A balanced transport instance restricted to positive supports.

    ``src_index`` and ``dst_index`` map the rows and columns of ``cost``
    back to cell indices of the originating grids.
    """

    supply: np.ndarray
    demand: np.ndarray
    cost: np.ndarray
    src_index: np.ndarray
    dst_index: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.cost.shape


@dataclass(frozen=True, eq=False)
class SparseCoupling:
    """A coupling stored as (row, col, mass) triples with positive masses."""

    row: np.ndarray
    col: np.ndarray
    mass: np.ndarray
    shape: tuple[int, int]

    def row_marginal(self) -> np.ndarray:
        return np.bincount(self.row, weights=self.mass, minlength=self.shape[0])

    def col_marginal(self) -> np.ndarray:
        return np.bincount(self.col, weights=self.mass, minlength=self.shape[1])

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.mass))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.float64)
        out[self.row, self.col] = self.mass
        return out


@dataclass(frozen=True, eq=False)
class DualPotentials:
    """Optimal dual potentials with f[0] = 0 and their feasibility slack.

    ``feasibility_slack`` is ``min_ij (C_ij - f_i - g_j)``; admissibility
    means it is nonnegative up to solver tolerance.
    """

    f: np.ndarray
    g: np.ndarray
    feasibility_slack: float


def _rebalance(supply: np.ndarray, demand: np.ndarray) -> None:
    """Absorb rounding drift between totals into the smaller side, in place."""
    diff = float(supply.sum() - demand.sum())
    if diff == 0.0:
        return
    if abs(diff) > REBALANCE_TOLERANCE:
        raise UnbalancedError(
            f"total masses differ by {diff:.3e}, beyond {REBALANCE_TOLERANCE:.0e}"
        )
    if diff > 0:
        demand[int(np.argmax(demand))] += diff
    else:
        supply[int(np.argmax(supply))] -= diff


def build_transport_problem(
    supply: np.ndarray, demand: np.ndarray, cost: np.ndarray
) -> TransportProblem:
    """Restrict to positive entries and rebalance totals.

    ``cost`` is the dense matrix over the unrestricted index ranges; rows
    and columns of zero-mass entries are dropped.
    """
    supply = np.asarray(supply, dtype=np.float64)
    demand = np.asarray(demand, dtype=np.float64)
    src_index = np.nonzero(supply > 0.0)[0]
    dst_index = np.nonzero(demand > 0.0)[0]
    if src_index.size == 0 or dst_index.size == 0:
        raise GridotError("transport needs nonempty supports on both sides")
    sup = supply[src_index].copy()
    dem = demand[dst_index].copy()
    _rebalance(sup, dem)
    sub = np.ascontiguousarray(cost[np.ix_(src_index, dst_index)], dtype=np.float64)
    return TransportProblem(sup, dem, sub, src_index, dst_index)


def grid_transport_problem(
    mu: GridMeasure, nu: GridMeasure, p: float, metric: str = "l2"
) -> TransportProblem:
    """Fine-scale instance between two grid measures under rho**p costs."""
    mu_idx = mu.support
    nu_idx = nu.support
    if mu_idx.size == 0 or nu_idx.size == 0:
        raise GridotError("transport needs nonempty supports on both sides")
    sup = mu.mass[mu_idx].copy()
    dem = nu.mass[nu_idx].copy()
    _rebalance(sup, dem)
    cost = pairwise_costs(
        mu.grid.coordinates()[mu_idx], nu.grid.coordinates()[nu_idx], p, metric
    )
    return TransportProblem(sup, dem, cost, mu_idx, nu_idx)


def solve_transport(
    problem: TransportProblem,
    tol: float = 1e-10,
    max_pivots: int | None = None,
) -> tuple[SparseCoupling, DualPotentials, float]:
    """Solve to optimality by network simplex.

    Returns the optimal coupling (positive basic flows only, at most
    ns + nt - 1 triples), dual potentials admissible up to ``tol``, and the
    optimal cost value.  Raises IterationLimitError if the pivot cap of
    ``50 * (ns + nt)**2`` is hit first.
    """
    status, bi, bj, bf, u, v, pivots = _simplex.transport_simplex(
        problem.cost, problem.supply, problem.demand, max_pivots=max_pivots, tol=tol
    )
    if status == _simplex.STATUS_PIVOT_LIMIT:
        raise IterationLimitError(f"pivot cap reached after {pivots} pivots")
    if status != _simplex.STATUS_OPTIMAL:
        raise GridotError(f"simplex failed with status {status}")
    keep = bf > 0.0
    coupling = SparseCoupling(
        row=bi[keep].copy(),
        col=bj[keep].copy(),
        mass=bf[keep].copy(),
        shape=problem.shape,
    )
    value = float(np.sum(bf * problem.cost[bi, bj]))
    slack = float(np.min(problem.cost - u[:, None] - v[None, :]))
    duals = DualPotentials(f=u, g=v, feasibility_slack=slack)
    logger.debug(
        "simplex: %dx%d support, %d pivots, value %.12g, slack %.3g",
        problem.shape[0], problem.shape[1], pivots, value, slack,
    )
    return coupling, duals, value


# ---------------------------------------------------------------------------
# Independent references
# ---------------------------------------------------------------------------


def hungarian_oracle(problem: TransportProblem, denom: int) -> float:
    """Exact value by unit splitting and an assignment solve.

    Every mass must be an exact multiple of 1/denom; each support point is
    split into that many unit points and the resulting square assignment
    problem is solved exactly.  Intended for small instances only: the
    assignment has ``total_mass * denom`` points per side.
    """
    counts_s = problem.supply * denom
    counts_d = problem.demand * denom
    rs = np.abs(counts_s - np.round(counts_s))
    rd = np.abs(counts_d - np.round(counts_d))
    if rs.max() > 1e-9 or rd.max() > 1e-9:
        worst = float(max(rs.max(), rd.max()))
        raise QuantizationResidualError(
            f"masses are not multiples of 1/{denom} (residual {worst:.3e})"
        )
    ks = np.round(counts_s).astype(np.int64)
    kd = np.round(counts_d).astype(np.int64)
    if ks.sum() != kd.sum():
        raise UnbalancedError(
            f"unit counts differ: {int(ks.sum())} vs {int(kd.sum())}"
        )
    src_units = np.repeat(np.arange(ks.size), ks)
    dst_units = np.repeat(np.arange(kd.size), kd)
    unit_cost = problem.cost[np.ix_(src_units, dst_units)]
    rows, cols = linear_sum_assignment(unit_cost)
    return float(unit_cost[rows, cols].sum()) / denom


def wasserstein_1d(mu: GridMeasure, nu: GridMeasure, p: float) -> float:
    """Closed-form Wasserstein-p distance on a 1-dimensional grid.

    For p = 1 this is the integral of |F_mu - F_nu| over the line.  For
    general p, mass quantiles of the two measures are swept in lockstep and
    each mass sliver pays the p-th power of its transport distance.
    """
    if mu.grid.ndim != 1 or nu.grid.ndim != 1:
        raise DimensionMismatchError("wasserstein_1d needs 1-dimensional grids")
    if mu.grid != nu.grid:
        raise GridMismatchError(f"grids differ: {mu.grid.dims} vs {nu.grid.dims}")
    if abs(mu.total_mass - nu.total_mass) > 1e-9:
        raise UnbalancedError(
            f"total masses differ: {mu.total_mass!r} vs {nu.total_mass!r}"
        )
    cm = np.cumsum(mu.mass)
    cn = np.cumsum(nu.mass)
    if p == 1.0:
        return float(np.sum(np.abs(cm - cn)))
    n = mu.grid.cell_count
    pos = np.arange(1, n + 1, dtype=np.float64)
    levels = np.union1d(cm, cn)
    dq = np.diff(np.concatenate(([0.0], levels)))
    iu = np.minimum(np.searchsorted(cm, levels, side="left"), n - 1)
    iv = np.minimum(np.searchsorted(cn, levels, side="left"), n - 1)
    work = float(np.sum(dq * np.abs(pos[iu] - pos[iv]) ** p))
    return work ** (1.0 / p)

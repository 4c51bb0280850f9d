"""Entropic-regularization bounds via iterative proportional fitting.

Both bounds run the same alternating scaling iteration on the Gibbs
kernel ``K = exp(-C / epsilon)`` and stop once the L1 marginal drift
falls below ``xi``.  The lower bound reads admissible dual potentials
off the scaling vectors, so it is valid after any number of full
sweeps; the upper bound prices the fitted coupling and pays for the
remaining marginal drift with weighted total-variation corrections, so
it too holds whether or not the iteration converged.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import aslinearoperator
from scipy.special import logsumexp

from .costs import CostSpec
from .errors import (
    DimensionMismatchError,
    GridMismatchError,
    KernelSizeError,
    NumericOverflowError,
    UnbalancedError,
    ZeroDenominatorError,
)
from .measures import GridMeasure, tv_weights, weighted_tv
from .reports import BoundReport, signed_root

logger = logging.getLogger(__name__)

# Dense Gibbs kernels are only materialized for grids up to this many
# cells; larger problems should go through the quantization bounds.
MAX_KERNEL_CELLS = 1 << 16

# Plain scaling is abandoned for the log-domain iteration as soon as a
# scaling vector leaves this range.
SCALE_FLOOR = 1e-100
SCALE_CEIL = 1e100


@dataclass(frozen=True)
class RegularizationParams:
    """Knobs of the entropic bounds.

    ``epsilon`` is the regularization strength in cost units (callers
    working on an N-grid typically pass a multiple of N**p).  ``xi`` is
    the L1 marginal-drift threshold; ``None`` selects 1e-9 times the
    number of support points of the measure pair.
    """

    epsilon: float
    xi: float | None = None
    max_iter: int = 10_000

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.xi is not None and not self.xi > 0.0:
            raise ValueError(f"xi must be positive, got {self.xi}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")

    def resolve_xi(self, support_points: int) -> float:
        return self.xi if self.xi is not None else 1e-9 * support_points


@dataclass
class IpfState:
    """Final state of a scaling run.

    ``marginal_gap`` is ``||a*(Kb) - mu||_1 + ||nu - b*(K^T a)||_1``
    evaluated with the returned vectors; ``converged`` records whether
    it dropped below the requested threshold within ``max_iter`` sweeps.
    """

    a: np.ndarray
    b: np.ndarray
    iterations: int
    marginal_gap: float
    converged: bool


def _check_scale_range(vec: np.ndarray, label: str) -> None:
    positive = vec[vec > 0.0]
    if positive.size == 0:
        return
    lo = float(positive.min())
    hi = float(positive.max())
    if lo < SCALE_FLOOR or hi > SCALE_CEIL or not np.isfinite(hi):
        raise NumericOverflowError(
            f"scaling vector {label} left [{SCALE_FLOOR:g}, {SCALE_CEIL:g}]: "
            f"range [{lo:.3g}, {hi:.3g}]"
        )


def ipf_fit(kernel_apply, mu: np.ndarray, nu: np.ndarray, xi: float,
            max_iter: int = 10_000) -> IpfState:
    """Fit ``diag(a) K diag(b)`` to the marginals (mu, nu).

    ``kernel_apply`` may be a dense array, a scipy sparse matrix, or any
    LinearOperator-compatible object; only forward and transpose
    matrix-vector products are used.  One full sweep updates ``a`` from
    the row marginals, then ``b`` from the column marginals; at least
    one sweep always runs.

    Raises ZeroDenominatorError when the kernel puts zero mass on a cell
    with a positive marginal (the fit is infeasible on this support),
    and NumericOverflowError when a scaling vector leaves the
    representable working range.
    """
    op = aslinearoperator(kernel_apply)
    mu = np.asarray(mu, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    b = np.ones_like(nu)
    kb = op.matvec(b)
    a = np.zeros_like(mu)
    kta = np.zeros_like(nu)
    gap = np.inf
    for it in range(1, max_iter + 1):
        if np.any((kb <= 0.0) & (mu > 0.0)):
            raise ZeroDenominatorError(
                "kernel row support cannot reach a positive source marginal"
            )
        a = np.divide(mu, kb, out=np.zeros_like(mu), where=kb > 0.0)
        kta = op.rmatvec(a)
        if np.any((kta <= 0.0) & (nu > 0.0)):
            raise ZeroDenominatorError(
                "kernel column support cannot reach a positive target marginal"
            )
        b = np.divide(nu, kta, out=np.zeros_like(nu), where=kta > 0.0)
        kb = op.matvec(b)
        _check_scale_range(a, "a")
        _check_scale_range(b, "b")
        gap = float(np.abs(a * kb - mu).sum() + np.abs(nu - b * kta).sum())
        if gap < xi:
            return IpfState(a=a, b=b, iterations=it, marginal_gap=gap, converged=True)
    return IpfState(a=a, b=b, iterations=max_iter, marginal_gap=gap, converged=False)


# ---------------------------------------------------------------------------
# Scaling in the log domain
# ---------------------------------------------------------------------------


def _log_domain_scaling(cost: np.ndarray, mu: np.ndarray, nu: np.ndarray,
                        epsilon: float, xi: float, max_iter: int):
    """Same iteration as ipf_fit on exp(-C/eps), carried out on potentials.

    Requires strictly positive marginals (callers restrict to supports).
    Returns (f, g, iterations, marginal_gap, converged) with the duals
    f = eps*log(a), g = eps*log(b) produced directly.
    """
    log_mu = np.log(mu)
    log_nu = np.log(nu)
    g = np.zeros_like(nu)
    lkb = logsumexp((g[None, :] - cost) / epsilon, axis=1)
    f = np.zeros_like(mu)
    gap = np.inf
    converged = False
    iterations = max_iter
    for it in range(1, max_iter + 1):
        f = epsilon * (log_mu - lkb)
        lkta = logsumexp((f[:, None] - cost) / epsilon, axis=0)
        g = epsilon * (log_nu - lkta)
        lkb = logsumexp((g[None, :] - cost) / epsilon, axis=1)
        mu_hat = np.exp(f / epsilon + lkb)
        nu_hat = np.exp(g / epsilon + lkta)
        gap = float(np.abs(mu_hat - mu).sum() + np.abs(nu - nu_hat).sum())
        if gap < xi:
            converged = True
            iterations = it
            break
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
        raise NumericOverflowError("log-domain potentials are not finite")
    return f, g, iterations, gap, converged


def _run_scaling(cost: np.ndarray, mu: np.ndarray, nu: np.ndarray,
                 epsilon: float, xi: float, max_iter: int):
    """Plain scaling first; log-domain restart if the kernel under/overflows."""
    try:
        kernel = np.exp(-cost / epsilon)
        state = ipf_fit(kernel, mu, nu, xi, max_iter)
        f = epsilon * np.log(state.a)
        g = epsilon * np.log(state.b)
        return f, g, state.iterations, state.marginal_gap, state.converged
    except (ZeroDenominatorError, NumericOverflowError) as exc:
        # The kernel is positive by construction, so either failure mode
        # means floating-point under/overflow at this epsilon.
        logger.info("plain scaling failed (%s); restarting in log domain", exc)
        return _log_domain_scaling(cost, mu, nu, epsilon, xi, max_iter)


# ---------------------------------------------------------------------------
# The two bounds
# ---------------------------------------------------------------------------


def _prepare_pair(mu: GridMeasure, nu: GridMeasure, cost: CostSpec):
    if mu.grid != nu.grid:
        raise GridMismatchError(f"grids differ: {mu.grid.dims} vs {nu.grid.dims}")
    n = mu.grid.cell_count
    if cost.n_source != n or cost.n_target != n:
        raise DimensionMismatchError(
            f"cost is {cost.n_source}x{cost.n_target} but the grid has {n} cells"
        )
    if n > MAX_KERNEL_CELLS:
        raise KernelSizeError(
            f"dense kernel refused for {n} cells (cap {MAX_KERNEL_CELLS}); "
            "use the quantization bounds at this scale"
        )
    if abs(mu.total_mass - nu.total_mass) > 1e-9:
        raise UnbalancedError(
            f"total masses differ: {mu.total_mass!r} vs {nu.total_mass!r}"
        )
    src = mu.support
    dst = nu.support
    return src, dst, mu.mass[src], nu.mass[dst], cost.block(src, dst)


def reg_lower_bound(mu: GridMeasure, nu: GridMeasure, cost: CostSpec,
                    params: RegularizationParams) -> BoundReport:
    """Lower bound from the duals of the entropic fit.

    After each full sweep the potentials f = eps*log(a), g = eps*log(b)
    are jointly admissible for the unregularized dual, so the value
    ``(<f, mu> + <g, nu>)**(1/p)`` never exceeds the true distance.  A
    negative dual value is kept in ``raw_value`` and clipped to 0 in
    ``value``.
    """
    start = time.perf_counter()
    src, dst, mu_s, nu_s, cost_block = _prepare_pair(mu, nu, cost)
    xi = params.resolve_xi(src.size + dst.size)
    f, g, iterations, gap, converged = _run_scaling(
        cost_block, mu_s, nu_s, params.epsilon, xi, params.max_iter
    )
    dual_value = float(f @ mu_s + g @ nu_s)
    raw = signed_root(dual_value, cost.p)
    return BoundReport(
        method="reg_lower",
        value=max(0.0, raw),
        raw_value=raw,
        components={
            "dual_value": dual_value,
            "marginal_gap": gap,
            "converged": float(converged),
        },
        wall_time=time.perf_counter() - start,
        iterations=iterations,
    )


def reg_upper_bound(mu: GridMeasure, nu: GridMeasure, cost: CostSpec,
                    params: RegularizationParams) -> BoundReport:
    """Upper bound from the fitted entropic coupling plus drift corrections.

    Prices the coupling ``P = exp((f + g - C) / eps)`` and adds weighted
    total-variation corrections for the gap between P's actual marginals
    and (mu, nu), so the result dominates the true distance at any
    iteration count.
    """
    start = time.perf_counter()
    src, dst, mu_s, nu_s, cost_block = _prepare_pair(mu, nu, cost)
    xi = params.resolve_xi(src.size + dst.size)
    f, g, iterations, gap, converged = _run_scaling(
        cost_block, mu_s, nu_s, params.epsilon, xi, params.max_iter
    )
    plan = np.exp((f[:, None] + g[None, :] - cost_block) / params.epsilon)
    transport = float(np.sum(plan * cost_block)) ** (1.0 / cost.p)

    n = mu.grid.cell_count
    mu_hat = np.zeros(n)
    mu_hat[src] = plan.sum(axis=1)
    nu_hat = np.zeros(n)
    nu_hat[dst] = plan.sum(axis=0)
    weights = tv_weights(mu.grid, cost.p)
    delta_mu = weighted_tv(GridMeasure(mu.grid, mu_hat), mu, weights, cost.p)
    delta_nu = weighted_tv(GridMeasure(nu.grid, nu_hat), nu, weights, cost.p)

    value = transport + delta_mu + delta_nu
    return BoundReport(
        method="reg_upper",
        value=value,
        raw_value=value,
        components={
            "transport": transport,
            "delta_mu": delta_mu,
            "delta_nu": delta_nu,
            "marginal_gap": gap,
            "converged": float(converged),
        },
        wall_time=time.perf_counter() - start,
        iterations=iterations,
    )

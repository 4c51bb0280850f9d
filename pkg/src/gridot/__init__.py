"""Certified upper and lower bounds on Wasserstein distances between grid measures.

The package computes the exact Wasserstein-p distance between discrete
measures on d-dimensional regular grids with a network-simplex solver,
and, for problems where the exact solve is too expensive, strict upper
and lower bounds obtained either from a coarsened exact solve
(quantization bounds) or from entropic regularization with explicit
correction terms.
"""

from __future__ import annotations

from .costs import (
    CoarseCostMatrix,
    CostSpec,
    center_cost_matrix,
    ground_cost,
    min_cost_matrix,
    pairwise_costs,
    weighted_cost_matrix,
)
from .errors import (
    DimensionMismatchError,
    GridFormatError,
    GridMismatchError,
    GridotError,
    IterationLimitError,
    KernelSizeError,
    NegativeMassError,
    NumericOverflowError,
    QuantizationResidualError,
    UnbalancedError,
    ZeroDenominatorError,
    ZeroTotalMassError,
)
from .exact import (
    DualPotentials,
    SparseCoupling,
    TransportProblem,
    build_transport_problem,
    grid_transport_problem,
    hungarian_oracle,
    solve_transport,
    wasserstein_1d,
)
from .measures import (
    CoarseningSpec,
    GridMeasure,
    GridSpec,
    block_index_map,
    coarsen_grid,
    coarsen_measure,
    dump_grid_measure,
    load_grid_measure,
    normalize,
    pad_measure,
    tv_weights,
    weighted_tv,
)
from .quantized import (
    UpscaleKernel,
    c_transform,
    dual_upscaling_lower_bound,
    interpolate_potential,
    min_cost_lower_bound,
    primal_upscaling_upper_bound,
    upscale_coupling,
    weighted_cost_upper_bound,
)
from .reports import BoundReport, signed_root
from .sinkhorn import (
    IpfState,
    RegularizationParams,
    ipf_fit,
    reg_lower_bound,
    reg_upper_bound,
)

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "CoarseCostMatrix",
    "CoarseningSpec",
    "CostSpec",
    "DimensionMismatchError",
    "DualPotentials",
    "GridFormatError",
    "GridMeasure",
    "GridMismatchError",
    "GridSpec",
    "GridotError",
    "IpfState",
    "IterationLimitError",
    "KernelSizeError",
    "NegativeMassError",
    "NumericOverflowError",
    "QuantizationResidualError",
    "RegularizationParams",
    "SparseCoupling",
    "TransportProblem",
    "UnbalancedError",
    "UpscaleKernel",
    "ZeroDenominatorError",
    "ZeroTotalMassError",
    "block_index_map",
    "build_transport_problem",
    "c_transform",
    "center_cost_matrix",
    "coarsen_grid",
    "coarsen_measure",
    "dual_upscaling_lower_bound",
    "dump_grid_measure",
    "grid_transport_problem",
    "ground_cost",
    "hungarian_oracle",
    "interpolate_potential",
    "ipf_fit",
    "load_grid_measure",
    "min_cost_lower_bound",
    "min_cost_matrix",
    "normalize",
    "pad_measure",
    "pairwise_costs",
    "primal_upscaling_upper_bound",
    "reg_lower_bound",
    "reg_upper_bound",
    "signed_root",
    "solve_transport",
    "tv_weights",
    "upscale_coupling",
    "wasserstein_1d",
    "weighted_cost_matrix",
    "weighted_cost_upper_bound",
    "weighted_tv",
]

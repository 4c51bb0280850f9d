"""Benchmark harness and command-line entry point.

Two subcommands:

* ``bench`` generates synthetic measure pairs, runs the requested
  method matrix against the exact baseline, and writes one CSV row per
  (pair, method, parameter).
* ``dist`` evaluates a single method on two measures loaded from GRID
  files and prints one CSV row to standard output.

Exit codes: 0 success, 1 validation error, 2 method failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .costs import CostSpec
from .errors import GridotError
from .exact import grid_transport_problem, solve_transport
from .measures import GridMeasure, GridSpec, load_grid_measure, normalize
from .quantized import (
    dual_upscaling_lower_bound,
    min_cost_lower_bound,
    primal_upscaling_upper_bound,
    weighted_cost_upper_bound,
)
from .sinkhorn import MAX_KERNEL_CELLS, RegularizationParams, reg_lower_bound, reg_upper_bound

logger = logging.getLogger(__name__)

GENERATOR_CLASSES = ("gaussians", "shapes", "noise")
QUANT_METHODS = ("weighted_cost", "min_cost", "primal_upscaling", "dual_upscaling")
REG_METHODS = ("reg_lower", "reg_upper")
LOWER_METHODS = frozenset({"min_cost", "dual_upscaling", "reg_lower"})
ALL_METHODS = ("exact",) + QUANT_METHODS + REG_METHODS

CSV_COLUMNS = (
    "pair", "method", "p", "param", "bound", "exact",
    "rel_error", "wall_time", "rel_time", "error",
)


class CliValidationError(GridotError):
    """Bad command-line arguments or configuration."""


# ---------------------------------------------------------------------------
# Synthetic measures
# ---------------------------------------------------------------------------


def gen_synthetic(kind: str, n: int, d: int, seed) -> GridMeasure:
    """Deterministic synthetic measure on the [n]^d grid.

    ``gaussians`` mixes 1-3 isotropic blobs (full support), ``shapes``
    stacks 1-3 filled rectangles or disks on a zero background, and
    ``noise`` draws a positive uniform field.  ``seed`` is anything
    numpy's default_rng accepts.
    """
    if n < 4:
        raise CliValidationError(f"generator needs n >= 4, got {n}")
    if d < 1:
        raise CliValidationError(f"generator needs d >= 1, got {d}")
    if kind not in GENERATOR_CLASSES:
        raise CliValidationError(
            f"unknown generator {kind!r}; choose from {', '.join(GENERATOR_CLASSES)}"
        )
    rng = np.random.default_rng(seed)
    grid = GridSpec((n,) * d)
    coords = grid.coordinates()
    density = np.zeros(grid.cell_count)
    if kind == "gaussians":
        for _ in range(int(rng.integers(1, 4))):
            center = rng.uniform(1.0, n, size=d)
            sigma = rng.uniform(n / 16.0, n / 4.0)
            weight = rng.uniform(0.2, 1.0)
            sq = np.sum((coords - center[None, :]) ** 2, axis=1)
            density += weight * np.exp(-sq / (2.0 * sigma ** 2))
    elif kind == "shapes":
        for _ in range(int(rng.integers(1, 4))):
            fill = rng.uniform(0.5, 1.5)
            if rng.random() < 0.5:
                a = rng.uniform(1.0, n, size=d)
                b = rng.uniform(1.0, n, size=d)
                lo = np.minimum(a, b)
                hi = np.maximum(a, b)
                inside = np.all((coords >= lo) & (coords <= hi), axis=1)
            else:
                center = rng.uniform(1.0, n, size=d)
                radius = rng.uniform(n / 8.0, n / 3.0)
                sq = np.sum((coords - center[None, :]) ** 2, axis=1)
                inside = sq <= radius * radius
            density[inside] += fill
        if density.sum() <= 0.0:
            # every sampled shape missed the integer lattice
            density[grid.cell_count // 2] = 1.0
    else:
        density = rng.uniform(0.05, 1.0, size=grid.cell_count)
    return normalize(GridMeasure(grid, density))


# ---------------------------------------------------------------------------
# Bench configuration and rows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchConfig:
    classes: tuple[str, ...] = ("gaussians",)
    n: int = 32
    d: int = 2
    p_values: tuple[float, ...] = (1.0, 2.0)
    kappas: tuple[int, ...] = (2, 4)
    eps_multipliers: tuple[float, ...] = (0.001, 0.004)
    xi: float | None = None
    seed: int = 0
    n_pairs: int = 3
    methods: tuple[str, ...] = ALL_METHODS
    out: str | None = None
    max_iter: int = 10_000

    def validate(self) -> None:
        for cls in self.classes:
            if cls not in GENERATOR_CLASSES:
                raise CliValidationError(f"unknown generator class {cls!r}")
        if self.n < 4:
            raise CliValidationError(f"n must be >= 4, got {self.n}")
        if self.d < 1:
            raise CliValidationError(f"d must be >= 1, got {self.d}")
        # every row carries a relative error against the exact baseline,
        # so the fine problem must stay solvable
        if self.n ** self.d > MAX_KERNEL_CELLS:
            raise CliValidationError(
                f"n^d = {self.n ** self.d} exceeds {MAX_KERNEL_CELLS}; "
                "the bench always solves the exact baseline per pair"
            )
        for p in self.p_values:
            if p < 1.0:
                raise CliValidationError(f"p must be >= 1, got {p}")
        for k in self.kappas:
            if k < 1:
                raise CliValidationError(f"kappa must be >= 1, got {k}")
        for m in self.eps_multipliers:
            if m <= 0.0:
                raise CliValidationError(f"eps multiplier must be > 0, got {m}")
        if self.xi is not None and self.xi <= 0.0:
            raise CliValidationError(f"xi must be > 0, got {self.xi}")
        if self.n_pairs < 1:
            raise CliValidationError(f"pairs must be >= 1, got {self.n_pairs}")
        if not self.methods:
            raise CliValidationError("no methods selected")
        for m in self.methods:
            if m not in ALL_METHODS:
                raise CliValidationError(
                    f"unknown method {m!r}; choose from {', '.join(ALL_METHODS)}"
                )
        if self.max_iter < 1:
            raise CliValidationError(f"max-iter must be >= 1, got {self.max_iter}")


@dataclass
class ReportRow:
    """One CSV row; numeric fields are None when unavailable."""

    pair: str
    method: str
    p: float
    param: str = ""
    bound: float | None = None
    exact: float | None = None
    rel_error: float | None = None
    wall_time: float | None = None
    rel_time: float | None = None
    error: str = ""

    def as_record(self) -> list[str]:
        def num(v):
            return "" if v is None else format(v, ".17g")

        return [
            self.pair, self.method, num(self.p), self.param,
            num(self.bound), num(self.exact), num(self.rel_error),
            num(self.wall_time), num(self.rel_time), self.error,
        ]


def _relative_error(method: str, bound: float, exact: float | None) -> float | None:
    if exact is None:
        return None
    if method == "exact":
        return 0.0
    scale = exact if exact != 0.0 else 1.0
    if method in LOWER_METHODS:
        return (exact - bound) / scale
    return (bound - exact) / scale


def _exact_distance(mu: GridMeasure, nu: GridMeasure, p: float) -> tuple[float, float]:
    start = time.perf_counter()
    _, _, cost_value = solve_transport(grid_transport_problem(mu, nu, p))
    return cost_value ** (1.0 / p), time.perf_counter() - start


def _dispatch(method: str, mu: GridMeasure, nu: GridMeasure, p: float,
              param, xi: float | None, max_iter: int) -> tuple[float, float]:
    """Run one method; returns (bound value, wall time)."""
    if method == "weighted_cost":
        rep = weighted_cost_upper_bound(mu, nu, param, p)
    elif method == "min_cost":
        rep = min_cost_lower_bound(mu, nu, param, p)
    elif method == "primal_upscaling":
        rep = primal_upscaling_upper_bound(mu, nu, param, p, xi=xi, max_iter=max_iter)
    elif method == "dual_upscaling":
        rep = dual_upscaling_lower_bound(mu, nu, param, p)
    elif method in REG_METHODS:
        n = max(mu.grid.dims)
        coords = mu.grid.coordinates()
        cost = CostSpec(coords, coords, p)
        params = RegularizationParams(
            epsilon=param * n ** p, xi=xi, max_iter=max_iter
        )
        fn = reg_lower_bound if method == "reg_lower" else reg_upper_bound
        rep = fn(mu, nu, cost, params)
    else:
        raise CliValidationError(f"unknown method {method!r}")
    return rep.value, rep.wall_time


def _pair_rows(pair_id: str, mu: GridMeasure, nu: GridMeasure,
               cfg: BenchConfig) -> list[ReportRow]:
    rows: list[ReportRow] = []
    for p in cfg.p_values:
        try:
            exact_value, exact_time = _exact_distance(mu, nu, p)
            exact_err = ""
        except GridotError as exc:
            exact_value, exact_time = None, None
            exact_err = f"{type(exc).__name__}: {exc}"
            logger.warning("exact baseline failed on %s (p=%g): %s", pair_id, p, exc)
        if "exact" in cfg.methods:
            rows.append(ReportRow(
                pair=pair_id, method="exact", p=p,
                bound=exact_value, exact=exact_value,
                rel_error=0.0 if exact_value is not None else None,
                wall_time=exact_time,
                rel_time=1.0 if exact_time is not None else None,
                error=exact_err,
            ))
        tasks = []
        for method in cfg.methods:
            if method in QUANT_METHODS:
                tasks.extend((method, k, str(k)) for k in cfg.kappas)
            elif method in REG_METHODS:
                tasks.extend((method, m, format(m, "g")) for m in cfg.eps_multipliers)
        for method, param, param_str in tasks:
            row = ReportRow(pair=pair_id, method=method, p=p, param=param_str,
                            exact=exact_value)
            try:
                bound, wall = _dispatch(method, mu, nu, p, param, cfg.xi, cfg.max_iter)
                row.bound = bound
                row.wall_time = wall
                row.rel_error = _relative_error(method, bound, exact_value)
                if exact_time:
                    row.rel_time = wall / exact_time
            except GridotError as exc:
                row.error = f"{type(exc).__name__}: {exc}"
                logger.warning("%s failed on %s (p=%g, param=%s): %s",
                               method, pair_id, p, param_str, exc)
            rows.append(row)
    return rows


def bench_run(cfg: BenchConfig) -> list[ReportRow]:
    """Execute the bench matrix; rows come back sorted by (pair, method, param)."""
    cfg.validate()
    rows: list[ReportRow] = []
    for class_index, cls in enumerate(cfg.classes):
        for pair_index in range(cfg.n_pairs):
            mu = gen_synthetic(cls, cfg.n, cfg.d,
                               seed=[cfg.seed, class_index, pair_index, 0])
            nu = gen_synthetic(cls, cfg.n, cfg.d,
                               seed=[cfg.seed, class_index, pair_index, 1])
            pair_id = f"{cls}-{pair_index:03d}"
            rows.extend(_pair_rows(pair_id, mu, nu, cfg))
    rows.sort(key=lambda r: (r.pair, r.method, r.param))
    return rows


def write_csv(rows: list[ReportRow], stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.as_record())


def rows_to_csv(rows: list[ReportRow]) -> str:
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliValidationError(message)


def _split(text: str, cast):
    try:
        return tuple(cast(tok) for tok in text.split(",") if tok)
    except ValueError as exc:
        raise CliValidationError(f"cannot parse list {text!r}: {exc}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="gridot", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="increase log verbosity (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="run the synthetic benchmark matrix")
    bench.add_argument("--class", dest="classes", default="gaussians",
                       help="comma list of generators: gaussians,shapes,noise")
    bench.add_argument("--n", type=int, default=32, help="grid side length")
    bench.add_argument("--d", type=int, default=2, help="grid dimension")
    bench.add_argument("--p", default="1,2", help="comma list of Wasserstein orders")
    bench.add_argument("--kappa", default="2,4", help="comma list of coarsening factors")
    bench.add_argument("--eps", default="0.001,0.004",
                       help="comma list of regularization multipliers of N^p")
    bench.add_argument("--xi", type=float, default=None,
                       help="marginal-drift threshold (default: 1e-9 per support point)")
    bench.add_argument("--pairs", type=int, default=3, help="pairs per class")
    bench.add_argument("--seed", type=int, default=0, help="base RNG seed")
    bench.add_argument("--methods", default="all",
                       help="comma list of methods, or 'all'")
    bench.add_argument("--max-iter", type=int, default=10_000,
                       help="iteration cap for the scaling methods")
    bench.add_argument("--out", default=None, help="CSV output path (default stdout)")

    dist = sub.add_parser("dist", help="bound the distance between two GRID files")
    dist.add_argument("--mu", required=True, help="source GRID file")
    dist.add_argument("--nu", required=True, help="target GRID file")
    dist.add_argument("--method", required=True,
                      help=f"one of: {', '.join(ALL_METHODS)}")
    dist.add_argument("--p", type=float, default=2.0, help="Wasserstein order")
    dist.add_argument("--kappa", type=int, default=2,
                      help="coarsening factor for quantization methods")
    dist.add_argument("--eps", type=float, default=0.001,
                      help="regularization multiplier of N^p for reg methods")
    dist.add_argument("--xi", type=float, default=None,
                      help="marginal-drift threshold")
    dist.add_argument("--max-iter", type=int, default=10_000,
                      help="iteration cap for the scaling methods")
    return parser


def _config_from_args(args) -> BenchConfig:
    methods = (ALL_METHODS if args.methods.strip() == "all"
               else _split(args.methods, str))
    return BenchConfig(
        classes=_split(args.classes, str),
        n=args.n,
        d=args.d,
        p_values=_split(args.p, float),
        kappas=_split(args.kappa, int),
        eps_multipliers=_split(args.eps, float),
        xi=args.xi,
        seed=args.seed,
        n_pairs=args.pairs,
        methods=methods,
        out=args.out,
        max_iter=args.max_iter,
    )


def _run_bench(args) -> int:
    cfg = _config_from_args(args)
    rows = bench_run(cfg)
    if cfg.out is None:
        write_csv(rows, sys.stdout)
    else:
        with open(cfg.out, "w", newline="") as handle:
            write_csv(rows, handle)
        logger.info("wrote %d rows to %s", len(rows), cfg.out)
    return 0


def _run_dist(args) -> int:
    if args.method not in ALL_METHODS:
        raise CliValidationError(
            f"unknown method {args.method!r}; choose from {', '.join(ALL_METHODS)}"
        )
    if args.p < 1.0:
        raise CliValidationError(f"p must be >= 1, got {args.p}")
    with open(args.mu) as handle:
        mu = normalize(load_grid_measure(handle))
    with open(args.nu) as handle:
        nu = normalize(load_grid_measure(handle))
    if mu.grid != nu.grid:
        raise CliValidationError(
            f"measures live on different grids: {mu.grid.dims} vs {nu.grid.dims}"
        )
    if args.method == "exact":
        param_str = ""
    elif args.method in REG_METHODS:
        param_str = format(args.eps, "g")
    else:
        param_str = str(args.kappa)
    row = ReportRow(pair="dist", method=args.method, p=args.p, param=param_str)
    try:
        if args.method == "exact":
            value, wall = _exact_distance(mu, nu, args.p)
            row.exact = value
            row.rel_error = 0.0
            row.rel_time = 1.0
        else:
            param = args.eps if args.method in REG_METHODS else args.kappa
            value, wall = _dispatch(args.method, mu, nu, args.p, param,
                                    args.xi, args.max_iter)
        row.bound = value
        row.wall_time = wall
    except GridotError as exc:
        row.error = f"{type(exc).__name__}: {exc}"
        print(",".join(row.as_record()))
        print(f"gridot: {row.error}", file=sys.stderr)
        return 2
    print(",".join(row.as_record()))
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
        if args.command == "bench":
            return _run_bench(args)
        return _run_dist(args)
    except CliValidationError as exc:
        print(f"gridot: {exc}", file=sys.stderr)
        return 1
    except (OSError, GridotError) as exc:
        print(f"gridot: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Tests for synthetic generators, the benchmark harness, and the CLI."""

from __future__ import annotations

import csv
import io

import numpy as np
import pytest

from gridot import dump_grid_measure, load_grid_measure
from gridot.cli import (
    ALL_METHODS,
    CSV_COLUMNS,
    BenchConfig,
    CliValidationError,
    bench_run,
    gen_synthetic,
    main,
    rows_to_csv,
)


# ---------------------------------------------------------------------------
# synthetic measure generators
# ---------------------------------------------------------------------------


def test_generators_are_deterministic_per_seed():
    a = gen_synthetic("gaussians", 8, 2, 7)
    b = gen_synthetic("gaussians", 8, 2, 7)
    assert a.grid.dims == b.grid.dims == (8, 8)
    np.testing.assert_array_equal(a.mass, b.mass)
    c = gen_synthetic("gaussians", 8, 2, 8)
    assert not np.array_equal(a.mass, c.mass)


def test_generators_produce_normalized_measures():
    for kind in ("gaussians", "shapes", "noise"):
        m = gen_synthetic(kind, 8, 2, 3)
        assert m.total_mass == pytest.approx(1.0, abs=1e-12)
        assert np.all(m.mass >= 0.0)


def test_noise_generator_covers_every_cell():
    m = gen_synthetic("noise", 4, 1, 123)
    assert m.grid.dims == (4,)
    assert np.all(m.mass > 0.0)


def test_shapes_generator_leaves_background_empty():
    m = gen_synthetic("shapes", 16, 2, 1)
    assert int(np.sum(m.mass == 0.0)) > 0
    assert int(np.sum(m.mass > 0.0)) > 0


def test_generator_validation():
    with pytest.raises(CliValidationError):
        gen_synthetic("spirals", 8, 2, 0)
    with pytest.raises(CliValidationError):
        gen_synthetic("noise", 3, 2, 0)
    with pytest.raises(CliValidationError):
        gen_synthetic("noise", 8, 0, 0)


# ---------------------------------------------------------------------------
# benchmark harness
# ---------------------------------------------------------------------------


def _small_cfg(**overrides):
    base = dict(
        classes=("gaussians",),
        n=8,
        d=2,
        p_values=(1.0, 2.0),
        kappas=(2,),
        eps_multipliers=(0.5,),
        seed=5,
        n_pairs=2,
        methods=ALL_METHODS,
    )
    base.update(overrides)
    return BenchConfig(**base)


def test_bench_config_validation():
    bad = [
        dict(n=300, d=2),  # 90000 cells exceeds the dense solve cap
        dict(methods=("exact", "bogus")),
        dict(n_pairs=0),
        dict(kappas=(0,)),
        dict(eps_multipliers=(-1.0,)),
    ]
    for kwargs in bad:
        with pytest.raises(CliValidationError):
            BenchConfig(**kwargs).validate()
    BenchConfig().validate()  # defaults are fine


def test_bench_rows_cover_every_method_and_param():
    rows = bench_run(_small_cfg())
    # Per pair and p: 1 exact + 4 quantized (kappa=2) + 2 reg (one eps).
    assert len(rows) == 2 * 2 * 7
    methods = {(r.pair, r.method, r.p, r.param) for r in rows}
    assert len(methods) == len(rows)
    assert all(not r.error for r in rows)


def test_bench_rows_are_sorted_and_tagged():
    rows = bench_run(_small_cfg())
    keys = [(r.pair, r.method, r.param) for r in rows]
    assert keys == sorted(keys)
    assert {r.pair for r in rows} == {"gaussians-000", "gaussians-001"}


def test_bench_bounds_bracket_exact_in_emitted_rows():
    rows = bench_run(_small_cfg())
    by_key = {(r.pair, r.method, r.p, r.param): r for r in rows}
    for r in rows:
        if r.method == "exact":
            continue
        exact = by_key[(r.pair, "exact", r.p, "")].bound
        assert r.exact == exact
        if r.method in ("min_cost", "dual_upscaling", "reg_lower"):
            assert r.bound <= exact + 1e-7
        else:
            assert r.bound >= exact - 1e-7


def test_bench_relative_errors_recompute():
    rows = bench_run(_small_cfg())
    for r in rows:
        if r.method == "exact":
            assert r.rel_error == 0.0
            assert r.rel_time == 1.0
            continue
        scale = r.exact if r.exact != 0.0 else 1.0
        if r.method in ("min_cost", "dual_upscaling", "reg_lower"):
            expected = (r.exact - r.bound) / scale
        else:
            expected = (r.bound - r.exact) / scale
        assert abs(r.rel_error - expected) <= 1e-12


def test_bench_identical_pair_methods_exact_only():
    cfg = BenchConfig(
        classes=("noise",), n=4, d=1, p_values=(1.0,), methods=("exact",),
        n_pairs=1, seed=9,
    )
    rows = bench_run(cfg)
    assert len(rows) == 1
    assert rows[0].method == "exact"
    assert rows[0].error == ""


def test_bench_value_columns_reproduce_across_runs():
    cfg = _small_cfg()
    first = bench_run(cfg)
    second = bench_run(cfg)
    strip = lambda rec: [v for k, v in zip(CSV_COLUMNS, rec) if k not in ("wall_time", "rel_time")]
    a = [strip(r.as_record()) for r in first]
    b = [strip(r.as_record()) for r in second]
    assert a == b


def test_rows_to_csv_layout():
    rows = bench_run(_small_cfg(n_pairs=1, p_values=(2.0,)))
    text = rows_to_csv(rows)
    parsed = list(csv.reader(io.StringIO(text)))
    assert parsed[0] == list(CSV_COLUMNS)
    assert len(parsed) == len(rows) + 1
    # Every data row carries a parseable bound value.
    for rec in parsed[1:]:
        float(rec[4])


# ---------------------------------------------------------------------------
# command-line interface
# ---------------------------------------------------------------------------


def test_main_bench_writes_csv(tmp_path, capsys):
    out = tmp_path / "report.csv"
    rc = main([
        "bench", "--class", "gaussians", "--n", "8", "--d", "2", "--p", "2",
        "--kappa", "2", "--eps", "0.5", "--pairs", "1", "--seed", "3",
        "--methods", "exact,weighted_cost,min_cost", "--out", str(out),
    ])
    assert rc == 0
    parsed = list(csv.reader(out.open()))
    assert parsed[0] == list(CSV_COLUMNS)
    assert len(parsed) == 4  # header + three methods


def test_main_bench_prints_to_stdout_without_out(capsys):
    rc = main([
        "bench", "--class", "noise", "--n", "4", "--d", "1", "--p", "1",
        "--pairs", "1", "--seed", "1", "--methods", "exact",
    ])
    assert rc == 0
    captured = capsys.readouterr()
    assert captured.out.startswith(",".join(CSV_COLUMNS[:3]))


def test_main_bench_rejects_bad_arguments(capsys):
    assert main(["bench", "--n", "nope"]) == 1
    assert main(["bench", "--methods", "bogus"]) == 1
    assert main(["bench", "--n", "300", "--d", "2"]) == 1
    assert main(["frobnicate"]) == 1
    capsys.readouterr()  # swallow usage noise


def _write_grid(path, measure):
    path.write_text(dump_grid_measure(measure))


def test_main_dist_exact_row(tmp_path, capsys):
    a = tmp_path / "a.grid"
    b = tmp_path / "b.grid"
    _write_grid(a, gen_synthetic("gaussians", 8, 2, 1))
    _write_grid(b, gen_synthetic("gaussians", 8, 2, 2))
    rc = main(["dist", "--mu", str(a), "--nu", str(b), "--method", "exact", "--p", "2"])
    assert rc == 0
    out = capsys.readouterr().out.strip().splitlines()
    rec = next(csv.reader(io.StringIO(out[-1])))
    assert rec[1] == "exact"
    assert float(rec[6]) == 0.0  # rel_error
    assert float(rec[8]) == 1.0  # rel_time
    assert rec[9] == ""


def test_main_dist_bound_leaves_exact_columns_empty(tmp_path, capsys):
    a = tmp_path / "a.grid"
    b = tmp_path / "b.grid"
    _write_grid(a, gen_synthetic("gaussians", 8, 2, 1))
    _write_grid(b, gen_synthetic("gaussians", 8, 2, 2))
    rc = main([
        "dist", "--mu", str(a), "--nu", str(b),
        "--method", "weighted_cost", "--kappa", "2", "--p", "2",
    ])
    assert rc == 0
    rec = next(csv.reader(io.StringIO(capsys.readouterr().out.strip().splitlines()[-1])))
    assert rec[1] == "weighted_cost"
    assert float(rec[4]) > 0.0
    assert rec[5] == "" and rec[6] == "" and rec[8] == ""


def test_main_dist_normalizes_inputs(tmp_path, capsys):
    # Unnormalized but proportional inputs must still be accepted.
    a = tmp_path / "a.grid"
    b = tmp_path / "b.grid"
    a.write_text("1 2\n3 0\n")
    b.write_text("1 2\n0 7\n")
    rc = main(["dist", "--mu", str(a), "--nu", str(b), "--method", "exact", "--p", "1"])
    assert rc == 0
    rec = next(csv.reader(io.StringIO(capsys.readouterr().out.strip().splitlines()[-1])))
    assert float(rec[4]) == pytest.approx(1.0)


def test_main_dist_method_failure_exits_2(tmp_path, capsys):
    # A grid beyond the dense-kernel cap makes the entropic method fail;
    # the row must still print, with the error column filled, and the
    # process must signal partial failure.
    big = gen_synthetic("noise", 260, 2, 0)
    a = tmp_path / "a.grid"
    b = tmp_path / "b.grid"
    _write_grid(a, big)
    _write_grid(b, gen_synthetic("noise", 260, 2, 1))
    rc = main([
        "dist", "--mu", str(a), "--nu", str(b),
        "--method", "reg_lower", "--eps", "0.001", "--p", "2",
    ])
    assert rc == 2
    captured = capsys.readouterr()
    rec = next(csv.reader(io.StringIO(captured.out.strip().splitlines()[-1])))
    assert rec[9] != ""


def test_main_dist_missing_file_exits_1(tmp_path, capsys):
    rc = main([
        "dist", "--mu", str(tmp_path / "absent.grid"),
        "--nu", str(tmp_path / "absent.grid"), "--method", "exact", "--p", "1",
    ])
    assert rc == 1
    capsys.readouterr()


def test_main_dist_mismatched_grids_exit_1(tmp_path, capsys):
    a = tmp_path / "a.grid"
    b = tmp_path / "b.grid"
    a.write_text("1 2\n1 0\n")
    b.write_text("1 3\n1 0 0\n")
    rc = main(["dist", "--mu", str(a), "--nu", str(b), "--method", "exact", "--p", "1"])
    assert rc == 1
    capsys.readouterr()


def test_round_trip_through_generator_and_files(tmp_path):
    m = gen_synthetic("shapes", 8, 2, 11)
    path = tmp_path / "m.grid"
    _write_grid(path, m)
    back = load_grid_measure(path.read_text())
    np.testing.assert_array_equal(back.mass, m.mass)

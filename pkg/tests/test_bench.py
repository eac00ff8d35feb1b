"""
boolcd Test Suite - Benchmark Sweeps

Small sweeps check row layout, ordering and output files; planted sweeps
check the error shape of each sweep kind.
"""

import csv

import pytest

from boolcd import bench
from boolcd.bench import (
    BENCH_COLUMNS,
    SUMMARY_COLUMNS,
    BenchSettings,
    core_size_sweep,
    density_sweep,
    mean_by_point,
    run_bench,
    summarize,
    time_sweep,
    write_bench,
)
from boolcd.config import THREADS_ENV_VAR, Ranks
from boolcd.errors import ConfigError, InputError


def small_settings(**overrides):
    values = dict(dims=(5, 4, 4), seeds=(1, 2), max_sweeps=5, inner_sweeps=2)
    values.update(overrides)
    return BenchSettings(**values)


def read_csv(path):
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def strip_timing(rows):
    return [(r.method, r.index, r.seed, r.mismatches, r.retained_bytes) for r in rows]


def test_core_size_rows_in_job_order():
    """One batch and one incremental row per (point, seed), in job order"""
    ranks_list = [Ranks(1, 1, 1), Ranks(2, 2, 2)]
    result = core_size_sweep(small_settings(), ranks_list)
    assert result.kind == "core-size"
    assert len(result.rows) == 2 * 2 * 2
    assert [(r.index, r.seed, r.method) for r in result.rows[:4]] == [
        (0, 1, "batch"), (0, 1, "incremental"), (0, 2, "batch"), (0, 2, "incremental"),
    ]
    assert result.chart.categories == ("1,1,1", "2,2,2")
    assert [s.name for s in result.chart.series] == ["batch", "incremental"]


def test_rows_do_not_depend_on_thread_count(monkeypatch):
    ranks_list = [Ranks(1, 1, 1), Ranks(2, 2, 1)]
    monkeypatch.setenv(THREADS_ENV_VAR, "1")
    serial = core_size_sweep(small_settings(), ranks_list)
    monkeypatch.setenv(THREADS_ENV_VAR, "3")
    parallel = core_size_sweep(small_settings(), ranks_list)
    assert strip_timing(serial.rows) == strip_timing(parallel.rows)


def test_density_sweep_points():
    result = density_sweep(small_settings(seeds=(3,)), [0.2, 0.5], Ranks(2, 2, 2))
    assert sorted({r.density for r in result.rows}) == [0.2, 0.5]
    assert result.chart.categories == ("0.2", "0.5")


def test_time_sweep_rows():
    """Slot 1 is empty; later slots carry cumulative time"""
    settings = small_settings(seeds=(4,))
    result = time_sweep(settings, Ranks(2, 2, 2))
    t = settings.dims[2]
    assert len(result.rows) == 2 + 2 * (t - 1)
    first = [r for r in result.rows if r.index == 1]
    assert all(r.wall_millis == 0.0 and r.mismatches == 0 for r in first)
    for method in ("batch", "incremental"):
        times = [r.wall_millis for r in result.rows if r.method == method]
        assert times == sorted(times)
    assert result.chart.categories == tuple(str(k) for k in range(1, t + 1))


def test_time_sweep_needs_two_slots():
    with pytest.raises(InputError):
        time_sweep(small_settings(dims=(4, 4, 1)), Ranks(1, 1, 1))


def test_summary_and_means():
    result = core_size_sweep(small_settings(), [Ranks(1, 1, 1)])
    summary = summarize(result.rows)
    assert [row["method"] for row in summary] == ["batch", "incremental"]
    assert all(row["seeds"] == "2" for row in summary)
    assert list(summary[0]) == SUMMARY_COLUMNS
    means = mean_by_point(result.rows, "mismatches")
    batch = [r.mismatches for r in result.rows if r.method == "batch"]
    assert means["batch"] == [pytest.approx(sum(batch) / len(batch))]


def test_write_bench_files(tmp_path):
    """bench.csv, bench_summary.csv and the chart are written"""
    result = core_size_sweep(small_settings(), [Ranks(1, 1, 1)])
    paths = write_bench(result, tmp_path)
    rows = read_csv(paths["rows"])
    assert list(rows[0]) == BENCH_COLUMNS
    assert len(rows) == len(result.rows)
    assert rows[0]["dims"] == "5x4x4"
    assert rows[0]["ranks"] == "1x1x1"
    assert len(read_csv(paths["summary"])) == 2
    assert paths["chart"].name == "core_size.svg"
    assert paths["chart"].read_text().startswith("<?xml")


def test_run_bench_dispatch(tmp_path):
    result = run_bench("density", small_settings(seeds=(1,)), tmp_path, densities=[0.3],
                       ranks=Ranks(1, 1, 1))
    assert result.kind == "density"
    assert (tmp_path / "bench.csv").exists()
    with pytest.raises(InputError):
        run_bench("nope", small_settings())


def test_sweep_input_checks():
    with pytest.raises(InputError):
        core_size_sweep(small_settings(), [])
    with pytest.raises(InputError):
        density_sweep(small_settings(), [], Ranks(1, 1, 1))
    with pytest.raises(InputError):
        core_size_sweep(small_settings(seeds=()), [Ranks(1, 1, 1)])
    with pytest.raises(ConfigError):
        core_size_sweep(small_settings(), [Ranks(6, 1, 1)])


def test_density_chart_plots_relative_error():
    result = density_sweep(small_settings(seeds=(3,)), [0.2, 0.5], Ranks(2, 2, 2))
    means = mean_by_point(result.rows, "relative")
    assert {s.name: list(s.values) for s in result.chart.series} == means
    assert result.chart.y_label == "mean relative error"


def test_time_sweep_errors_stay_within_threshold():
    """A stationary stream is fitted to threshold by both methods on every slot"""
    settings = small_settings(dims=(20, 10, 6), seeds=(1,), noise=0.0, max_sweeps=50)
    result = time_sweep(settings, Ranks(2, 2, 2))
    later = [r for r in result.rows if r.index >= 2]
    assert len(later) == 2 * 5
    assert all(r.relative <= settings.error_threshold for r in later)


def test_planted_core_size_beats_rank_one():
    """Error at or above the planted ranks is no worse than at (1,1,1)"""
    settings = BenchSettings(dims=(20, 10, 15), noise=0.0, error_threshold=0.0)
    ranks_list = [Ranks(1, 1, 1), Ranks(2, 2, 2), Ranks(3, 3, 3)]
    means = mean_by_point(core_size_sweep(settings, ranks_list).rows, "relative")["batch"]
    assert means[1] <= means[0]
    assert means[2] <= means[0]


def test_density_sweep_error_grows_with_density():
    settings = BenchSettings(dims=(30, 15, 10), noise=0.0, error_threshold=0.0)
    densities = [0.1, 0.2, 0.3, 0.4, 0.5]
    result = density_sweep(settings, densities, Ranks(3, 3, 3))
    means = mean_by_point(result.rows, "relative")["batch"]
    assert len(means) == len(densities)
    assert means[-1] >= means[0]


def test_negative_seed_is_rejected():
    with pytest.raises(ConfigError, match="seed"):
        core_size_sweep(small_settings(seeds=(-1,)), [Ranks(1, 1, 1)])


def test_time_sweep_runs_seeds_one_at_a_time(monkeypatch):
    """Cumulative timings are taken without a second job on the CPU"""
    pools = []
    real_pool = bench.ThreadPoolExecutor

    def recording_pool(max_workers):
        pools.append(max_workers)
        return real_pool(max_workers=max_workers)

    monkeypatch.setattr(bench, "ThreadPoolExecutor", recording_pool)
    monkeypatch.setenv(THREADS_ENV_VAR, "4")
    time_sweep(small_settings(), Ranks(1, 1, 1))
    core_size_sweep(small_settings(), [Ranks(1, 1, 1)])
    assert pools == [1, 4]

"""
Benchmark sweeps comparing batch and incremental fitting on planted data.

Sweeps:
- core-size: error against candidate core sizes on a planted tensor
- density: error against factor density at fixed core size
- time: cumulative wall time per slot; "batch" refits from scratch on the
  tensor grown by one slot per step, "incremental" ingests one slot per step

Each (point, seed) pair is an independent job run on a thread pool; rows
are merged in job order, so the CSV row order never depends on scheduling.
Core-size and density timings share the CPU with concurrent jobs
(set BOOLCD_THREADS=1 to isolate them). Time-sweep jobs always run one after
another, so its cumulative wall times are not inflated by other seeds.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .batch_tucker import fit_batch, fit_best_of
from .config import (
    DEFAULT_WINDOW,
    FitConfig,
    Ranks,
    StreamConfig,
    resolve_thread_count,
)
from .errors import InputError
from .incremental import bootstrap, ingest_slot, run_stream
from .logs import get_logger
from .seeding import check_seed
from .svg import ChartData, ChartKind, Series, emit_svg
from .synth import PlantedSpec, generate_planted
from .tensor_core import BoolTensor3


logger = get_logger(__name__)

BENCH_COLUMNS = [
    "method",
    "dims",
    "ranks",
    "density",
    "index",
    "mismatches",
    "relative",
    "wall_millis",
    "retained_bytes",
    "seed",
]
SUMMARY_COLUMNS = [
    "method",
    "dims",
    "ranks",
    "density",
    "index",
    "seeds",
    "mean_mismatches",
    "mean_relative",
    "mean_wall_millis",
    "mean_retained_bytes",
]

DEFAULT_SEEDS = (1, 2, 3, 4, 5)
DEFAULT_PLANTED_RANKS = Ranks(2, 2, 2)
DEFAULT_FACTOR_DENSITY = 0.3
DEFAULT_CORE_DENSITY = 0.3
DEFAULT_BENCH_NOISE = 0.05

METHODS = ("batch", "incremental")


@dataclass(frozen=True)
class BenchRow:
    """One measurement of one method at one sweep point for one seed."""

    method: str
    dims: Tuple[int, int, int]
    ranks: Ranks
    density: float
    index: int
    mismatches: int
    relative: float
    wall_millis: float
    retained_bytes: int
    seed: int

    def to_dict(self) -> Dict[str, str]:
        return {
            "method": self.method,
            "dims": "x".join(str(d) for d in self.dims),
            "ranks": "x".join(str(r) for r in self.ranks.as_tuple()),
            "density": f"{self.density:.4f}",
            "index": str(self.index),
            "mismatches": str(self.mismatches),
            "relative": f"{self.relative:.6f}",
            "wall_millis": f"{self.wall_millis:.3f}",
            "retained_bytes": str(self.retained_bytes),
            "seed": str(self.seed),
        }


@dataclass(frozen=True)
class BenchSettings:
    """Fitting parameters shared by every point of a sweep."""

    dims: Tuple[int, int, int]
    seeds: Tuple[int, ...] = DEFAULT_SEEDS
    error_threshold: float = 0.05
    max_sweeps: int = 50
    restarts: int = 1
    noise: float = DEFAULT_BENCH_NOISE
    inner_sweeps: int = 5

    def validate(self) -> None:
        if not self.seeds:
            raise InputError("Bench needs at least one seed")
        for seed in self.seeds:
            check_seed(seed)


@dataclass
class BenchResult:
    kind: str
    rows: List[BenchRow]
    chart: ChartData

    def summary(self) -> List[Dict[str, str]]:
        return summarize(self.rows)


def _window_for(ranks: Ranks, n_slots: int) -> int:
    return max(2, ranks.r3, min(n_slots, DEFAULT_WINDOW))


def _stream_config(settings: BenchSettings, ranks: Ranks, seed: int, n_slots: int) -> StreamConfig:
    return StreamConfig(
        ranks=ranks,
        window_w=_window_for(ranks, n_slots),
        inner_sweeps=settings.inner_sweeps,
        error_threshold=settings.error_threshold,
        seed=seed,
        bootstrap_sweeps=settings.max_sweeps,
    )


def _fit_config(settings: BenchSettings, ranks: Ranks, seed: int) -> FitConfig:
    return FitConfig(
        ranks=ranks,
        error_threshold=settings.error_threshold,
        max_sweeps=settings.max_sweeps,
        seed=seed,
    )


def _measure_point(
    settings: BenchSettings,
    spec: PlantedSpec,
    ranks: Ranks,
    density: float,
    index: int,
) -> List[BenchRow]:
    """Batch and incremental fits of one planted instance."""
    slots, _ = generate_planted(spec)
    x = BoolTensor3.from_slices(slots)

    start = time.perf_counter()
    best = fit_best_of(x, _fit_config(settings, ranks, spec.seed), settings.restarts)
    batch_millis = (time.perf_counter() - start) * 1000.0
    final = best.trace.final

    start = time.perf_counter()
    state, trace = run_stream(slots, _stream_config(settings, ranks, spec.seed, len(slots)))
    stream_millis = (time.perf_counter() - start) * 1000.0

    logger.log_event("bench_point_finished", True, index=index, seed=spec.seed)
    return [
        BenchRow("batch", x.dims, ranks, density, index, final.mismatches, final.relative,
                 batch_millis, x.nbytes + best.model.nbytes, spec.seed),
        BenchRow("incremental", x.dims, ranks, density, index, trace.final.mismatches,
                 trace.final.relative, stream_millis, state.retained_nbytes(), spec.seed),
    ]


def _run_jobs(
    jobs: Sequence[Callable[[], List[BenchRow]]],
    workers: Optional[int] = None,
) -> List[BenchRow]:
    workers = workers or resolve_thread_count()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda job: job(), jobs))
    return [row for rows in results for row in rows]


def _planted(settings: BenchSettings, ranks: Ranks, density: float, seed: int) -> PlantedSpec:
    capped = Ranks(*(min(r, d) for r, d in zip(ranks.as_tuple(), settings.dims)))
    return PlantedSpec(
        dims=settings.dims,
        ranks=capped,
        densities=(density, density, density),
        core_density=DEFAULT_CORE_DENSITY,
        noise=settings.noise,
        seed=seed,
    )


def core_size_sweep(
    settings: BenchSettings,
    ranks_list: Sequence[Ranks],
    planted_ranks: Ranks = DEFAULT_PLANTED_RANKS,
) -> BenchResult:
    """Error against core size on a tensor planted at ``planted_ranks``."""
    settings.validate()
    if not ranks_list:
        raise InputError("Core-size sweep needs at least one ranks triple")
    for ranks in ranks_list:
        ranks.check_against(settings.dims)
    jobs = [
        (lambda r=ranks, i=index, s=seed: _measure_point(
            settings, _planted(settings, planted_ranks, DEFAULT_FACTOR_DENSITY, s), r,
            DEFAULT_FACTOR_DENSITY, i))
        for index, ranks in enumerate(ranks_list)
        for seed in settings.seeds
    ]
    rows = _run_jobs(jobs)
    chart = _mean_chart(
        rows,
        "Reconstruction error for different core sizes",
        [str(r) for r in ranks_list],
        "relative",
        "core size",
        "mean relative error",
    )
    return BenchResult("core-size", rows, chart)


def density_sweep(
    settings: BenchSettings,
    densities: Sequence[float],
    ranks: Ranks,
) -> BenchResult:
    """Error against factor density at fixed core size."""
    settings.validate()
    if not densities:
        raise InputError("Density sweep needs at least one density")
    ranks.check_against(settings.dims)
    jobs = [
        (lambda d=density, i=index, s=seed: _measure_point(
            settings, _planted(settings, ranks, d, s), ranks, d, i))
        for index, density in enumerate(densities)
        for seed in settings.seeds
    ]
    rows = _run_jobs(jobs)
    chart = _mean_chart(
        rows,
        "Reconstruction error for different factor densities",
        [f"{d:g}" for d in densities],
        "relative",
        "factor density",
        "mean relative error",
    )
    return BenchResult("density", rows, chart)


def _time_series_for_seed(settings: BenchSettings, ranks: Ranks, seed: int) -> List[BenchRow]:
    """Cumulative per-slot wall time of both methods on one planted stream."""
    spec = _planted(settings, ranks, DEFAULT_FACTOR_DENSITY, seed)
    slots, _ = generate_planted(spec)
    n_slots = len(slots)
    config = _stream_config(settings, ranks, seed, n_slots)
    dims = settings.dims
    rows: List[BenchRow] = []

    # slot 1: nothing fitted yet
    for method in METHODS:
        rows.append(BenchRow(method, dims, ranks, DEFAULT_FACTOR_DENSITY, 1, 0, 0.0, 0.0, 0, seed))

    cumulative = 0.0
    state = None
    for t in range(2, n_slots + 1):
        start = time.perf_counter()
        if state is None:
            state = bootstrap(slots[0], slots[1], config)
        else:
            state = ingest_slot(state, slots[t - 1])
        cumulative += (time.perf_counter() - start) * 1000.0
        record = state.trace.final
        rows.append(BenchRow("incremental", dims, ranks, DEFAULT_FACTOR_DENSITY, t,
                             record.mismatches, record.relative, cumulative,
                             state.retained_nbytes(), seed))

    cumulative = 0.0
    for t in range(2, n_slots + 1):
        grown = BoolTensor3.from_slices(slots[:t])
        start = time.perf_counter()
        model, trace = fit_batch(grown, _fit_config(settings, ranks, seed), time_limit=n_slots)
        cumulative += (time.perf_counter() - start) * 1000.0
        rows.append(BenchRow("batch", dims, ranks, DEFAULT_FACTOR_DENSITY, t,
                             trace.final.mismatches, trace.final.relative, cumulative,
                             grown.nbytes + model.nbytes, seed))
    return rows


def time_sweep(settings: BenchSettings, ranks: Ranks) -> BenchResult:
    """
    Cumulative wall time per slot of incremental ingest against batch refit
    from scratch on the grown tensor.
    """
    settings.validate()
    if settings.dims[2] < 2:
        raise InputError(f"Time sweep needs at least 2 slots, got {settings.dims[2]}")
    ranks.check_against(settings.dims)
    jobs = [
        (lambda s=seed: _time_series_for_seed(settings, ranks, s))
        for seed in settings.seeds
    ]
    rows = _run_jobs(jobs, workers=1)
    chart = _mean_chart(
        rows,
        "Cumulative time: incremental vs batch refit per slot",
        [str(t) for t in range(1, settings.dims[2] + 1)],
        "wall_millis",
        "time slot",
        "cumulative millis",
    )
    return BenchResult("time", rows, chart)


def _group_key(row: BenchRow) -> Tuple:
    return (row.method, row.index)


def summarize(rows: Sequence[BenchRow]) -> List[Dict[str, str]]:
    """Per (method, point) means over seeds, ordered by point then method."""
    groups: Dict[Tuple, List[BenchRow]] = {}
    for row in rows:
        groups.setdefault(_group_key(row), []).append(row)
    out = []
    for (method, index) in sorted(groups, key=lambda k: (k[1], METHODS.index(k[0]))):
        members = groups[(method, index)]
        n = len(members)
        first = members[0]
        out.append({
            "method": method,
            "dims": "x".join(str(d) for d in first.dims),
            "ranks": "x".join(str(r) for r in first.ranks.as_tuple()),
            "density": f"{first.density:.4f}",
            "index": str(index),
            "seeds": str(n),
            "mean_mismatches": f"{sum(r.mismatches for r in members) / n:.3f}",
            "mean_relative": f"{sum(r.relative for r in members) / n:.6f}",
            "mean_wall_millis": f"{sum(r.wall_millis for r in members) / n:.3f}",
            "mean_retained_bytes": f"{sum(r.retained_bytes for r in members) / n:.1f}",
        })
    return out


def mean_by_point(rows: Sequence[BenchRow], field_name: str) -> Dict[str, List[float]]:
    """Per-method means of one field, in point order."""
    groups: Dict[Tuple, List[float]] = {}
    for row in rows:
        groups.setdefault(_group_key(row), []).append(float(getattr(row, field_name)))
    out: Dict[str, List[float]] = {}
    for method in METHODS:
        indices = sorted(i for m, i in groups if m == method)
        if indices:
            out[method] = [sum(groups[(method, i)]) / len(groups[(method, i)]) for i in indices]
    return out


def _mean_chart(
    rows: Sequence[BenchRow],
    title: str,
    categories: List[str],
    field_name: str,
    x_label: str,
    y_label: str,
) -> ChartData:
    means = mean_by_point(rows, field_name)
    series = tuple(Series(method, tuple(values)) for method, values in means.items())
    return ChartData(title, tuple(categories), series, x_label, y_label)


def write_bench(result: BenchResult, out_dir: Path) -> Dict[str, Path]:
    """Write bench.csv, bench_summary.csv and the chart; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "rows": out_dir / "bench.csv",
        "summary": out_dir / "bench_summary.csv",
        "chart": out_dir / f"{result.kind.replace('-', '_')}.svg",
    }
    with paths["rows"].open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(row.to_dict() for row in result.rows)
    with paths["summary"].open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(result.summary())
    paths["chart"].write_text(emit_svg(result.chart, ChartKind.LINE), encoding="utf-8")
    logger.info("Bench written", extra={"kind": result.kind, "rows": len(result.rows)})
    return paths


def run_bench(
    kind: str,
    settings: BenchSettings,
    out_dir: Optional[Path] = None,
    ranks_list: Sequence[Ranks] = (),
    densities: Sequence[float] = (),
    ranks: Ranks = DEFAULT_PLANTED_RANKS,
) -> BenchResult:
    if kind == "core-size":
        result = core_size_sweep(settings, ranks_list)
    elif kind == "density":
        result = density_sweep(settings, densities, ranks)
    elif kind == "time":
        result = time_sweep(settings, ranks)
    else:
        raise InputError(f"Unknown bench kind {kind!r}")
    if out_dir is not None:
        write_bench(result, out_dir)
    return result

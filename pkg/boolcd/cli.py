from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from . import __version__
from .batch_tucker import default_rank_ladder, fit_best_of, meets_threshold, select_ranks
from .bench import BenchSettings, run_bench
from .config import (
    DEFAULT_DECAY,
    DEFAULT_ERROR_THRESHOLD,
    DEFAULT_INNER_SWEEPS,
    DEFAULT_MAX_SWEEPS,
    DEFAULT_STALL_SWEEPS,
    DEFAULT_WINDOW,
    ErrorKind,
    ExponentialDecay,
    FitConfig,
    Ranks,
    StreamConfig,
    TimeWeight,
    parse_time_weight,
)
from .errors import (
    CapacityError,
    ConfigError,
    DataError,
    InputError,
    ShapeError,
    StateError,
)
from .incremental import run_stream
from .ingestion import (
    binarize,
    load_raw_csv,
    load_slots_dir,
    load_tensor_btt,
    load_thresholds_csv,
    save_slot_csv,
    save_tensor_btt,
)
from .logs import Verbosity, set_verbosity
from .model_store import load_model, save_covariance, save_model, save_trace
from .reports import (
    FrameSpec,
    class_proportions,
    feature_variance,
    gain_loss,
    gain_loss_chart,
    proportions_chart,
    variance_chart,
    write_feature_variance_csv,
    write_gain_loss_csv,
    write_proportions_csv,
)
from .svg import ChartKind, emit_svg
from .synth import PlantedSpec, generate_planted, parse_drift
from .tensor_core import BoolTensor3, ErrorFigures


EXIT_OK = 0
EXIT_DATA = 1
EXIT_USAGE = 2

PREFIX = "[boolcd]"


def _parse_ints(text: str, what: str) -> List[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"{what} must be comma-separated integers, got {text!r}") from exc


def _parse_floats(text: str, what: str) -> List[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"{what} must be comma-separated numbers, got {text!r}") from exc


def parse_dims(text: str, count: int = 3) -> Tuple[int, ...]:
    dims = _parse_ints(text, "Dims")
    if len(dims) != count or min(dims) < 1:
        raise ConfigError(f"Dims must be {count} positive integers, got {text!r}")
    return tuple(dims)


def _summary_line(mismatches: int, relative: float, label: str, count: int, status: str) -> str:
    return f"error={mismatches} rel={relative:.6g} {label}={count} status={status}"


# ─── factorize ────────────────────────────────────────────────────────────


def _fit_config(args: argparse.Namespace, ranks: Ranks) -> FitConfig:
    config = FitConfig(
        ranks=ranks,
        error_threshold=args.eps,
        max_sweeps=args.max_sweeps,
        stall_sweeps=args.stall_sweeps,
        seed=args.seed,
        error_kind=ErrorKind.parse(args.error),
        init_strategy=args.init_strategy,
    )
    config.validate()
    return config


def cmd_factorize(args: argparse.Namespace) -> int:
    x = load_tensor_btt(Path(args.input))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.ranks == "auto":
        trial = _fit_config(args, Ranks(1, 1, 1))
        selection = select_ranks(x, default_rank_ladder(x.dims), trial, args.restarts)
        with (out / "ranks.csv").open("w", encoding="utf-8") as fh:
            fh.write("ranks,mismatches,relative\n")
            for point in selection.points:
                fh.write(f"\"{point.ranks}\",{point.mismatches},{point.relative:.6f}\n")
        ranks = selection.chosen or selection.points[-1].ranks
        print(f"{PREFIX} Core size selected: {ranks}", file=sys.stderr)
    else:
        ranks = Ranks.parse(args.ranks)

    config = _fit_config(args, ranks)
    result = fit_best_of(x, config, args.restarts)
    save_model(result.model, out, kind="batch", config=config.to_dict())
    save_trace(result.trace, out / "trace.csv")

    final = result.trace.final
    print(_summary_line(final.mismatches, final.relative, "sweeps", len(result.trace),
                        result.trace.status.value))
    print(f"{PREFIX} Model written to: {out}", file=sys.stderr)
    return EXIT_OK


# ─── stream ───────────────────────────────────────────────────────────────


def _time_weight(args: argparse.Namespace) -> TimeWeight:
    if args.weight is not None:
        return parse_time_weight(args.weight)
    if args.half_life is not None:
        weight = TimeWeight.exponential_half_life(args.half_life)
    else:
        weight = ExponentialDecay(args.decay if args.decay is not None else DEFAULT_DECAY)
    weight.validate()
    return weight


def cmd_stream(args: argparse.Namespace) -> int:
    config = StreamConfig(
        ranks=Ranks.parse(args.ranks),
        window_w=args.window,
        time_weight=_time_weight(args),
        inner_sweeps=args.inner_sweeps,
        error_threshold=args.eps,
        seed=args.seed,
        error_kind=ErrorKind.parse(args.error),
    )
    config.validate()
    slots = load_slots_dir(Path(args.slots))
    if len(slots) < 2:
        raise InputError(f"Need at least 2 slot files in {args.slots}, found {len(slots)}")

    state, trace = run_stream([m for _, m in slots], config)
    out = Path(args.out)
    save_model(state.model, out, kind="stream", config=config.to_dict())
    save_covariance(state.cov.as_tuple(), out)
    save_trace(trace, out / "trace.csv")

    final = trace.final
    met = meets_threshold(
        ErrorFigures(final.mismatches, final.relative), config.error_kind, config.error_threshold
    )
    status = "converged" if met else "above_threshold"
    print(_summary_line(final.mismatches, final.relative, "slots", state.slots_seen, status))
    print(f"{PREFIX} Stream model written to: {out}", file=sys.stderr)
    return EXIT_OK


# ─── report ───────────────────────────────────────────────────────────────


def cmd_report(args: argparse.Namespace) -> int:
    model, _ = load_model(Path(args.model))
    frames = FrameSpec(args.frames)
    frames.validate(model.c.rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    variance = feature_variance(model, frames)
    write_feature_variance_csv(variance, out / "feature_variance.csv")
    (out / "feature_variance.svg").write_text(
        emit_svg(variance_chart(variance), ChartKind.LINE), encoding="utf-8"
    )

    proportions = class_proportions(model, frames)
    write_proportions_csv(proportions, out / "proportions.csv")
    (out / "proportions.svg").write_text(
        emit_svg(proportions_chart(proportions), ChartKind.STACKED_BAR), encoding="utf-8"
    )

    if len(proportions.frame_labels) >= 2:
        changes = gain_loss(proportions)
        write_gain_loss_csv(changes, out / "gain_loss.csv")
        (out / "gain_loss.svg").write_text(
            emit_svg(gain_loss_chart(changes), ChartKind.DIVERGING_BAR), encoding="utf-8"
        )
    else:
        print(f"{PREFIX} Single frame: gain/loss report skipped", file=sys.stderr)

    print(f"{PREFIX} Reports written to: {out}", file=sys.stderr)
    return EXIT_OK


# ─── bench ────────────────────────────────────────────────────────────────

DEFAULT_BENCH_DIMS = {
    "core-size": "20,10,15",
    "density": "30,15,10",
    "time": "50,10,30",
}


def _bench_settings(args: argparse.Namespace) -> BenchSettings:
    dims_text = args.dims or DEFAULT_BENCH_DIMS[args.bench_kind]
    if args.bench_kind == "time":
        parts = _parse_ints(dims_text, "Dims")
        if args.slots_count is not None:
            parts = parts[:2] + [args.slots_count]
        dims = parse_dims(",".join(str(p) for p in parts))
    else:
        dims = parse_dims(dims_text)
    seeds = tuple(_parse_ints(args.seeds, "Seeds"))
    if not seeds:
        raise InputError("Bench needs at least one seed")
    return BenchSettings(
        dims=dims,
        seeds=seeds,
        error_threshold=args.eps,
        max_sweeps=args.max_sweeps,
        restarts=args.restarts,
        noise=args.noise,
    )


def cmd_bench(args: argparse.Namespace) -> int:
    settings = _bench_settings(args)
    kind = args.bench_kind
    if kind == "core-size":
        ranks_list = [Ranks.parse(text) for text in args.ranks_list]
        result = run_bench(kind, settings, Path(args.out), ranks_list=ranks_list)
    elif kind == "density":
        densities = _parse_floats(args.densities, "Densities")
        for d in densities:
            if not 0.0 <= d <= 1.0:
                raise ConfigError(f"Density must lie in [0, 1], got {d}")
        result = run_bench(kind, settings, Path(args.out), densities=densities,
                           ranks=Ranks.parse(args.ranks))
    else:
        result = run_bench(kind, settings, Path(args.out), ranks=Ranks.parse(args.ranks))
    print(f"{PREFIX} {kind} bench: {len(result.rows)} rows written to {args.out}", file=sys.stderr)
    return EXIT_OK


# ─── binarize / synth / serve ─────────────────────────────────────────────


def cmd_binarize(args: argparse.Namespace) -> int:
    raw = load_raw_csv(Path(args.raw))
    thresholds = load_thresholds_csv(Path(args.thresholds))
    slot = binarize(raw, thresholds)
    save_slot_csv(slot, Path(args.out))
    print(f"{PREFIX} Slot {slot.rows}x{slot.cols} written to: {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    densities = _parse_floats(args.densities, "Densities")
    if len(densities) != 3:
        raise ConfigError(f"Densities must be pA,pB,pC, got {args.densities!r}")
    spec = PlantedSpec(
        dims=parse_dims(args.dims),
        ranks=Ranks.parse(args.ranks),
        densities=tuple(densities),
        core_density=args.core_density,
        noise=args.noise,
        seed=args.seed,
        drift=parse_drift(args.drift),
    )
    slots, truth = generate_planted(spec)
    out = Path(args.out)
    (out / "slots").mkdir(parents=True, exist_ok=True)
    save_tensor_btt(BoolTensor3.from_slices(slots), out / "tensor.btt")
    for k, slot in enumerate(slots):
        save_slot_csv(slot, out / "slots" / f"slot_{k:04d}.csv")
    save_model(truth, out / "truth", kind="batch")
    print(f"{PREFIX} Planted data written to: {out}", file=sys.stderr)
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    from .api import start_server

    start_server(host=args.host, port=args.port)
    return EXIT_OK


# ─── parser ───────────────────────────────────────────────────────────────


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps", type=float, default=DEFAULT_ERROR_THRESHOLD,
                   help=f"Error threshold (default: {DEFAULT_ERROR_THRESHOLD}).")
    p.add_argument("--seed", type=int, default=0, help="Base seed (default: 0).")
    p.add_argument("--error", choices=["rel", "abs"], default="rel",
                   help="Compare relative or absolute error with --eps (default: rel).")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boolcd",
        description="boolcd: Boolean Tucker factorization for change detection",
    )
    parser.add_argument("--version", action="version", version=f"boolcd {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for lifecycle events, -vv for per-sweep detail.")
    parser.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("factorize", help="Batch-fit a tensor.")
    p.add_argument("--input", required=True, help="Input .btt tensor.")
    p.add_argument("--ranks", required=True, help="R1,R2,R3 or 'auto'.")
    p.add_argument("--max-sweeps", type=int, default=DEFAULT_MAX_SWEEPS)
    p.add_argument("--stall-sweeps", type=int, default=DEFAULT_STALL_SWEEPS)
    p.add_argument("--restarts", type=int, default=1, help="Best-of-N restarts (default: 1).")
    p.add_argument("--init-strategy", choices=["fixed", "density-matched"], default="fixed")
    p.add_argument("--out", required=True, help="Output model directory.")
    _add_fit_flags(p)
    p.set_defaults(handler=cmd_factorize)

    p = sub.add_parser("stream", help="Incrementally fit a directory of slot CSVs.")
    p.add_argument("--slots", required=True, help="Directory of slot CSVs (lexicographic order).")
    p.add_argument("--ranks", required=True, help="R1,R2,R3")
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    weights = p.add_mutually_exclusive_group()
    weights.add_argument("--decay", type=float, help=f"Decay λ (default: {DEFAULT_DECAY}).")
    weights.add_argument("--weight", help="const:<λ>, decay:<λ> or seasonal:<period>:<w1,...>")
    weights.add_argument("--half-life", type=float, help="Decay with this half-life in slots.")
    p.add_argument("--inner-sweeps", type=int, default=DEFAULT_INNER_SWEEPS)
    p.add_argument("--out", required=True, help="Output model directory.")
    _add_fit_flags(p)
    p.set_defaults(handler=cmd_stream)

    p = sub.add_parser("report", help="Change reports from a model directory.")
    p.add_argument("--model", required=True)
    p.add_argument("--frames", type=int, required=True, help="Slots per frame.")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_report)

    p = sub.add_parser("bench", help="Benchmark sweeps on planted data.")
    bench_sub = p.add_subparsers(dest="bench_kind", required=True)
    for kind, help_text in (
        ("core-size", "Error against core size."),
        ("density", "Error against factor density."),
        ("time", "Cumulative time, incremental vs batch refit."),
    ):
        b = bench_sub.add_parser(kind, help=help_text)
        b.add_argument("--dims", default=None, help="O,F,T")
        b.add_argument("--seeds", default="1,2,3,4,5")
        b.add_argument("--out", required=True)
        b.add_argument("--eps", type=float, default=DEFAULT_ERROR_THRESHOLD)
        b.add_argument("--max-sweeps", type=int, default=50)
        b.add_argument("--restarts", type=int, default=1)
        b.add_argument("--noise", type=float, default=0.05)
        if kind == "core-size":
            b.add_argument("--ranks-list", nargs="+", required=True, help="R1,R2,R3 ...")
        else:
            b.add_argument("--ranks", default="2,2,2" if kind == "time" else "3,3,3")
        if kind == "density":
            b.add_argument("--densities", required=True, help="d1,d2,...")
        if kind == "time":
            b.add_argument("--slots-count", type=int, default=None)
        b.set_defaults(handler=cmd_bench)

    p = sub.add_parser("binarize", help="Threshold raw measurements into a slot CSV.")
    p.add_argument("--raw", required=True)
    p.add_argument("--thresholds", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_binarize)

    p = sub.add_parser("synth", help="Write planted synthetic data.")
    p.add_argument("--dims", required=True, help="O,F,T")
    p.add_argument("--ranks", required=True, help="R1,R2,R3")
    p.add_argument("--densities", default="0.3,0.3,0.3", help="pA,pB,pC")
    p.add_argument("--core-density", type=float, default=0.3)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--drift", default="stationary", help="stationary | step:<s> | toggle:<o>,<f>")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("serve", help="Run the HTTP API.")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(handler=cmd_serve)

    return parser


def _configure_logging(verbose: int, quiet: bool) -> None:
    if quiet or verbose == 0:
        set_verbosity(Verbosity.QUIET)
    elif verbose == 1:
        set_verbosity(Verbosity.NORMAL)
    else:
        set_verbosity(Verbosity.VERBOSE)
    logging.basicConfig(
        level=logging.DEBUG,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    _configure_logging(args.verbose, args.quiet)

    try:
        return args.handler(args)
    except (ConfigError, InputError) as exc:
        print(f"boolcd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ShapeError, CapacityError, StateError, OSError) as exc:
        print(f"boolcd: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

"""
boolcd Test Suite - Command Line

Runs ``main(argv)`` end to end on small planted data.
"""

import csv

import numpy as np
import pytest

import boolcd
from boolcd import __version__
from boolcd.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, build_parser, main, parse_dims
from boolcd.config import ExponentialDecay, Ranks, StreamConfig
from boolcd.errors import ConfigError
from boolcd.incremental import run_stream
from boolcd.ingestion import load_slot_csv, load_slots_dir, load_tensor_btt
from boolcd.logs import Verbosity, get_verbosity, set_verbosity
from boolcd.model_store import load_covariance, load_model
from boolcd.reports import FEATURE_VARIANCE_HEADER, FrameSpec, class_proportions


def read_csv(path):
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def planted_dir(tmp_path):
    out = tmp_path / "planted"
    code = main([
        "synth", "--dims", "6,5,6", "--ranks", "2,2,2", "--densities", "0.4,0.4,0.5",
        "--noise", "0.05", "--seed", "3", "--out", str(out),
    ])
    assert code == EXIT_OK
    return out


def test_version(capsys):
    assert main(["--version"]) == EXIT_OK
    assert __version__ in capsys.readouterr().out


def test_missing_command_is_usage_error():
    assert main([]) == EXIT_USAGE


def test_parse_dims():
    assert parse_dims("3,4,5") == (3, 4, 5)
    with pytest.raises(ConfigError):
        parse_dims("3,4")
    with pytest.raises(ConfigError):
        parse_dims("3,0,5")


def test_synth_layout(planted_dir):
    """tensor.btt, one CSV per slot and the truth model"""
    x = load_tensor_btt(planted_dir / "tensor.btt")
    assert x.dims == (6, 5, 6)
    slot_files = sorted((planted_dir / "slots").iterdir())
    assert [p.name for p in slot_files][:2] == ["slot_0000.csv", "slot_0001.csv"]
    assert len(slot_files) == 6
    assert load_slot_csv(slot_files[1]) == x.slice_time(1)
    truth, manifest = load_model(planted_dir / "truth")
    assert truth.dims == (6, 5, 6)
    assert manifest.kind == "batch"


def test_factorize(planted_dir, tmp_path, capsys):
    out = tmp_path / "model"
    code = main([
        "factorize", "--input", str(planted_dir / "tensor.btt"), "--ranks", "2,2,2",
        "--restarts", "2", "--out", str(out),
    ])
    assert code == EXIT_OK
    summary = capsys.readouterr().out.strip()
    assert summary.startswith("error=")
    assert "sweeps=" in summary and "status=" in summary
    model, manifest = load_model(out)
    assert model.ranks.as_tuple() == (2, 2, 2)
    assert manifest.config["ranks"] == [2, 2, 2]
    assert (out / "trace.csv").read_text().startswith("sweep,mismatches,relative,millis\n")


def test_factorize_auto_ranks(planted_dir, tmp_path):
    out = tmp_path / "auto"
    code = main([
        "factorize", "--input", str(planted_dir / "tensor.btt"), "--ranks", "auto",
        "--max-sweeps", "10", "--out", str(out),
    ])
    assert code == EXIT_OK
    lines = (out / "ranks.csv").read_text().splitlines()
    assert lines[0] == "ranks,mismatches,relative"
    assert lines[1].startswith('"1,1,1",')


def test_factorize_bad_ranks(planted_dir, tmp_path, capsys):
    """Ranks over the tensor dims are a usage error"""
    code = main([
        "factorize", "--input", str(planted_dir / "tensor.btt"), "--ranks", "9,2,2",
        "--out", str(tmp_path / "m"),
    ])
    assert code == EXIT_USAGE
    assert capsys.readouterr().err.startswith("boolcd: error:")


def test_factorize_missing_input(tmp_path):
    code = main([
        "factorize", "--input", str(tmp_path / "absent.btt"), "--ranks", "1,1,1",
        "--out", str(tmp_path / "m"),
    ])
    assert code == EXIT_DATA


def test_factorize_malformed_tensor(tmp_path):
    bad = tmp_path / "bad.btt"
    bad.write_text("btt 1 2 2 2\n0 0 5\n")
    code = main([
        "factorize", "--input", str(bad), "--ranks", "1,1,1", "--out", str(tmp_path / "m"),
    ])
    assert code == EXIT_DATA


def test_factorize_undecodable_tensor(tmp_path, capsys):
    """Bytes that are not UTF-8 are a data error with the offending line"""
    bad = tmp_path / "bad.btt"
    bad.write_bytes(b"\xff\xfe btt 1 2 2 2\n")
    code = main([
        "factorize", "--input", str(bad), "--ranks", "1,1,1", "--out", str(tmp_path / "m"),
    ])
    assert code == EXIT_DATA
    err = capsys.readouterr().err
    assert "UTF-8" in err and "line 1" in err


def test_synth_negative_seed(tmp_path):
    code = main([
        "synth", "--dims", "4,3,2", "--ranks", "1,1,1", "--seed=-1", "--out", str(tmp_path / "s"),
    ])
    assert code == EXIT_USAGE


def test_bench_negative_seed(tmp_path):
    code = main([
        "bench", "density", "--dims", "4,3,2", "--densities", "0.3", "--ranks", "1,1,1",
        "--seeds=-1", "--out", str(tmp_path / "b"),
    ])
    assert code == EXIT_USAGE


def test_stream(planted_dir, tmp_path, capsys):
    """The stream command writes the same model, trace and accumulators as run_stream"""
    out = tmp_path / "stream"
    code = main([
        "stream", "--slots", str(planted_dir / "slots"), "--ranks", "2,2,2",
        "--window", "4", "--decay", "0.8", "--out", str(out),
    ])
    assert code == EXIT_OK
    slots = [m for _, m in load_slots_dir(planted_dir / "slots")]
    config = StreamConfig(ranks=Ranks(2, 2, 2), window_w=4, time_weight=ExponentialDecay(0.8))
    state, trace = run_stream(slots, config)

    summary = capsys.readouterr().out.strip()
    assert summary.startswith(f"error={trace.final.mismatches} ")
    assert "slots=6" in summary
    met = trace.final.relative <= config.error_threshold
    assert summary.split("status=")[1] == ("converged" if met else "above_threshold")

    model, manifest = load_model(out)
    assert manifest.kind == "stream"
    assert model == state.model
    assert model.c.rows == 4
    for loaded, kept in zip(load_covariance(out), state.cov.as_tuple()):
        assert np.array_equal(loaded, kept)

    rows = read_csv(out / "trace.csv")
    assert [int(r["slot"]) for r in rows] == [2, 3, 4, 5, 6]
    assert [int(r["mismatches"]) for r in rows] == trace.mismatch_sequence()
    assert [float(r["relative"]) for r in rows] == pytest.approx(
        [r.relative for r in trace.records], abs=1e-6
    )


def test_stream_weight_flags_are_exclusive(planted_dir, tmp_path):
    code = main([
        "stream", "--slots", str(planted_dir / "slots"), "--ranks", "1,1,1",
        "--decay", "0.5", "--half-life", "3", "--out", str(tmp_path / "s"),
    ])
    assert code == EXIT_USAGE


def test_stream_seasonal_weight(planted_dir, tmp_path):
    code = main([
        "stream", "--slots", str(planted_dir / "slots"), "--ranks", "1,1,1",
        "--weight", "seasonal:2:1,0", "--out", str(tmp_path / "s"),
    ])
    assert code == EXIT_OK


def test_stream_needs_two_slots(tmp_path):
    slots = tmp_path / "slots"
    slots.mkdir()
    (slots / "only.csv").write_text("0,1\n1,0\n")
    code = main(["stream", "--slots", str(slots), "--ranks", "1,1,1", "--out", str(tmp_path / "s")])
    assert code == EXIT_USAGE


def test_report(planted_dir, tmp_path):
    """Reports on a stationary truth: no variance and no class changes"""
    out = tmp_path / "reports"
    code = main([
        "report", "--model", str(planted_dir / "truth"), "--frames", "3", "--out", str(out),
    ])
    assert code == EXIT_OK
    for name in ("feature_variance", "proportions", "gain_loss"):
        assert (out / f"{name}.svg").read_text().startswith("<?xml")

    variance = read_csv(out / "feature_variance.csv")
    assert list(variance[0]) == FEATURE_VARIANCE_HEADER
    assert len(variance) == 6 * 5 * 2
    assert {r["frame"] for r in variance} == {"0", "1"}
    assert all(float(r["value"]) == 0.0 for r in variance)

    truth, _ = load_model(planted_dir / "truth")
    expected = class_proportions(truth, FrameSpec(3)).rows()
    proportions = read_csv(out / "proportions.csv")
    assert [[r["class"], r["frame"], r["proportion"]] for r in proportions] == expected

    changes = read_csv(out / "gain_loss.csv")
    assert len(changes) == 6
    assert all(float(r["gain_pct"]) == 0.0 and float(r["loss_pct"]) == 0.0 for r in changes)
    assert all(r["new_class"] == "0" for r in changes)


def test_report_single_frame_skips_gain_loss(planted_dir, tmp_path):
    out = tmp_path / "reports"
    code = main([
        "report", "--model", str(planted_dir / "truth"), "--frames", "6", "--out", str(out),
    ])
    assert code == EXIT_OK
    assert not (out / "gain_loss.csv").exists()


def test_report_frame_too_large(planted_dir, tmp_path):
    code = main([
        "report", "--model", str(planted_dir / "truth"), "--frames", "7",
        "--out", str(tmp_path / "r"),
    ])
    assert code == EXIT_USAGE


def test_binarize(tmp_path):
    raw = tmp_path / "raw.csv"
    raw.write_text("a,b\n0.2,5\n0.9,1\n")
    thresholds = tmp_path / "thresholds.csv"
    thresholds.write_text("0.5,2\n")
    out = tmp_path / "slot.csv"
    code = main([
        "binarize", "--raw", str(raw), "--thresholds", str(thresholds), "--out", str(out),
    ])
    assert code == EXIT_OK
    assert out.read_text() == "0,1\n1,0\n"


def test_binarize_threshold_mismatch(tmp_path):
    raw = tmp_path / "raw.csv"
    raw.write_text("0.2,5\n")
    thresholds = tmp_path / "thresholds.csv"
    thresholds.write_text("0.5\n")
    code = main([
        "binarize", "--raw", str(raw), "--thresholds", str(thresholds),
        "--out", str(tmp_path / "o.csv"),
    ])
    assert code == EXIT_USAGE


def test_bench_core_size(tmp_path):
    out = tmp_path / "bench"
    code = main([
        "bench", "core-size", "--dims", "5,4,4", "--seeds", "1", "--max-sweeps", "5",
        "--ranks-list", "1,1,1", "2,2,2", "--out", str(out),
    ])
    assert code == EXIT_OK
    assert (out / "bench.csv").exists()
    assert (out / "core_size.svg").exists()


def test_bench_time_slots_count(tmp_path):
    out = tmp_path / "bench"
    code = main([
        "bench", "time", "--dims", "4,3,9", "--slots-count", "3", "--seeds", "1",
        "--max-sweeps", "5", "--ranks", "1,1,1", "--out", str(out),
    ])
    assert code == EXIT_OK
    lines = (out / "bench.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 + 2 * 2
    assert lines[1].split(",")[1] == "4x3x3"


def test_bench_bad_density(tmp_path):
    code = main([
        "bench", "density", "--densities", "0.2,1.5", "--seeds", "1", "--out", str(tmp_path / "b"),
    ])
    assert code == EXIT_USAGE


def test_verbose_flag_sets_logging(planted_dir, tmp_path):
    try:
        code = main([
            "-vv", "factorize", "--input", str(planted_dir / "tensor.btt"), "--ranks", "1,1,1",
            "--max-sweeps", "2", "--out", str(tmp_path / "m"),
        ])
        assert code == EXIT_OK
        assert get_verbosity() is Verbosity.VERBOSE
    finally:
        set_verbosity(Verbosity.QUIET)


def test_tensor_and_slots_agree(planted_dir):
    x = load_tensor_btt(planted_dir / "tensor.btt")
    stacked = np.stack(
        [load_slot_csv(p).to_dense() for p in sorted((planted_dir / "slots").iterdir())], axis=2
    )
    assert np.array_equal(x.to_dense(), stacked)


def test_banner_text_is_ascii():
    """Help and package docs print cleanly on ASCII-only terminals"""
    assert build_parser().description.isascii()
    assert boolcd.__doc__.isascii()

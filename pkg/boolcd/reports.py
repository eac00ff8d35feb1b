"""
Change reports derived from a fitted model.

- feature_variance: per (object, feature, frame) change score 4p(1-p) on the
  reconstruction, where p is the share of the frame's slots with the cell set
- class_proportions: per-frame share of core activity held by each object
- gain_loss: first-frame to last-frame change of each class's share

All reports are pure functions of their inputs; CSV output is deterministic.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .batch_tucker import TuckerModel
from .errors import ConfigError, InputError
from .logs import get_logger
from .svg import ChartData, Series
from .tensor_core import BoolTensor3


logger = get_logger(__name__)

# Floor for gain/loss denominators
MACHINE_FLOOR = float(np.finfo(float).eps)

VALUE_FORMAT = "{:.9f}"

FEATURE_VARIANCE_HEADER = ["object", "feature", "frame", "value"]
PROPORTIONS_HEADER = ["class", "frame", "proportion"]
GAIN_LOSS_HEADER = ["class", "gain_pct", "loss_pct", "new_class"]


@dataclass(frozen=True)
class FrameSpec:
    """
    Consecutive runs of ``slots_per_frame`` slots; the last may be short.

    When labels are given there is one frame per label. Frames past the end
    of the data are empty.
    """

    slots_per_frame: int
    labels: Optional[Tuple[str, ...]] = None

    def validate(self, n_slots: int) -> None:
        if self.slots_per_frame < 1:
            raise ConfigError(f"slots_per_frame must be >= 1, got {self.slots_per_frame}")
        if self.slots_per_frame > n_slots:
            raise ConfigError(
                f"Frame of {self.slots_per_frame} slots is larger than "
                f"the {n_slots} slots available"
            )
        needed = math.ceil(n_slots / self.slots_per_frame)
        if self.labels is not None and len(self.labels) < needed:
            raise ConfigError(f"{needed} frames need labels, got {len(self.labels)}")

    def bounds(self, n_slots: int) -> List[Tuple[str, int, int]]:
        """(label, start, stop) per frame."""
        self.validate(n_slots)
        count = math.ceil(n_slots / self.slots_per_frame)
        if self.labels is not None:
            count = len(self.labels)
        out = []
        for k in range(count):
            start = min(k * self.slots_per_frame, n_slots)
            stop = min(start + self.slots_per_frame, n_slots)
            label = self.labels[k] if self.labels is not None else str(k)
            out.append((label, start, stop))
        return out


def _frames_with_slots(frames: FrameSpec, n_slots: int, report: str) -> Tuple[list, list]:
    kept, skipped = [], []
    for label, start, stop in frames.bounds(n_slots):
        if stop > start:
            kept.append((label, start, stop))
        else:
            skipped.append(label)
            logger.warning(
                "Empty frame skipped",
                extra={"event": "report_frame_skipped", "report": report, "frame": label},
            )
    return kept, skipped


@dataclass(frozen=True, eq=False)
class FeatureVarianceReport:
    """values[o, f, k] in [0, 1] for kept frame k."""

    values: np.ndarray
    frame_labels: Tuple[str, ...]
    skipped: Tuple[str, ...] = ()

    def rows(self) -> List[List[str]]:
        n_o, n_f, _ = self.values.shape
        out = []
        for o in range(n_o):
            for f in range(n_f):
                for k, label in enumerate(self.frame_labels):
                    out.append([str(o), str(f), label, VALUE_FORMAT.format(self.values[o, f, k])])
        return out


@dataclass(frozen=True, eq=False)
class ClassProportionReport:
    """proportions[o, k]; columns sum to 1 except for inactive frames."""

    proportions: np.ndarray
    frame_labels: Tuple[str, ...]
    inactive: Tuple[str, ...] = ()
    skipped: Tuple[str, ...] = ()

    @property
    def n_classes(self) -> int:
        return self.proportions.shape[0]

    def rows(self) -> List[List[str]]:
        out = []
        for o in range(self.n_classes):
            for k, label in enumerate(self.frame_labels):
                out.append([str(o), label, VALUE_FORMAT.format(self.proportions[o, k])])
        return out


@dataclass(frozen=True)
class GainLossRow:
    class_index: int
    gain_pct: Optional[float]
    loss_pct: float
    new_class: bool


@dataclass(frozen=True)
class GainLossReport:
    rows: Tuple[GainLossRow, ...]

    def table(self) -> List[List[str]]:
        out = []
        for row in self.rows:
            gain = "" if row.gain_pct is None else VALUE_FORMAT.format(row.gain_pct)
            out.append([
                str(row.class_index),
                gain,
                VALUE_FORMAT.format(row.loss_pct),
                "1" if row.new_class else "0",
            ])
        return out


def feature_variance(
    source: Union[TuckerModel, BoolTensor3],
    frames: FrameSpec,
) -> FeatureVarianceReport:
    """
    Normalised Bernoulli variance of each reconstructed cell within each frame.

    Args:
        source: Fitted model (reconstructed first) or a reconstruction
        frames: Frame windowing over the time axis
    """
    xhat = source.reconstruct() if isinstance(source, TuckerModel) else source
    dense = xhat.to_dense().astype(np.float64)
    kept, skipped = _frames_with_slots(frames, xhat.dim_t, "feature_variance")
    values = np.zeros((xhat.dim_o, xhat.dim_f, len(kept)), dtype=np.float64)
    for k, (_, start, stop) in enumerate(kept):
        p = dense[:, :, start:stop].mean(axis=2)
        values[:, :, k] = 4.0 * p * (1.0 - p)
    return FeatureVarianceReport(
        values=values,
        frame_labels=tuple(label for label, _, _ in kept),
        skipped=tuple(skipped),
    )


def class_activity(model: TuckerModel) -> np.ndarray:
    """activity[o, t]: active core cells (r1, r2, r3) with A[o, r1] and C[t, r3] set."""
    core_counts = model.core.to_dense().astype(np.int64).sum(axis=1)
    a = model.a.to_dense().astype(np.int64)
    c = model.c.to_dense().astype(np.int64)
    return a @ core_counts @ c.T


def class_proportions(model: TuckerModel, frames: FrameSpec) -> ClassProportionReport:
    """
    Share of core activity per object in each frame.

    Frames with no activity at all give an all-zero column and are listed in
    ``inactive``.
    """
    activity = class_activity(model).astype(np.float64)
    kept, skipped = _frames_with_slots(frames, model.c.rows, "class_proportions")
    proportions = np.zeros((model.a.rows, len(kept)), dtype=np.float64)
    inactive = []
    for k, (label, start, stop) in enumerate(kept):
        means = activity[:, start:stop].mean(axis=1)
        total = means.sum()
        if total > 0:
            proportions[:, k] = means / total
        else:
            inactive.append(label)
            logger.info("Frame without activity", extra={"frame": label})
    return ClassProportionReport(
        proportions=proportions,
        frame_labels=tuple(label for label, _, _ in kept),
        inactive=tuple(inactive),
        skipped=tuple(skipped),
    )


def gain_loss(report: ClassProportionReport) -> GainLossReport:
    """
    Relative change of each class's share from the first to the last frame.

    A class absent from the first frame but present in the last is flagged
    as new instead of given a percentage.
    """
    if len(report.frame_labels) < 2:
        raise InputError(
            f"Gain/loss needs at least 2 frames, got {len(report.frame_labels)}"
        )
    rows = []
    for o in range(report.n_classes):
        first = float(report.proportions[o, 0])
        last = float(report.proportions[o, -1])
        delta = last - first
        if first == 0.0:
            if last > 0.0:
                rows.append(GainLossRow(o, None, 0.0, True))
            else:
                rows.append(GainLossRow(o, 0.0, 0.0, False))
            continue
        denominator = max(first, MACHINE_FLOOR)
        gain = 100.0 * (max(delta, 0.0) / denominator)
        loss = 100.0 * (max(-delta, 0.0) / denominator)
        rows.append(GainLossRow(o, gain, loss, False))
    return GainLossReport(tuple(rows))


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_feature_variance_csv(report: FeatureVarianceReport, path: Path) -> None:
    _write_csv(path, FEATURE_VARIANCE_HEADER, report.rows())


def write_proportions_csv(report: ClassProportionReport, path: Path) -> None:
    _write_csv(path, PROPORTIONS_HEADER, report.rows())


def write_gain_loss_csv(report: GainLossReport, path: Path) -> None:
    _write_csv(path, GAIN_LOSS_HEADER, report.table())


# Objects drawn in the variance chart
MAX_CHART_OBJECTS = 10


def variance_chart(report: FeatureVarianceReport) -> ChartData:
    """One line per object: mean feature variance per frame."""
    n_objects = min(report.values.shape[0], MAX_CHART_OBJECTS)
    series = tuple(
        Series(f"object {o}", tuple(float(v) for v in report.values[o].mean(axis=0)))
        for o in range(n_objects)
    )
    return ChartData(
        title="Feature variance per frame",
        categories=report.frame_labels,
        series=series,
        x_label="frame",
        y_label="normalised variance",
    )


def proportions_chart(report: ClassProportionReport) -> ChartData:
    series = tuple(
        Series(f"class {o}", tuple(float(v) for v in report.proportions[o]))
        for o in range(report.n_classes)
    )
    return ChartData(
        title="Class proportions per frame",
        categories=report.frame_labels,
        series=series,
        x_label="frame",
        y_label="proportion",
    )


def gain_loss_chart(report: GainLossReport) -> ChartData:
    """Gains up, losses down; new classes are labelled and drawn at 0."""
    categories, values = [], []
    for row in report.rows:
        if row.new_class:
            categories.append(f"{row.class_index} (new)")
            values.append(0.0)
        else:
            categories.append(str(row.class_index))
            values.append(row.gain_pct - row.loss_pct)
    return ChartData(
        title="Overall gain/loss of classes",
        categories=tuple(categories),
        series=(Series("change %", tuple(values)),),
        x_label="class",
        y_label="percent",
    )

"""
Model directory persistence.

Layout written by ``factorize`` and ``stream``:

    <dir>/model.json      manifest (format version, kind, dims, ranks, config)
    <dir>/core.btt        core tensor
    <dir>/A.csv B.csv C.csv
    <dir>/cov_CA.csv cov_CB.csv cov_CC.csv   (stream models only)

Manifests are checked with semantic versioning: a different major
format version cannot be read. A directory without a manifest is read as
format 1.0.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from packaging import version as pkg_version

from .batch_tucker import FitTrace, TuckerModel
from .errors import DataError, ParseError, ShapeError
from .ingestion import (
    decode_text,
    load_raw_csv,
    load_slot_csv,
    load_tensor_btt,
    save_slot_csv,
    save_tensor_btt,
)
from .logs import get_logger
from .tensor_core import BoolMatrix


logger = get_logger(__name__)

FORMAT_VERSION = "1.0"
MANIFEST_NAME = "model.json"
COVARIANCE_FILES = ("cov_CA.csv", "cov_CB.csv", "cov_CC.csv")


@dataclass
class ModelManifest:
    """Metadata stored next to a model"""

    format_version: str = FORMAT_VERSION
    kind: str = "batch"  # "batch" or "stream"
    dims: Tuple[int, int, int] = (0, 0, 0)
    ranks: Tuple[int, int, int] = (0, 0, 0)
    config: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "kind": self.kind,
            "dims": list(self.dims),
            "ranks": list(self.ranks),
            "config": self.config,
        }

    @staticmethod
    def from_dict(data: dict) -> "ModelManifest":
        return ModelManifest(
            format_version=data.get("format_version", FORMAT_VERSION),
            kind=data.get("kind", "batch"),
            dims=tuple(data.get("dims", (0, 0, 0))),
            ranks=tuple(data.get("ranks", (0, 0, 0))),
            config=data.get("config", {}),
        )


def parse_version(version_str: str) -> Tuple[int, int]:
    """(major, minor) of a format version string"""
    try:
        v = pkg_version.parse(version_str)
    except pkg_version.InvalidVersion as exc:
        raise DataError(f"Invalid format version {version_str!r}") from exc
    return (v.major, v.minor)


def is_compatible(artifact_version: str, current_version: str = FORMAT_VERSION) -> bool:
    """Same major format version is readable."""
    return parse_version(artifact_version)[0] == parse_version(current_version)[0]


def _matrix_path(directory: Path, name: str) -> Path:
    return directory / f"{name}.csv"


def save_model(
    model: TuckerModel,
    directory: Path,
    kind: str = "batch",
    config: Optional[Dict[str, Any]] = None,
) -> ModelManifest:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_tensor_btt(model.core, directory / "core.btt")
    for name, m in (("A", model.a), ("B", model.b), ("C", model.c)):
        save_slot_csv(m, _matrix_path(directory, name))
    manifest = ModelManifest(
        kind=kind,
        dims=model.dims,
        ranks=model.ranks.as_tuple(),
        config=config or {},
    )
    with (directory / MANIFEST_NAME).open("w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    logger.debug("Model saved", extra={"directory": str(directory), "kind": kind})
    return manifest


def load_manifest(directory: Path) -> ModelManifest:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        return ModelManifest()
    try:
        data = json.loads(decode_text(path))
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"Malformed {MANIFEST_NAME}: {exc.msg}", line=exc.lineno, column=exc.colno
        ) from exc
    manifest = ModelManifest.from_dict(data)
    if not is_compatible(manifest.format_version):
        raise DataError(
            f"Model format {manifest.format_version} cannot be read by format {FORMAT_VERSION}"
        )
    return manifest


def _load_factor(directory: Path, name: str, rank: int) -> BoolMatrix:
    m = load_slot_csv(_matrix_path(directory, name))
    if m.rows == 0:
        # a CSV without rows carries no column count
        return BoolMatrix.zeros(0, rank)
    return m


def load_model(directory: Path) -> Tuple[TuckerModel, ModelManifest]:
    """
    Read a model directory.

    Raises:
        DataError: unreadable manifest version or inconsistent components
    """
    directory = Path(directory)
    manifest = load_manifest(directory)
    core = load_tensor_btt(directory / "core.btt")
    r1, r2, r3 = core.dims
    a = _load_factor(directory, "A", r1)
    b = _load_factor(directory, "B", r2)
    c = _load_factor(directory, "C", r3)
    try:
        model = TuckerModel(core, a, b, c)
    except ShapeError as exc:
        raise DataError(f"Inconsistent model in {directory}: {exc}") from exc
    return model, manifest


def save_covariance(covariances, directory: Path) -> None:
    """Write CA, CB, CC as real-valued CSV matrices."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, matrix in zip(COVARIANCE_FILES, covariances):
        with (directory / name).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerows([[repr(float(v)) for v in row] for row in np.asarray(matrix)])


def load_covariance(directory: Path) -> List[np.ndarray]:
    return [load_raw_csv(Path(directory) / name) for name in COVARIANCE_FILES]


def save_trace(trace: FitTrace, path: Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(trace.header())
        writer.writerows(trace.to_rows())

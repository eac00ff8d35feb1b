"""
Getting data in and out: binarization of raw measurements, slot CSV files
and ``.btt`` tensor files.

.btt format (text, whitespace separated, LF or CRLF):

    btt 1 <O> <F> <T>
    <o> <f> <t>        one zero-based triple per 1-cell, any order

Unlisted cells are 0 and repeated triples are harmless. Files are written
with LF line endings and triples in (o, f, t) order.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from .errors import ConfigError, DataError, ParseError, ShapeError
from .logs import get_logger
from .tensor_core import BoolMatrix, BoolTensor3


logger = get_logger(__name__)

BTT_MAGIC = "btt"
BTT_VERSION = "1"


@dataclass(frozen=True)
class ThresholdSpec:
    """One threshold per feature column; a value >= its threshold is present."""

    thresholds: Tuple[float, ...]

    def __post_init__(self) -> None:
        for j, value in enumerate(self.thresholds):
            if not math.isfinite(value):
                raise ConfigError(f"Threshold for feature {j} is not finite: {value}")

    def __len__(self) -> int:
        return len(self.thresholds)


def binarize(raw: np.ndarray, thresholds: ThresholdSpec) -> BoolMatrix:
    """
    out[i, j] = 1 iff raw[i, j] >= thresholds[j].
    """
    values = np.asarray(raw, dtype=np.float64)
    if values.ndim != 2:
        raise ShapeError(f"Raw measurements must be 2D, got shape {values.shape}")
    if values.shape[1] != len(thresholds):
        raise ConfigError(
            f"{len(thresholds)} thresholds given for {values.shape[1]} feature columns"
        )
    bad = np.argwhere(~np.isfinite(values))
    if bad.size:
        i, j = (int(v) for v in bad[0])
        raise DataError(f"Raw value at object {i}, feature {j} is not finite: {values[i, j]}")
    limits = np.asarray(thresholds.thresholds, dtype=np.float64)
    return BoolMatrix.from_dense(values >= limits[None, :])


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def decode_text(path: Path) -> str:
    """File content as UTF-8 text; undecodable bytes are a ParseError."""
    data = Path(path).read_bytes()
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        line = data.count(b"\n", 0, exc.start) + 1
        raise ParseError(
            f"Invalid UTF-8 byte 0x{data[exc.start]:02x} in {Path(path).name}", line=line
        ) from exc


def _read_rows(path: Path) -> List[Tuple[int, List[str]]]:
    """Non-blank CSV rows with their 1-based line numbers, header dropped."""
    reader = csv.reader(io.StringIO(decode_text(path), newline=""))
    rows = [
        (line_no, [cell.strip() for cell in row])
        for line_no, row in enumerate(reader, start=1)
        if row and any(cell.strip() for cell in row)
    ]
    if rows and not all(_is_number(cell) for cell in rows[0][1]):
        rows = rows[1:]
    return rows


def _check_width(rows: List[Tuple[int, List[str]]]) -> int:
    width = len(rows[0][1]) if rows else 0
    for line_no, cells in rows:
        if len(cells) != width:
            raise ParseError(f"Ragged row: {len(cells)} cells, expected {width}", line=line_no)
    return width


def load_raw_csv(path: Path) -> np.ndarray:
    """Real-valued O x F measurements; an optional header row is skipped."""
    rows = _read_rows(path)
    width = _check_width(rows)
    out = np.zeros((len(rows), width), dtype=np.float64)
    for i, (line_no, cells) in enumerate(rows):
        for j, cell in enumerate(cells):
            try:
                out[i, j] = float(cell)
            except ValueError as exc:
                raise ParseError(f"Not a number: {cell!r}", line=line_no, column=j + 1) from exc
    return out


def load_thresholds_csv(path: Path) -> ThresholdSpec:
    """Thresholds listed across one row or down one column."""
    raw = load_raw_csv(path)
    if raw.size and 1 not in raw.shape:
        raise ParseError(f"Thresholds must form a single row or column, got {raw.shape}")
    return ThresholdSpec(tuple(float(v) for v in raw.reshape(-1)))


def load_slot_csv(path: Path) -> BoolMatrix:
    """O x F matrix of 0/1 cells; an optional header row is skipped."""
    rows = _read_rows(path)
    width = _check_width(rows)
    out = np.zeros((len(rows), width), dtype=np.uint8)
    for i, (line_no, cells) in enumerate(rows):
        for j, cell in enumerate(cells):
            if cell not in ("0", "1"):
                raise ParseError(f"Cell must be 0 or 1, got {cell!r}", line=line_no, column=j + 1)
            out[i, j] = 1 if cell == "1" else 0
    return BoolMatrix.from_dense(out)


def save_slot_csv(m: BoolMatrix, path: Path) -> None:
    dense = m.to_dense()
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        for row in dense:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def load_slots_dir(directory: Path, pattern: str = "*.csv") -> List[Tuple[Path, BoolMatrix]]:
    """
    Slot files of a directory in lexicographic file-name order.

    Raises:
        ShapeError: naming the first file whose shape differs from the first slot
    """
    paths = sorted(Path(directory).glob(pattern), key=lambda p: p.name)
    slots = []
    for path in paths:
        m = load_slot_csv(path)
        if slots and m.shape != slots[0][1].shape:
            raise ShapeError(
                f"Slot file {path.name} has shape {m.shape}, expected {slots[0][1].shape}"
            )
        slots.append((path, m))
    logger.debug("Slots loaded", extra={"directory": str(directory), "count": len(slots)})
    return slots


def _parse_ints(tokens: Sequence[str], line_no: int) -> List[int]:
    out = []
    for col, token in enumerate(tokens, start=1):
        try:
            out.append(int(token))
        except ValueError as exc:
            raise ParseError(f"Not an integer: {token!r}", line=line_no, column=col) from exc
    return out


def load_tensor_btt(path: Path) -> BoolTensor3:
    lines = decode_text(path).splitlines()
    if not lines:
        raise ParseError("Empty .btt file: missing header", line=1)
    header = lines[0].split()
    if len(header) != 5 or header[0] != BTT_MAGIC or header[1] != BTT_VERSION:
        raise ParseError(f"Malformed header {lines[0]!r}, expected 'btt 1 <O> <F> <T>'", line=1)
    dims = _parse_ints(header[2:], 1)
    if min(dims) < 0:
        raise ParseError(f"Negative dimension in header {lines[0]!r}", line=1)

    dense = np.zeros(dims, dtype=np.uint8)
    for line_no, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 3:
            raise ParseError(f"Expected 'o f t', got {line!r}", line=line_no)
        index = _parse_ints(tokens, line_no)
        for col, (value, bound) in enumerate(zip(index, dims), start=1):
            if not 0 <= value < bound:
                raise ParseError(
                    f"Index {value} outside [0, {bound})", line=line_no, column=col
                )
        dense[tuple(index)] = 1
    return BoolTensor3.from_dense(dense)


def save_tensor_btt(x: BoolTensor3, path: Path) -> None:
    o, f, t = x.dims
    lines = [f"{BTT_MAGIC} {BTT_VERSION} {o} {f} {t}"]
    lines.extend(f"{i} {j} {k}" for i, j, k in np.argwhere(x.to_dense()))
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")

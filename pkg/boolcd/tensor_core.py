"""
Bit-packed Boolean matrices and 3-order tensors, and the Boolean-arithmetic
kernels the factorizations are built from.

Storage layout:
- BoolMatrix: one row of uint64 words per matrix row; column j lives in word
  j // 64 at bit j % 64. Padding bits past ``cols`` are always 0.
- BoolTensor3: the cells flattened in (o, f, t) order with o fastest, packed
  into a single run of uint64 words.

Unfoldings follow the Kolda-Bader convention: the lower-numbered remaining
mode varies fastest along the columns.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Sequence, Tuple

import numpy as np

from .errors import CapacityError, DataError, ShapeError


WORD_BITS = 64
# Upper bound on cells of any dense intermediate (kronecker products etc.)
MAX_CELLS = 1 << 31

# SWAR popcount masks
_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


def popcount64(words: np.ndarray) -> np.ndarray:
    """Per-word count of set bits of a uint64 array."""
    x = np.asarray(words, dtype=np.uint64)
    x = x - ((x >> np.uint64(1)) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return (x * _H01) >> np.uint64(56)


def count_bits(words: np.ndarray) -> int:
    """Total set bits across a uint64 array."""
    if words.size == 0:
        return 0
    return int(popcount64(words).sum())


def words_for(n_bits: int) -> int:
    return (n_bits + WORD_BITS - 1) // WORD_BITS


def pack_rows(dense: np.ndarray) -> np.ndarray:
    """Pack a 2D 0/1 array into rows of little-endian-bit uint64 words."""
    rows, cols = dense.shape
    n_words = words_for(cols)
    padded = np.zeros((rows, n_words * WORD_BITS), dtype=np.uint8)
    padded[:, :cols] = dense
    packed = np.packbits(padded, axis=1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64)


def unpack_rows(bits: np.ndarray, cols: int) -> np.ndarray:
    """Inverse of pack_rows; returns a uint8 array of shape (rows, cols)."""
    rows, n_words = bits.shape
    as_bytes = np.ascontiguousarray(bits.astype("<u8")).view(np.uint8)
    as_bytes = as_bytes.reshape(rows, n_words * 8)
    return np.unpackbits(as_bytes, axis=1, bitorder="little")[:, :cols]


def _as_binary(array: np.ndarray, what: str) -> np.ndarray:
    arr = np.asarray(array)
    if arr.dtype == np.bool_:
        return arr.astype(np.uint8)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise DataError(f"{what} cells must be 0 or 1")
    return arr.astype(np.uint8)


def _padding_mask(n_bits: int) -> np.uint64:
    """Mask of valid bits in the last word for a run of n_bits."""
    rem = n_bits % WORD_BITS
    if rem == 0:
        return np.uint64(0xFFFFFFFFFFFFFFFF)
    return np.uint64((1 << rem) - 1)


def _freeze(bits: np.ndarray) -> np.ndarray:
    bits = np.array(bits, dtype=np.uint64, copy=True)
    bits.flags.writeable = False
    return bits


@dataclass(frozen=True, eq=False)
class BoolMatrix:
    """
    Dense bit-packed binary matrix; immutable after construction.
    """

    rows: int
    cols: int
    bits: np.ndarray

    def __post_init__(self) -> None:
        if self.rows < 0 or self.cols < 0:
            raise ShapeError(f"Negative matrix shape ({self.rows}, {self.cols})")
        expected = (self.rows, words_for(self.cols))
        if self.bits.shape != expected:
            raise ShapeError(f"Packed storage {self.bits.shape} does not match {expected}")
        bits = _freeze(self.bits)
        if self.rows and self.cols % WORD_BITS:
            if np.any(bits[:, -1] & ~_padding_mask(self.cols)):
                raise DataError("Padding bits beyond the last column must be 0")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_dense(cls, array) -> "BoolMatrix":
        arr = _as_binary(array, "Matrix")
        if arr.ndim != 2:
            raise ShapeError(f"Expected a 2D array, got shape {arr.shape}")
        return cls(arr.shape[0], arr.shape[1], pack_rows(arr))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BoolMatrix":
        return cls(rows, cols, np.zeros((rows, words_for(cols)), dtype=np.uint64))

    @classmethod
    def ones(cls, rows: int, cols: int) -> "BoolMatrix":
        return cls.from_dense(np.ones((rows, cols), dtype=np.uint8))

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def nbytes(self) -> int:
        return int(self.bits.nbytes)

    def to_dense(self) -> np.ndarray:
        return unpack_rows(self.bits, self.cols)

    def count_ones(self) -> int:
        return count_bits(self.bits)

    def get(self, i: int, j: int) -> int:
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise ShapeError(f"Cell ({i}, {j}) outside matrix of shape {self.shape}")
        word = int(self.bits[i, j // WORD_BITS])
        return (word >> (j % WORD_BITS)) & 1

    def transpose(self) -> "BoolMatrix":
        return BoolMatrix.from_dense(self.to_dense().T)

    @property
    def T(self) -> "BoolMatrix":
        return self.transpose()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BoolMatrix):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.bits, other.bits)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"BoolMatrix(shape={self.shape}, ones={self.count_ones()})"


class Mode(Enum):
    """Unfolding axis: objects, features or time."""
    MODE1 = 1
    MODE2 = 2
    MODE3 = 3


ALL_MODES = (Mode.MODE1, Mode.MODE2, Mode.MODE3)


@dataclass(frozen=True, eq=False)
class BoolTensor3:
    """
    Dense bit-packed binary O x F x T tensor; immutable after construction.
    """

    dim_o: int
    dim_f: int
    dim_t: int
    bits: np.ndarray

    def __post_init__(self) -> None:
        if min(self.dim_o, self.dim_f, self.dim_t) < 0:
            raise ShapeError(f"Negative tensor dims {self.dims}")
        n_cells = self.dim_o * self.dim_f * self.dim_t
        if self.bits.shape != (words_for(n_cells),):
            raise ShapeError(
                f"Packed storage {self.bits.shape} does not match {n_cells} cells"
            )
        bits = _freeze(self.bits)
        if n_cells % WORD_BITS and bits.size:
            if bits[-1] & ~_padding_mask(n_cells):
                raise DataError("Padding bits beyond the last cell must be 0")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_dense(cls, array) -> "BoolTensor3":
        arr = _as_binary(array, "Tensor")
        if arr.ndim != 3:
            raise ShapeError(f"Expected a 3D array, got shape {arr.shape}")
        flat = arr.reshape(-1, order="F")
        return cls(*arr.shape, bits=pack_rows(flat[None, :])[0])

    @classmethod
    def zeros(cls, dim_o: int, dim_f: int, dim_t: int) -> "BoolTensor3":
        return cls(dim_o, dim_f, dim_t, np.zeros(words_for(dim_o * dim_f * dim_t), np.uint64))

    @classmethod
    def from_slices(cls, slices: Sequence[BoolMatrix]) -> "BoolTensor3":
        """Stack O x F slot matrices along the time axis."""
        if not slices:
            raise ShapeError("Cannot stack an empty sequence of slots")
        shape = slices[0].shape
        for k, m in enumerate(slices):
            if m.shape != shape:
                raise ShapeError(f"Slot {k} has shape {m.shape}, expected {shape}")
        dense = np.stack([m.to_dense() for m in slices], axis=2)
        return cls.from_dense(dense)

    @property
    def dims(self) -> Tuple[int, int, int]:
        return (self.dim_o, self.dim_f, self.dim_t)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.dims

    @property
    def n_cells(self) -> int:
        return self.dim_o * self.dim_f * self.dim_t

    @property
    def nbytes(self) -> int:
        return int(self.bits.nbytes)

    def to_dense(self) -> np.ndarray:
        flat = unpack_rows(self.bits[None, :], self.n_cells)[0]
        return flat.reshape(self.dims, order="F")

    def count_ones(self) -> int:
        return count_bits(self.bits)

    def get(self, o: int, f: int, t: int) -> int:
        if not (0 <= o < self.dim_o and 0 <= f < self.dim_f and 0 <= t < self.dim_t):
            raise ShapeError(f"Cell ({o}, {f}, {t}) outside tensor of dims {self.dims}")
        index = o + f * self.dim_o + t * self.dim_o * self.dim_f
        return (int(self.bits[index // WORD_BITS]) >> (index % WORD_BITS)) & 1

    def slice_time(self, t: int) -> BoolMatrix:
        """The O x F slot matrix at time index t."""
        if not 0 <= t < self.dim_t:
            raise ShapeError(f"Time index {t} outside {self.dim_t} slots")
        return BoolMatrix.from_dense(self.to_dense()[:, :, t])

    def slices(self) -> list:
        dense = self.to_dense()
        return [BoolMatrix.from_dense(dense[:, :, t]) for t in range(self.dim_t)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BoolTensor3):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.bits, other.bits)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"BoolTensor3(dims={self.dims}, ones={self.count_ones()})"


def unfold_shape(mode: Mode, dims: Tuple[int, int, int]) -> Tuple[int, int]:
    o, f, t = dims
    if mode is Mode.MODE1:
        return (o, f * t)
    if mode is Mode.MODE2:
        return (f, o * t)
    return (t, o * f)


def unfold(x: BoolTensor3, mode: Mode) -> BoolMatrix:
    """
    Mode-n unfolding X(n).

    MODE1 -> O x (F*T), column j + k*F
    MODE2 -> F x (O*T), column i + k*O
    MODE3 -> T x (O*F), column i + j*O
    """
    dense = x.to_dense()
    if mode is Mode.MODE1:
        flat = dense.reshape(unfold_shape(mode, x.dims), order="F")
    elif mode is Mode.MODE2:
        flat = dense.transpose(1, 0, 2).reshape(unfold_shape(mode, x.dims), order="F")
    else:
        flat = dense.transpose(2, 0, 1).reshape(unfold_shape(mode, x.dims), order="F")
    return BoolMatrix.from_dense(flat)


def fold(m: BoolMatrix, mode: Mode, dims: Tuple[int, int, int]) -> BoolTensor3:
    """Inverse of unfold."""
    expected = unfold_shape(mode, dims)
    if m.shape != expected:
        raise ShapeError(
            f"Cannot fold {m.shape} matrix along {mode.name} into {dims}: expected {expected}"
        )
    o, f, t = dims
    dense = m.to_dense()
    if mode is Mode.MODE1:
        cube = dense.reshape((o, f, t), order="F")
    elif mode is Mode.MODE2:
        cube = dense.reshape((f, o, t), order="F").transpose(1, 0, 2)
    else:
        cube = dense.reshape((t, o, f), order="F").transpose(1, 2, 0)
    return BoolTensor3.from_dense(cube)


def bool_matmul(left: BoolMatrix, right: BoolMatrix) -> BoolMatrix:
    """
    Boolean product: out[i, j] = OR_k (left[i, k] AND right[k, j]).

    Each output row is the OR of the packed rows of ``right`` selected by
    the row of ``left``.
    """
    if left.cols != right.rows:
        raise ShapeError(f"Cannot multiply {left.shape} by {right.shape}")
    out = np.zeros((left.rows, words_for(right.cols)), dtype=np.uint64)
    if left.rows and right.cols:
        selectors = left.to_dense().astype(bool)
        for k in range(left.cols):
            chosen = selectors[:, k]
            if chosen.any():
                out[chosen] |= right.bits[k]
    return BoolMatrix(left.rows, right.cols, out)


def bool_kronecker(left: BoolMatrix, right: BoolMatrix) -> BoolMatrix:
    """
    Kronecker product: out[i*R + r, j*S + s] = left[i, j] AND right[r, s],
    where ``right`` is R x S.
    """
    rows = left.rows * right.rows
    cols = left.cols * right.cols
    if rows * cols > MAX_CELLS:
        raise CapacityError(
            f"Kronecker product {left.shape} x {right.shape} needs {rows}x{cols} cells, "
            f"over the {MAX_CELLS} cell limit"
        )
    return BoolMatrix.from_dense(np.kron(left.to_dense(), right.to_dense()))


def transpose(m: BoolMatrix) -> BoolMatrix:
    return m.transpose()


def tucker_reconstruct(
    g: BoolTensor3,
    a: BoolMatrix,
    b: BoolMatrix,
    c: BoolMatrix,
) -> BoolTensor3:
    """
    Boolean Tucker product:
    X^[i,j,k] = OR_{r1,r2,r3} G[r1,r2,r3] AND A[i,r1] AND B[j,r2] AND C[k,r3].

    Computed on the mode-1 unfolding, X^(1) = A G(1) (C kron B)^T.
    """
    if (a.cols, b.cols, c.cols) != g.dims:
        raise ShapeError(
            f"Factor ranks ({a.cols}, {b.cols}, {c.cols}) do not match core dims {g.dims}"
        )
    dims = (a.rows, b.rows, c.rows)
    x1 = bool_matmul(
        bool_matmul(a, unfold(g, Mode.MODE1)),
        transpose(bool_kronecker(c, b)),
    )
    return fold(x1, Mode.MODE1, dims)


class ErrorFigures(NamedTuple):
    mismatches: int
    relative: float


def hamming_error(x: BoolTensor3, xhat: BoolTensor3) -> ErrorFigures:
    """
    Count of differing cells, and that count relative to the ones in x.
    """
    if x.dims != xhat.dims:
        raise ShapeError(f"Cannot compare tensors of dims {x.dims} and {xhat.dims}")
    mismatches = count_bits(x.bits ^ xhat.bits)
    return ErrorFigures(mismatches, mismatches / max(1, x.count_ones()))


def density(x: BoolTensor3) -> float:
    """Fraction of 1-cells."""
    if x.n_cells == 0:
        raise DataError(f"Density of an empty tensor {x.dims} is undefined")
    return x.count_ones() / x.n_cells

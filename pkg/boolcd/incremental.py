"""
Incremental Boolean Tucker fitting over a stream of time slots.

The stream keeps a bounded state:
- the model, whose time factor C holds only the rows of the current window
- the last W slot matrices
- covariance accumulators CA, CB, CC of size r_n x r_n

Per slot, after the factors are refitted, each accumulator becomes

    acc = acc_old * F(t) + covariance_of(factor)

and the diagonals of the accumulators order the core update. Reconstruction
error is always measured with the binary factors over the window.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .batch_tucker import (
    FitTrace,
    TraceRecord,
    TuckerModel,
    evaluate,
    fit_batch,
    meets_threshold,
    seed_model,
    sweep_core,
    update_factor,
)
from .config import Ranks, StreamConfig
from .errors import ConfigError, DataError, InputError, ShapeError, StateError
from .logs import get_logger
from .seeding import derive_seed
from .tensor_core import BoolMatrix, BoolTensor3, Mode


logger = get_logger(__name__)


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


def covariance_of(m: BoolMatrix) -> np.ndarray:
    """
    Sample covariance of the columns of m across its rows (cols x cols).

    A single row gives the zero matrix. The result is exactly symmetric.
    """
    if m.rows < 1:
        raise DataError(f"Covariance of an empty {m.shape} matrix is undefined")
    if m.rows == 1 or m.cols == 0:
        return np.zeros((m.cols, m.cols), dtype=np.float64)
    dense = m.to_dense().astype(np.float64)
    cov = np.atleast_2d(np.cov(dense, rowvar=False, ddof=1))
    return (cov + cov.T) / 2.0


def accumulate(cov_old: np.ndarray, cov_new: np.ndarray, weight: float) -> np.ndarray:
    """old * weight + new, elementwise."""
    if cov_old.shape != cov_new.shape:
        raise ShapeError(f"Cannot accumulate {cov_old.shape} into {cov_new.shape}")
    if not 0.0 <= weight <= 1.0:
        raise ConfigError(f"Time weight must lie in [0, 1], got {weight}")
    return cov_old * weight + cov_new


@dataclass(frozen=True, eq=False)
class CovarianceState:
    """Time-weighted accumulators CA, CB, CC and the number of slots seen."""

    ca: np.ndarray
    cb: np.ndarray
    cc: np.ndarray
    slots_seen: int

    def __post_init__(self) -> None:
        for name in ("ca", "cb", "cc"):
            matrix = getattr(self, name)
            if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
                raise ShapeError(f"Accumulator {name} must be square, got {matrix.shape}")
            if not np.array_equal(matrix, matrix.T):
                raise DataError(f"Accumulator {name} is not symmetric")
            object.__setattr__(self, name, _frozen(matrix))

    @classmethod
    def zeros(cls, ranks: Ranks) -> "CovarianceState":
        return cls(
            np.zeros((ranks.r1, ranks.r1)),
            np.zeros((ranks.r2, ranks.r2)),
            np.zeros((ranks.r3, ranks.r3)),
            0,
        )

    @property
    def nbytes(self) -> int:
        return int(self.ca.nbytes + self.cb.nbytes + self.cc.nbytes)

    def as_tuple(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.ca, self.cb, self.cc)

    def priorities(self) -> np.ndarray:
        """v[r1, r2, r3] = ca[r1, r1] * cb[r2, r2] * cc[r3, r3]."""
        return np.einsum(
            "p,q,r->pqr", np.diag(self.ca), np.diag(self.cb), np.diag(self.cc)
        )


@dataclass(frozen=True, eq=False)
class StreamState:
    """
    Everything a stream retains between slots.

    ``model`` is None until the stream is bootstrapped.
    """

    config: StreamConfig
    model: Optional[TuckerModel]
    cov: CovarianceState
    window: Tuple[BoolMatrix, ...] = ()
    trace: FitTrace = field(default_factory=lambda: FitTrace(axis="slot"))
    # Covariances of the factors fitted at the latest slot
    slot_covariance: Tuple[np.ndarray, ...] = ()

    @classmethod
    def unstarted(cls, config: StreamConfig) -> "StreamState":
        config.validate()
        return cls(config, None, CovarianceState.zeros(config.ranks))

    @property
    def bootstrapped(self) -> bool:
        return self.model is not None

    @property
    def slots_seen(self) -> int:
        return self.cov.slots_seen

    @property
    def slot_shape(self) -> Tuple[int, int]:
        return self.window[-1].shape

    def window_tensor(self) -> BoolTensor3:
        return BoolTensor3.from_slices(self.window)

    def retained_nbytes(self) -> int:
        """
        Bytes of model, accumulators and window storage; the trace is a log
        and is not counted.
        """
        total = self.cov.nbytes + sum(m.nbytes for m in self.window)
        total += sum(int(c.nbytes) for c in self.slot_covariance)
        if self.model is not None:
            total += self.model.nbytes
        return total


def _factor_covariances(model: TuckerModel) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return (covariance_of(model.a), covariance_of(model.b), covariance_of(model.c))


def bootstrap(slot1: BoolMatrix, slot2: BoolMatrix, config: StreamConfig) -> StreamState:
    """
    Start a stream from its first two slots.

    The pair is fitted as an O x F x 2 tensor with the batch algorithm; the
    accumulators start as the covariances of the fitted factors.
    """
    config.validate()
    if slot1.shape != slot2.shape:
        raise ShapeError(f"Bootstrap slots differ in shape: {slot1.shape} vs {slot2.shape}")
    x = BoolTensor3.from_slices([slot1, slot2])
    start = time.perf_counter()
    model, batch_trace = fit_batch(x, config.to_fit_config(), time_limit=config.window_w)
    millis = (time.perf_counter() - start) * 1000.0

    covs = _factor_covariances(model)
    cov = CovarianceState(*covs, slots_seen=2)
    final = batch_trace.final
    trace = FitTrace(axis="slot", status=batch_trace.status)
    trace.append(TraceRecord(2, final.mismatches, final.relative, millis))
    logger.log_event(
        "stream_bootstrapped",
        True,
        dims=x.dims,
        mismatches=final.mismatches,
        sweeps=len(batch_trace),
    )
    return StreamState(config, model, cov, (slot1, slot2), trace, covs)


def update_core_prioritized(
    x_window: BoolTensor3,
    model: TuckerModel,
    cov: CovarianceState,
    visit_log: Optional[list] = None,
) -> TuckerModel:
    """
    Greedy core update visiting cells by descending accumulator priority.

    Equal priorities fall back to lexicographic (r1, r2, r3) order.
    """
    if tuple(m.shape[0] for m in cov.as_tuple()) != model.core.dims:
        raise ShapeError(
            f"Accumulator sizes {tuple(m.shape for m in cov.as_tuple())} "
            f"do not match core dims {model.core.dims}"
        )
    scores = cov.priorities()
    cells = sorted(np.ndindex(*model.core.dims), key=lambda cell: (-scores[cell], cell))
    return sweep_core(x_window, model, cells, visit_log)


def ingest_slot(state: StreamState, slot: BoolMatrix) -> StreamState:
    """
    Fold one new slot into the stream.

    The slot joins the window (the oldest slot leaves when full) and C gains
    a row copied from its latest one. A model with an empty core is seeded
    from the window first. Inner sweeps then refit A, B, C and the
    core; each sweep recomputes the slot's accumulators from the state the
    slot started with, and the last ones are kept.

    Returns:
        The new state; ``state`` itself is left untouched.
    """
    if not state.bootstrapped:
        raise StateError("Stream must be bootstrapped with two slots before ingesting")
    if slot.shape != state.slot_shape:
        raise ShapeError(f"Slot shape {slot.shape} does not match stream shape {state.slot_shape}")

    config = state.config
    start = time.perf_counter()
    slot_number = state.slots_seen + 1
    weight = config.time_weight.weight(slot_number)

    window = state.window + (slot,)
    c_rows = state.model.c.to_dense()
    c_rows = np.vstack([c_rows, c_rows[-1:]])
    if len(window) > config.window_w:
        window = window[1:]
        c_rows = c_rows[1:]
        logger.debug("Window rolled", extra={"slot": slot_number})
    model = state.model.with_factor(Mode.MODE3, BoolMatrix.from_dense(c_rows))
    x = BoolTensor3.from_slices(window)
    if model.core.count_ones() == 0 and x.count_ones():
        model = seed_model(x, model, derive_seed(config.seed, "slot", slot_number))
        logger.debug("Empty core reseeded", extra={"slot": slot_number})

    base = state.cov
    cov = base
    figures = evaluate(x, model)
    for _ in range(config.inner_sweeps):
        before = model
        model = update_factor(x, model, Mode.MODE1)
        ca = accumulate(base.ca, covariance_of(model.a), weight)
        model = update_factor(x, model, Mode.MODE2)
        cb = accumulate(base.cb, covariance_of(model.b), weight)
        model = update_factor(x, model, Mode.MODE3)
        cc = accumulate(base.cc, covariance_of(model.c), weight)
        cov = CovarianceState(ca, cb, cc, slot_number)
        model = update_core_prioritized(x, model, cov)
        figures = evaluate(x, model)
        if meets_threshold(figures, config.error_kind, config.error_threshold):
            break
        if model == before:
            break

    millis = (time.perf_counter() - start) * 1000.0
    trace = FitTrace(axis="slot", records=list(state.trace.records), status=state.trace.status)
    trace.append(TraceRecord(slot_number, figures.mismatches, figures.relative, millis))
    logger.log_event(
        "slot_ingested",
        meets_threshold(figures, config.error_kind, config.error_threshold),
        slot=slot_number,
        mismatches=figures.mismatches,
    )
    return StreamState(config, model, cov, window, trace, _factor_covariances(model))


def run_stream(
    slots: Sequence[BoolMatrix],
    config: StreamConfig,
) -> Tuple[StreamState, FitTrace]:
    """
    Bootstrap on the first two slots and ingest the rest in order.
    """
    if len(slots) < 2:
        raise InputError(f"A stream needs at least 2 slots, got {len(slots)}")
    shape = slots[0].shape
    for k, m in enumerate(slots):
        if m.shape != shape:
            raise ShapeError(f"Slot {k} has shape {m.shape}, expected {shape}")
    state = bootstrap(slots[0], slots[1], config)
    for slot in slots[2:]:
        state = ingest_slot(state, slot)
    return state, state.trace


def slot_history(slots: Sequence[BoolMatrix], config: StreamConfig) -> List[StreamState]:
    """Every intermediate state of a stream, bootstrap first."""
    if len(slots) < 2:
        raise InputError(f"A stream needs at least 2 slots, got {len(slots)}")
    states = [bootstrap(slots[0], slots[1], config)]
    for slot in slots[2:]:
        states.append(ingest_slot(states[-1], slot))
    return states

"""
Batch Boolean Tucker factorization.

The fit alternates greedy per-mode factor updates and a greedy core update:

    seed -> repeat { A, B, C, core, measure } until converged/stalled

Seeding replaces the random factor columns with greedy covers of the data
fibers along each mode and settles the core against them, keeping whichever
of a few such starts fits best. A sweep that ends with an empty core on
nonzero data is seeded again.

Every step picks, for the piece it touches, the value minimising the number
of mismatched cells with everything else held fixed, so the reconstruction
error never increases from one sweep to the next.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .config import ErrorKind, FitConfig, Ranks, density_matched_init
from .errors import ConfigError, ShapeError
from .logs import get_logger
from .seeding import bernoulli_bits, derive_seed, generator
from .tensor_core import (
    ALL_MODES,
    BoolMatrix,
    BoolTensor3,
    ErrorFigures,
    Mode,
    bool_kronecker,
    bool_matmul,
    density,
    hamming_error,
    transpose,
    tucker_reconstruct,
    unfold,
)


logger = get_logger(__name__)

# Largest k tried by the default (k, k, k) rank ladder
DEFAULT_MAX_AUTO_RANK = 8

# Weight on covered zeros when scoring seed columns, one seeding per entry
SEED_PENALTIES = (1.0, 2.0)
# Drawn seedings pick among candidates scoring at least this share of the best
SEED_CANDIDATE_SHARE = 0.75
# Most frequent distinct fibers tried as seed columns per mode
MAX_SEED_CANDIDATES = 256


@dataclass(frozen=True)
class TuckerModel:
    """
    Binary core G (r1 x r2 x r3) and factors A (O x r1), B (F x r2), C (T x r3).
    """

    core: BoolTensor3
    a: BoolMatrix
    b: BoolMatrix
    c: BoolMatrix

    def __post_init__(self) -> None:
        if (self.a.cols, self.b.cols, self.c.cols) != self.core.dims:
            raise ShapeError(
                f"Factor ranks ({self.a.cols}, {self.b.cols}, {self.c.cols}) "
                f"do not match core dims {self.core.dims}"
            )

    @property
    def ranks(self) -> Ranks:
        return Ranks(*self.core.dims)

    @property
    def dims(self) -> Tuple[int, int, int]:
        return (self.a.rows, self.b.rows, self.c.rows)

    @property
    def nbytes(self) -> int:
        return self.core.nbytes + self.a.nbytes + self.b.nbytes + self.c.nbytes

    def factor(self, mode: Mode) -> BoolMatrix:
        return {Mode.MODE1: self.a, Mode.MODE2: self.b, Mode.MODE3: self.c}[mode]

    def with_factor(self, mode: Mode, m: BoolMatrix) -> "TuckerModel":
        if mode is Mode.MODE1:
            return TuckerModel(self.core, m, self.b, self.c)
        if mode is Mode.MODE2:
            return TuckerModel(self.core, self.a, m, self.c)
        return TuckerModel(self.core, self.a, self.b, m)

    def with_core(self, core: BoolTensor3) -> "TuckerModel":
        return TuckerModel(core, self.a, self.b, self.c)

    def reconstruct(self) -> BoolTensor3:
        return tucker_reconstruct(self.core, self.a, self.b, self.c)

    def check_fits(self, x: BoolTensor3) -> None:
        if self.dims != x.dims:
            raise ShapeError(f"Model dims {self.dims} do not match tensor dims {x.dims}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TuckerModel):
            return NotImplemented
        return (
            self.core == other.core
            and self.a == other.a
            and self.b == other.b
            and self.c == other.c
        )


class FitStatus(Enum):
    """Why a fit stopped."""
    CONVERGED = "converged"
    STALLED = "stalled"
    MAX_SWEEPS = "max_sweeps"


@dataclass(frozen=True)
class TraceRecord:
    index: int
    mismatches: int
    relative: float
    wall_millis: float


@dataclass
class FitTrace:
    """
    Per-sweep (batch) or per-slot (stream) error records.

    ``axis`` names what ``TraceRecord.index`` counts and heads the CSV column.
    """

    axis: str = "sweep"
    records: List[TraceRecord] = field(default_factory=list)
    status: Optional[FitStatus] = None

    def append(self, record: TraceRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def final(self) -> Optional[TraceRecord]:
        return self.records[-1] if self.records else None

    def mismatch_sequence(self) -> List[int]:
        return [r.mismatches for r in self.records]

    def total_millis(self) -> float:
        return sum(r.wall_millis for r in self.records)

    def header(self) -> List[str]:
        return [self.axis, "mismatches", "relative", "millis"]

    def to_rows(self) -> List[List[str]]:
        return [
            [str(r.index), str(r.mismatches), f"{r.relative:.6f}", f"{r.wall_millis:.3f}"]
            for r in self.records
        ]

    def without_timing(self) -> List[Tuple[int, int, float]]:
        """Records with wall-clock stripped; equal for repeated seeded runs."""
        return [(r.index, r.mismatches, r.relative) for r in self.records]


def init_model(
    dims: Tuple[int, int, int],
    config: FitConfig,
    tensor_density: Optional[float] = None,
    time_limit: Optional[int] = None,
) -> TuckerModel:
    """
    Random factors, all-zero core.

    Each factor is drawn from its own child stream of ``config.seed``, so
    changing one factor's shape leaves the others' bits untouched.

    Args:
        dims: (O, F, T)
        config: Fit configuration
        tensor_density: Data density, used by the "density-matched" strategy
        time_limit: Bound for r3 when it differs from T (stream windows)
    """
    config.validate()
    config.ranks.check_against(dims, time_limit=time_limit)
    p = config.init_density
    if config.init_strategy == "density-matched" and tensor_density is not None:
        p = density_matched_init(tensor_density)
    o, f, t = dims
    r1, r2, r3 = config.ranks.as_tuple()
    a = BoolMatrix.from_dense(bernoulli_bits(generator(config.seed, "A"), (o, r1), p))
    b = BoolMatrix.from_dense(bernoulli_bits(generator(config.seed, "B"), (f, r2), p))
    c = BoolMatrix.from_dense(bernoulli_bits(generator(config.seed, "C"), (t, r3), p))
    return TuckerModel(BoolTensor3.zeros(r1, r2, r3), a, b, c)


def mode_design(model: TuckerModel, mode: Mode) -> BoolMatrix:
    """
    H = G(n) (other2 kron other1)^T, so that X^(n) = factor_n H.
    """
    if mode is Mode.MODE1:
        kron = bool_kronecker(model.c, model.b)
    elif mode is Mode.MODE2:
        kron = bool_kronecker(model.c, model.a)
    else:
        kron = bool_kronecker(model.b, model.a)
    return bool_matmul(unfold(model.core, mode), transpose(kron))


def _greedy_rows(target: np.ndarray, design: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """
    Coordinate descent on every row at once.

    Bit r of a row becomes 1 only if that strictly lowers the row's
    mismatches against ``target``; passes repeat until no bit moves.
    """
    rows = rows.astype(np.uint8, copy=True)
    design_i = design.astype(np.int64)
    # cost of covering a cell: +1 where target is 0, -1 where it is 1
    sign = 1 - 2 * target.astype(np.int64)
    cover = rows.astype(np.int64) @ design_i
    changed = True
    while changed:
        changed = False
        for r in range(design.shape[0]):
            h = design[r].astype(bool)
            if not h.any():
                if rows[:, r].any():
                    rows[:, r] = 0
                    changed = True
                continue
            without = cover - np.outer(rows[:, r], design_i[r])
            uncovered = (without == 0) & h[None, :]
            delta = (uncovered * sign).sum(axis=1)
            new_bits = (delta < 0).astype(np.uint8)
            moved = new_bits != rows[:, r]
            if moved.any():
                changed = True
                rows[:, r] = new_bits
                cover = without + np.outer(new_bits, design_i[r])
    return rows


def update_factor(x: BoolTensor3, model: TuckerModel, mode: Mode) -> TuckerModel:
    """
    Replace each row of the mode's factor by a greedy Hamming-minimising row.

    Rows are independent given the core and the other two factors; ties go
    to 0 so factors stay sparse.
    """
    model.check_fits(x)
    target = unfold(x, mode).to_dense()
    design = mode_design(model, mode).to_dense()
    current = model.factor(mode).to_dense()
    updated = _greedy_rows(target, design, current)
    if np.array_equal(updated, current):
        return model
    return model.with_factor(mode, BoolMatrix.from_dense(updated))


def _coverage(model: TuckerModel) -> np.ndarray:
    """Number of active core cells covering each tensor cell."""
    return np.einsum(
        "ip,jq,kr,pqr->ijk",
        model.a.to_dense().astype(np.int64),
        model.b.to_dense().astype(np.int64),
        model.c.to_dense().astype(np.int64),
        model.core.to_dense().astype(np.int64),
        optimize=True,
    )


def sweep_core(
    x: BoolTensor3,
    model: TuckerModel,
    order: Iterable[Tuple[int, int, int]],
    visit_log: Optional[list] = None,
) -> TuckerModel:
    """
    Single pass over core cells in the given order.

    A cell is set when that strictly lowers mismatches with the rest of the
    model fixed, and cleared otherwise. Appends ``(r1, r2, r3, value)`` per
    visited cell to ``visit_log`` when given.
    """
    model.check_fits(x)
    xd = x.to_dense().astype(np.int64)
    sign = 1 - 2 * xd
    a = model.a.to_dense().astype(bool)
    b = model.b.to_dense().astype(bool)
    c = model.c.to_dense().astype(bool)
    core = model.core.to_dense().copy()
    cover = _coverage(model)
    changed = False
    for r1, r2, r3 in order:
        io, jf, kt = np.flatnonzero(a[:, r1]), np.flatnonzero(b[:, r2]), np.flatnonzero(c[:, r3])
        block = np.ix_(io, jf, kt)
        old = int(core[r1, r2, r3])
        without = cover[block] - old
        delta = int(((without == 0) * sign[block]).sum())
        new = 1 if delta < 0 else 0
        if new != old:
            core[r1, r2, r3] = new
            cover[block] = without + new
            changed = True
        if visit_log is not None:
            visit_log.append((r1, r2, r3, new))
    if not changed:
        return model
    return model.with_core(BoolTensor3.from_dense(core))


def lexicographic_cells(ranks: Ranks) -> List[Tuple[int, int, int]]:
    return list(itertools.product(range(ranks.r1), range(ranks.r2), range(ranks.r3)))


def update_core(
    x: BoolTensor3,
    model: TuckerModel,
    visit_log: Optional[list] = None,
) -> TuckerModel:
    """Greedy core update visiting cells lexicographically by (r1, r2, r3)."""
    return sweep_core(x, model, lexicographic_cells(model.ranks), visit_log)


def evaluate(x: BoolTensor3, model: TuckerModel) -> ErrorFigures:
    """Mismatches and relative error of the model's reconstruction of x."""
    model.check_fits(x)
    return hamming_error(x, model.reconstruct())


def meets_threshold(figures: ErrorFigures, kind: ErrorKind, threshold: float) -> bool:
    if kind is ErrorKind.ABSOLUTE:
        return figures.mismatches <= threshold
    return figures.relative <= threshold


def settle_core(x: BoolTensor3, model: TuckerModel) -> TuckerModel:
    """Repeat update_core until a pass changes nothing."""
    while True:
        updated = update_core(x, model)
        if updated is model:
            return model
        model = updated


def _fiber_cover(
    fibers: np.ndarray,
    rank: int,
    penalty: float,
    rng: Optional[np.random.Generator] = None,
) -> List[np.ndarray]:
    """
    Greedy cover of nonzero fibers by at most ``rank`` of their own values.

    A candidate v scores, summed over fibers w where it is positive, the
    ones of w it newly covers minus ``penalty`` times the zeros of w it sets.
    Without ``rng`` the best candidate is taken, ties to the most frequent
    fiber; with it, one is drawn among those within SEED_CANDIDATE_SHARE of
    the best.
    """
    values, counts = np.unique(fibers, axis=0, return_counts=True)
    order = np.argsort(-counts, kind="stable")
    values = values[order].astype(np.int64)
    counts = counts[order].astype(np.float64)
    candidates = values[:MAX_SEED_CANDIDATES]
    covered = np.zeros_like(values)
    available = np.ones(len(candidates), dtype=bool)
    chosen: List[np.ndarray] = []
    for _ in range(rank):
        open_cells = 1 - covered
        newly = candidates @ (values * open_cells).T
        spoiled = candidates @ ((1 - values) * open_cells).T
        per_fiber = newly - penalty * spoiled
        gains = (np.maximum(per_fiber, 0.0) * counts).sum(axis=1)
        gains[~available] = 0.0
        best = gains.max()
        if best <= 0.0:
            break
        if rng is None:
            pick = int(np.argmax(gains))
        else:
            pick = int(rng.choice(np.flatnonzero(gains >= SEED_CANDIDATE_SHARE * best)))
        adopted = per_fiber[pick] > 0
        covered[adopted] = covered[adopted] | candidates[pick]
        available[pick] = False
        chosen.append(candidates[pick].astype(np.uint8))
    return chosen


def seed_from_fibers(
    x: BoolTensor3,
    model: TuckerModel,
    penalty: float,
    rng: Optional[np.random.Generator] = None,
) -> TuckerModel:
    """
    Factor columns taken from greedy covers of x's mode-n fibers.

    Columns a cover leaves unused keep their current values. The core is
    cleared and settled against the new factors.
    """
    model.check_fits(x)
    for mode in ALL_MODES:
        fibers = unfold(x, mode).to_dense().T
        fibers = fibers[fibers.any(axis=1)]
        if not len(fibers):
            continue
        columns = model.factor(mode).to_dense().copy()
        for r, column in enumerate(_fiber_cover(fibers, columns.shape[1], penalty, rng)):
            columns[:, r] = column
        model = model.with_factor(mode, BoolMatrix.from_dense(columns))
    return settle_core(x, model.with_core(BoolTensor3.zeros(*model.core.dims)))


def seed_model(x: BoolTensor3, model: TuckerModel, seed: int) -> TuckerModel:
    """
    Starting point for the sweeps.

    Candidates are the input model with its core settled, one deterministic
    fiber cover per SEED_PENALTIES entry and one drawn with the generator of
    (seed, "fibers"). The fewest mismatches wins; ties go to the earlier
    candidate.
    """
    options = [settle_core(x, model)]
    if x.count_ones():
        options.extend(seed_from_fibers(x, model, penalty) for penalty in SEED_PENALTIES)
        options.append(
            seed_from_fibers(x, model, SEED_PENALTIES[-1], generator(seed, "fibers"))
        )
    scores = [evaluate(x, option).mismatches for option in options]
    chosen = int(np.argmin(scores))
    logger.debug("Model seeded", extra={"candidate": chosen, "mismatches": scores[chosen]})
    return options[chosen]


def fit_batch(
    x: BoolTensor3,
    config: FitConfig,
    time_limit: Optional[int] = None,
) -> Tuple[TuckerModel, FitTrace]:
    """
    Fit a Boolean Tucker model to x.

    The random initial model is seeded (see seed_model) before the first
    sweep. Stops on the first of:
    - error at or below the threshold (CONVERGED)
    - less than one mismatch of improvement for ``stall_sweeps`` sweeps (STALLED)
    - ``max_sweeps`` sweeps (MAX_SWEEPS)

    Args:
        x: Input tensor
        config: Fit configuration
        time_limit: Bound for r3 when it differs from T

    Returns:
        (model, trace) with one trace record per sweep
    """
    data_density = density(x) if x.n_cells else 0.0
    model = init_model(x.dims, config, tensor_density=data_density, time_limit=time_limit)
    logger.info(
        "Fit started",
        extra={"dims": x.dims, "ranks": str(config.ranks), "seed": config.seed},
    )

    model = seed_model(x, model, config.seed)
    previous = evaluate(x, model).mismatches
    trace = FitTrace(axis="sweep")
    stalled_for = 0
    status = FitStatus.MAX_SWEEPS

    for sweep in range(1, config.max_sweeps + 1):
        start = time.perf_counter()
        for mode in ALL_MODES:
            model = update_factor(x, model, mode)
        model = update_core(x, model)
        figures = evaluate(x, model)
        if model.core.count_ones() == 0 and x.count_ones():
            reseeded = seed_from_fibers(
                x, model, SEED_PENALTIES[-1], generator(config.seed, "reseed", sweep)
            )
            reseeded_figures = evaluate(x, reseeded)
            if reseeded_figures.mismatches < figures.mismatches:
                logger.debug("Empty core reseeded", extra={"sweep": sweep})
                model, figures = reseeded, reseeded_figures
        millis = (time.perf_counter() - start) * 1000.0
        trace.append(TraceRecord(sweep, figures.mismatches, figures.relative, millis))
        logger.debug(
            "Sweep finished",
            extra={"sweep": sweep, "mismatches": figures.mismatches},
        )

        if meets_threshold(figures, config.error_kind, config.error_threshold):
            status = FitStatus.CONVERGED
            break
        if previous - figures.mismatches < 1:
            stalled_for += 1
        else:
            stalled_for = 0
        previous = figures.mismatches
        if stalled_for >= config.stall_sweeps:
            status = FitStatus.STALLED
            break

    trace.status = status
    final = trace.final
    logger.log_event(
        "fit_finished",
        status is FitStatus.CONVERGED,
        status=status.value,
        sweeps=len(trace),
        mismatches=final.mismatches if final else 0,
    )
    return model, trace


class BestOfResult(NamedTuple):
    model: TuckerModel
    trace: FitTrace
    restart: int
    seed: int


def restart_seed(seed: int, restart: int) -> int:
    return derive_seed(seed, "restart", restart)


def fit_best_of(x: BoolTensor3, config: FitConfig, restarts: int = 1) -> BestOfResult:
    """
    Run ``restarts`` independently seeded fits and keep the fewest mismatches.

    Restart i uses ``derive_seed(config.seed, "restart", i)``; ties go to the
    earliest restart.
    """
    if restarts < 1:
        raise ConfigError(f"restarts must be >= 1, got {restarts}")
    best: Optional[BestOfResult] = None
    for i in range(restarts):
        seed = restart_seed(config.seed, i)
        model, trace = fit_batch(x, config.with_seed(seed))
        candidate = BestOfResult(model, trace, i, seed)
        if best is None or trace.final.mismatches < best.trace.final.mismatches:
            best = candidate
        if best.trace.final.mismatches == 0:
            break
    return best


class RankPoint(NamedTuple):
    ranks: Ranks
    mismatches: int
    relative: float


class RankSelection(NamedTuple):
    chosen: Optional[Ranks]
    model: Optional[TuckerModel]
    points: List[RankPoint]


def default_rank_ladder(
    dims: Tuple[int, int, int],
    max_rank: int = DEFAULT_MAX_AUTO_RANK,
) -> List[Ranks]:
    """(1,1,1), (2,2,2), ... with each rank capped by its mode's size."""
    ladder: List[Ranks] = []
    for k in range(1, max_rank + 1):
        ranks = Ranks(*(max(1, min(k, d)) for d in dims))
        if not ladder or ladder[-1] != ranks:
            ladder.append(ranks)
    return ladder


def select_ranks(
    x: BoolTensor3,
    candidates: Sequence[Ranks],
    config: FitConfig,
    restarts: int = 1,
) -> RankSelection:
    """
    Grow the core until the error meets the threshold.

    Candidates are tried in the given order; the first whose best-of-restarts
    fit meets ``config.error_threshold`` is chosen. Every evaluated point is
    returned so callers can chart error against core size.
    """
    points: List[RankPoint] = []
    for ranks in candidates:
        trial = FitConfig.from_dict({**config.to_dict(), "ranks": list(ranks.as_tuple())})
        result = fit_best_of(x, trial, restarts)
        final = result.trace.final
        points.append(RankPoint(ranks, final.mismatches, final.relative))
        logger.info(
            "Core size evaluated",
            extra={"ranks": str(ranks), "mismatches": final.mismatches},
        )
        if meets_threshold(
            ErrorFigures(final.mismatches, final.relative),
            config.error_kind,
            config.error_threshold,
        ):
            return RankSelection(ranks, result.model, points)
    return RankSelection(None, None, points)

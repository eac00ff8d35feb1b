"""
Synthetic ground truth.

generate_planted draws a Boolean Tucker model at known densities, applies a
drift mode, then flips cells with probability eta. Every random component
comes from its own child stream of the seed (see boolcd.seeding), so adding a
drift or noise never changes the planted factors.

Every slot shares one row of C, so a planted tensor repeats the same O x F
slab over time unless a drift mode says otherwise.

Drift modes:
- Stationary: the reconstruction as drawn
- StepChange(at_slot): the shared row of C is redrawn from ``at_slot`` on, so
  the truth model itself changes regime at that slot
- Toggle(obj, feat): cell (obj, feat) alternates 0, 1, 0, ... over time;
  the truth model does not carry the toggle
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import List, NamedTuple, Tuple, Union

import numpy as np

from .batch_tucker import TuckerModel
from .config import Ranks
from .errors import CapacityError, ConfigError
from .logs import get_logger
from .seeding import bernoulli_bits, check_seed, generator
from .tensor_core import BoolMatrix, BoolTensor3, Mode, unfold


logger = get_logger(__name__)

# Largest search-space exponent the exhaustive oracle accepts
MAX_ORACLE_EXPONENT = 24


@dataclass(frozen=True)
class Stationary:
    def to_spec(self) -> str:
        return "stationary"


@dataclass(frozen=True)
class StepChange:
    at_slot: int

    def to_spec(self) -> str:
        return f"step:{self.at_slot}"


@dataclass(frozen=True)
class Toggle:
    obj: int
    feat: int

    def to_spec(self) -> str:
        return f"toggle:{self.obj},{self.feat}"


DriftMode = Union[Stationary, StepChange, Toggle]


def parse_drift(text: str) -> DriftMode:
    """Parse ``stationary``, ``step:<s>`` or ``toggle:<o>,<f>``."""
    kind, _, rest = text.partition(":")
    try:
        if kind == "stationary" and not rest:
            return Stationary()
        if kind == "step":
            return StepChange(int(rest))
        if kind == "toggle":
            obj, feat = rest.split(",")
            return Toggle(int(obj), int(feat))
    except ValueError as exc:
        raise ConfigError(f"Malformed drift mode {text!r}") from exc
    raise ConfigError(f"Unknown drift mode {text!r}")


@dataclass(frozen=True)
class PlantedSpec:
    dims: Tuple[int, int, int]
    ranks: Ranks
    densities: Tuple[float, float, float] = (0.3, 0.3, 0.3)
    core_density: float = 0.3
    noise: float = 0.0
    seed: int = 0
    drift: DriftMode = field(default_factory=Stationary)

    def validate(self) -> None:
        self.ranks.check_against(self.dims)
        check_seed(self.seed)
        for name, value in (
            ("pA", self.densities[0]),
            ("pB", self.densities[1]),
            ("pC", self.densities[2]),
            ("core density", self.core_density),
            ("noise", self.noise),
        ):
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")
        o, f, t = self.dims
        if isinstance(self.drift, StepChange) and not 0 <= self.drift.at_slot <= t:
            raise ConfigError(f"Step slot {self.drift.at_slot} outside [0, {t}]")
        if isinstance(self.drift, Toggle) and not (
            0 <= self.drift.obj < o and 0 <= self.drift.feat < f
        ):
            raise ConfigError(
                f"Toggle cell ({self.drift.obj}, {self.drift.feat}) outside {o} x {f}"
            )


def _pattern_row(rng: np.random.Generator, r3: int, p_c: float) -> np.ndarray:
    """One row of C; at least one time pattern is active when p_c > 0."""
    row = bernoulli_bits(rng, (r3,), p_c)
    if p_c > 0.0 and not row.any():
        row[int(rng.integers(r3))] = 1
    return row


def draw_model(spec: PlantedSpec) -> TuckerModel:
    """
    The planted factors and core, drift applied to C.

    Every slot shares one row of C, so the truth is constant over time; a
    step change swaps that row for a redrawn one from ``at_slot`` on.
    """
    o, f, t = spec.dims
    r1, r2, r3 = spec.ranks.as_tuple()
    p_a, p_b, p_c = spec.densities
    a = bernoulli_bits(generator(spec.seed, "A"), (o, r1), p_a)
    b = bernoulli_bits(generator(spec.seed, "B"), (f, r2), p_b)
    c = np.tile(_pattern_row(generator(spec.seed, "C"), r3, p_c), (t, 1))
    core = bernoulli_bits(generator(spec.seed, "G"), (r1, r2, r3), spec.core_density)
    if isinstance(spec.drift, StepChange):
        c[spec.drift.at_slot:] = _pattern_row(generator(spec.seed, "step"), r3, p_c)
    return TuckerModel(
        BoolTensor3.from_dense(core),
        BoolMatrix.from_dense(a),
        BoolMatrix.from_dense(b),
        BoolMatrix.from_dense(c),
    )


def generate_planted(spec: PlantedSpec) -> Tuple[List[BoolMatrix], TuckerModel]:
    """
    Planted slots and the truth model they were drawn from.

    Returns:
        (slots, truth): one O x F matrix per time slot
    """
    spec.validate()
    truth = draw_model(spec)
    dense = truth.reconstruct().to_dense()
    if isinstance(spec.drift, Toggle):
        dense[spec.drift.obj, spec.drift.feat, :] = np.arange(spec.dims[2]) % 2
    flips = bernoulli_bits(generator(spec.seed, "noise"), dense.shape, spec.noise)
    dense ^= flips
    slots = [BoolMatrix.from_dense(dense[:, :, k]) for k in range(spec.dims[2])]
    logger.debug(
        "Planted data generated",
        extra={"dims": spec.dims, "drift": spec.drift.to_spec(), "flips": int(flips.sum())},
    )
    return slots, truth


def planted_tensor(spec: PlantedSpec) -> Tuple[BoolTensor3, TuckerModel]:
    """generate_planted with the slots stacked into one tensor."""
    slots, truth = generate_planted(spec)
    return BoolTensor3.from_slices(slots), truth


class OracleResult(NamedTuple):
    best_error: int
    best_model: TuckerModel


def search_exponent(dims: Tuple[int, int, int], ranks: Ranks) -> int:
    o, f, t = dims
    r1, r2, r3 = ranks.as_tuple()
    return o * r1 + f * r2 + t * r3 + r1 * r2 * r3


def _bits(code: int, n: int) -> np.ndarray:
    return ((code >> np.arange(n)) & 1).astype(np.uint8)


def exhaustive_oracle(x: BoolTensor3, ranks: Ranks) -> OracleResult:
    """
    Global minimum of the mismatch count over every binary (G, A, B, C).

    Given B, C and G the rows of A are independent, so each row's best value
    is found separately; this is the same minimum as enumerating A whole.

    Raises:
        CapacityError: when the search space exceeds 2**24 assignments
    """
    ranks.check_against(x.dims)
    exponent = search_exponent(x.dims, ranks)
    if exponent > MAX_ORACLE_EXPONENT:
        raise CapacityError(
            f"Exhaustive search over 2^{exponent} assignments exceeds "
            f"the 2^{MAX_ORACLE_EXPONENT} guard"
        )
    o, f, t = x.dims
    r1, r2, r3 = ranks.as_tuple()
    target = unfold(x, Mode.MODE1).to_dense().astype(bool)
    a_candidates = np.array([_bits(code, r1) for code in range(1 << r1)], dtype=np.int64)

    best_error = None
    best_parts = None
    for b_code, c_code, g_code in itertools.product(
        range(1 << (f * r2)), range(1 << (t * r3)), range(1 << (r1 * r2 * r3))
    ):
        b = _bits(b_code, f * r2).reshape(f, r2)
        c = _bits(c_code, t * r3).reshape(t, r3)
        g = _bits(g_code, r1 * r2 * r3).reshape((r1, r2, r3), order="F")
        # H[r1, j + k*F] = OR_{r2, r3} G[r1, r2, r3] B[j, r2] C[k, r3]
        h = np.einsum("pqr,jq,kr->pjk", g.astype(np.int64), b, c) > 0
        h = h.reshape(r1, f * t, order="F").astype(np.int64)
        covered = (a_candidates @ h) > 0
        costs = (covered[None, :, :] != target[:, None, :]).sum(axis=2)
        choice = costs.argmin(axis=1)
        total = int(costs[np.arange(o), choice].sum())
        if best_error is None or total < best_error:
            best_error = total
            best_parts = (g, a_candidates[choice].astype(np.uint8), b, c)
            if total == 0:
                break

    g, a, b, c = best_parts
    model = TuckerModel(
        BoolTensor3.from_dense(g),
        BoolMatrix.from_dense(a),
        BoolMatrix.from_dense(b),
        BoolMatrix.from_dense(c),
    )
    return OracleResult(best_error, model)

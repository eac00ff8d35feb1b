from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Tuple

from .errors import ConfigError
from .seeding import check_seed


THREADS_ENV_VAR = "BOOLCD_THREADS"
DEFAULT_MAX_THREADS = 4

DEFAULT_ERROR_THRESHOLD = 0.05
DEFAULT_MAX_SWEEPS = 100
DEFAULT_STALL_SWEEPS = 3
DEFAULT_INIT_DENSITY = 0.5
DEFAULT_WINDOW = 12
DEFAULT_DECAY = 0.9
DEFAULT_INNER_SWEEPS = 5

# Clamp for density-matched initialisation
MIN_INIT_DENSITY = 0.05
MAX_INIT_DENSITY = 0.95


class ErrorKind(Enum):
    """Which error figure is compared against the threshold."""
    RELATIVE = "rel"
    ABSOLUTE = "abs"

    @staticmethod
    def parse(text: str) -> "ErrorKind":
        for kind in ErrorKind:
            if text in (kind.value, kind.name.lower()):
                return kind
        raise ConfigError(f"Unknown error kind: {text!r} (expected 'rel' or 'abs')")


@dataclass(frozen=True)
class Ranks:
    """Core tensor size (R1, R2, R3)."""

    r1: int
    r2: int
    r3: int

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.r1, self.r2, self.r3)

    @property
    def core_cells(self) -> int:
        return self.r1 * self.r2 * self.r3

    def validate(self) -> None:
        for name, value in zip(("r1", "r2", "r3"), self.as_tuple()):
            if int(value) != value or value < 1:
                raise ConfigError(f"Rank {name} must be a positive integer, got {value}")

    def check_against(self, dims: Tuple[int, int, int], time_limit: Optional[int] = None) -> None:
        """
        Ensure every rank fits its mode.

        Args:
            dims: (O, F, T) of the tensor being fitted
            time_limit: Override for the T bound (streams bound r3 by the window)
        """
        self.validate()
        o, f, t = dims
        if time_limit is not None:
            t = time_limit
        for name, rank, dim, label in (
            ("r1", self.r1, o, "objects"),
            ("r2", self.r2, f, "features"),
            ("r3", self.r3, t, "time slots"),
        ):
            if rank > dim:
                raise ConfigError(f"Rank {name}={rank} exceeds {dim} {label}")

    @staticmethod
    def parse(text: str) -> "Ranks":
        """Parse ``"R1,R2,R3"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise ConfigError(f"Ranks must be three comma-separated integers, got {text!r}")
        try:
            ranks = Ranks(*(int(p) for p in parts))
        except ValueError as exc:
            raise ConfigError(f"Ranks must be integers, got {text!r}") from exc
        ranks.validate()
        return ranks

    def __str__(self) -> str:
        return f"{self.r1},{self.r2},{self.r3}"


@dataclass
class FitConfig:
    """
    Configuration of a batch Boolean Tucker fit.
    """

    ranks: Ranks
    error_threshold: float = DEFAULT_ERROR_THRESHOLD
    max_sweeps: int = DEFAULT_MAX_SWEEPS
    stall_sweeps: int = DEFAULT_STALL_SWEEPS
    seed: int = 0
    init_density: float = DEFAULT_INIT_DENSITY
    error_kind: ErrorKind = ErrorKind.RELATIVE
    # "fixed" uses init_density, "density-matched" the cube root of the data density
    init_strategy: str = "fixed"

    def validate(self) -> None:
        self.ranks.validate()
        if not self.error_threshold >= 0:
            raise ConfigError(f"Error threshold must be >= 0, got {self.error_threshold}")
        if self.max_sweeps < 1:
            raise ConfigError(f"max_sweeps must be >= 1, got {self.max_sweeps}")
        if self.stall_sweeps < 1:
            raise ConfigError(f"stall_sweeps must be >= 1, got {self.stall_sweeps}")
        if not 0.0 < self.init_density < 1.0:
            raise ConfigError(f"init_density must lie in (0, 1), got {self.init_density}")
        check_seed(self.seed)
        if self.init_strategy not in ("fixed", "density-matched"):
            raise ConfigError(f"Unknown init strategy: {self.init_strategy!r}")

    def with_seed(self, seed: int) -> "FitConfig":
        data = self.to_dict()
        data["seed"] = seed
        return FitConfig.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["ranks"] = list(self.ranks.as_tuple())
        data["error_kind"] = self.error_kind.value
        return data

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "FitConfig":
        return FitConfig(
            ranks=Ranks(*data["ranks"]),
            error_threshold=data.get("error_threshold", DEFAULT_ERROR_THRESHOLD),
            max_sweeps=data.get("max_sweeps", DEFAULT_MAX_SWEEPS),
            stall_sweeps=data.get("stall_sweeps", DEFAULT_STALL_SWEEPS),
            seed=data.get("seed", 0),
            init_density=data.get("init_density", DEFAULT_INIT_DENSITY),
            error_kind=ErrorKind.parse(data.get("error_kind", "rel")),
            init_strategy=data.get("init_strategy", "fixed"),
        )


def density_matched_init(tensor_density: float) -> float:
    """Per-factor density whose cube reproduces the data density."""
    value = math.pow(max(tensor_density, 0.0), 1.0 / 3.0)
    return min(MAX_INIT_DENSITY, max(MIN_INIT_DENSITY, value))


class TimeWeight:
    """
    F(T): the factor applied to the old covariance accumulator at slot t.
    """

    def weight(self, slot_number: int) -> float:
        raise NotImplementedError

    def validate(self) -> None:
        raise NotImplementedError

    def to_spec(self) -> str:
        raise NotImplementedError

    @staticmethod
    def exponential_half_life(half_life: float) -> "ExponentialDecay":
        """Decay whose cumulative weight halves every ``half_life`` slots."""
        if not half_life > 0:
            raise ConfigError(f"Half-life must be positive, got {half_life}")
        return ExponentialDecay(0.5 ** (1.0 / half_life))


def _check_unit(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0):
        raise ConfigError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class Constant(TimeWeight):
    lam: float

    def weight(self, slot_number: int) -> float:
        return self.lam

    def validate(self) -> None:
        _check_unit("Constant weight", self.lam)

    def to_spec(self) -> str:
        return f"const:{self.lam:g}"


@dataclass(frozen=True)
class ExponentialDecay(TimeWeight):
    """Per-slot decay λ; slot s contributes λ^(t-s) after slot t."""

    lam: float

    def weight(self, slot_number: int) -> float:
        return self.lam

    def validate(self) -> None:
        _check_unit("Decay λ", self.lam)

    def to_spec(self) -> str:
        return f"decay:{self.lam:g}"


@dataclass(frozen=True)
class SeasonalMask(TimeWeight):
    """Weight ``weights[t mod period]``: keep history only at selected phases."""

    period: int
    weights: Tuple[float, ...]

    def weight(self, slot_number: int) -> float:
        return self.weights[slot_number % self.period]

    def validate(self) -> None:
        if self.period < 1:
            raise ConfigError(f"Seasonal period must be >= 1, got {self.period}")
        if len(self.weights) != self.period:
            raise ConfigError(
                f"Seasonal mask needs {self.period} weights, got {len(self.weights)}"
            )
        for w in self.weights:
            _check_unit("Seasonal weight", w)

    def to_spec(self) -> str:
        return f"seasonal:{self.period}:" + ",".join(f"{w:g}" for w in self.weights)


def parse_time_weight(text: str) -> TimeWeight:
    """
    Parse ``const:<λ>``, ``decay:<λ>`` or ``seasonal:<period>:<w1,...>``.
    """
    kind, _, rest = text.partition(":")
    try:
        if kind == "const":
            weight: TimeWeight = Constant(float(rest))
        elif kind == "decay":
            weight = ExponentialDecay(float(rest))
        elif kind == "seasonal":
            period_text, _, weights_text = rest.partition(":")
            weights = tuple(float(w) for w in weights_text.split(",") if w.strip())
            weight = SeasonalMask(int(period_text), weights)
        else:
            raise ConfigError(f"Unknown time weight {text!r}")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"Malformed time weight {text!r}") from exc
    weight.validate()
    return weight


@dataclass
class StreamConfig:
    """
    Configuration of an incremental (streaming) fit.
    """

    ranks: Ranks
    window_w: int = DEFAULT_WINDOW
    time_weight: TimeWeight = field(default_factory=lambda: ExponentialDecay(DEFAULT_DECAY))
    inner_sweeps: int = DEFAULT_INNER_SWEEPS
    error_threshold: float = DEFAULT_ERROR_THRESHOLD
    seed: int = 0
    error_kind: ErrorKind = ErrorKind.RELATIVE
    bootstrap_sweeps: int = DEFAULT_MAX_SWEEPS
    init_density: float = DEFAULT_INIT_DENSITY

    def validate(self) -> None:
        self.ranks.validate()
        if self.window_w < 2:
            raise ConfigError(f"Window must hold at least 2 slots, got {self.window_w}")
        if self.ranks.r3 > self.window_w:
            raise ConfigError(f"Rank r3={self.ranks.r3} exceeds window of {self.window_w} slots")
        if self.inner_sweeps < 1:
            raise ConfigError(f"inner_sweeps must be >= 1, got {self.inner_sweeps}")
        self.time_weight.validate()
        self.to_fit_config().validate()

    def to_fit_config(self) -> FitConfig:
        """The batch configuration used for the bootstrap pair."""
        return FitConfig(
            ranks=self.ranks,
            error_threshold=self.error_threshold,
            max_sweeps=self.bootstrap_sweeps,
            seed=self.seed,
            init_density=self.init_density,
            error_kind=self.error_kind,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ranks": list(self.ranks.as_tuple()),
            "window_w": self.window_w,
            "time_weight": self.time_weight.to_spec(),
            "inner_sweeps": self.inner_sweeps,
            "error_threshold": self.error_threshold,
            "seed": self.seed,
            "error_kind": self.error_kind.value,
            "bootstrap_sweeps": self.bootstrap_sweeps,
            "init_density": self.init_density,
        }

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "StreamConfig":
        return StreamConfig(
            ranks=Ranks(*data["ranks"]),
            window_w=data.get("window_w", DEFAULT_WINDOW),
            time_weight=parse_time_weight(data.get("time_weight", f"decay:{DEFAULT_DECAY}")),
            inner_sweeps=data.get("inner_sweeps", DEFAULT_INNER_SWEEPS),
            error_threshold=data.get("error_threshold", DEFAULT_ERROR_THRESHOLD),
            seed=data.get("seed", 0),
            error_kind=ErrorKind.parse(data.get("error_kind", "rel")),
            bootstrap_sweeps=data.get("bootstrap_sweeps", DEFAULT_MAX_SWEEPS),
            init_density=data.get("init_density", DEFAULT_INIT_DENSITY),
        )


def resolve_thread_count(environ: Optional[Dict[str, str]] = None) -> int:
    """
    Worker count for bench sweeps; ``BOOLCD_THREADS`` overrides the default.
    """
    env = os.environ if environ is None else environ
    raw = env.get(THREADS_ENV_VAR, "").strip()
    if raw:
        try:
            count = int(raw)
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV_VAR} must be a positive integer, got {raw!r}") from exc
        if count < 1:
            raise ConfigError(f"{THREADS_ENV_VAR} must be a positive integer, got {raw!r}")
        return count
    return max(1, min(DEFAULT_MAX_THREADS, os.cpu_count() or 1))

"""Traffic distributions, maximum-likelihood fits, and pedestrian sampling.

Seed contract
-------------
All randomness flows from one 64-bit master seed.  Child streams are derived
with a splitmix64 avalanche over integer keys::

    seed(master, k1, k2, ...) = splitmix64(...splitmix64(master ^ k1) ^ k2...)

and every stream draws exclusively via ``Generator.random()`` uniforms, so a
given (master_seed, key path) always reproduces the same values regardless of
which other streams were consumed first.  The mixing function is part of the
stable interface; changing it changes every result.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import TYPE_CHECKING, Mapping, Optional, Sequence

import numpy as np

if TYPE_CHECKING:  # pragma: no cover - type-only import, avoids a cycle
    from .world import ScenarioConfig

_M64 = (1 << 64) - 1

# stream-purpose keys (stable; see module docstring)
KEY_SCENE = 1
KEY_SENSOR = 2
KEY_CLUSTER = 3
MODE_IDS = {"single_vehicle": 1, "v2i": 2}
SENSOR_IDS = {"onboard": 101, "roadside": 102}

_STD_NORMAL = NormalDist()


def splitmix64(x: int) -> int:
    """One round of the splitmix64 avalanche on a 64-bit integer."""
    x = (x + 0x9E3779B97F4A7C15) & _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return x ^ (x >> 31)


def derive_seed(master_seed: int, *keys: int) -> int:
    """Mix integer keys into the master seed; order of keys is significant."""
    state = master_seed & _M64
    for k in keys:
        state = splitmix64(state ^ (k & _M64))
    return state


def make_stream(master_seed: int, *keys: int) -> np.random.Generator:
    """A PCG64 generator owned by exactly one consumer at a time."""
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, *keys)))


class LazyStream:
    """A stream that defers generator construction until the first draw.

    Most per-frame sensor streams are never consumed (nothing to cluster, no
    camouflage test), so building the generator eagerly would dominate the
    frame budget.  Draw-for-draw identical to ``make_stream`` with the same
    seed path.
    """

    __slots__ = ("seed", "_gen")

    def __init__(self, master_seed: int, *keys: int):
        self.seed = derive_seed(master_seed, *keys)
        self._gen = None

    def random(self) -> float:
        if self._gen is None:
            self._gen = np.random.Generator(np.random.PCG64(self.seed))
        return self._gen.random()


class FitError(ValueError):
    """Raised when a sample set cannot support a distribution fit."""


@dataclass(frozen=True)
class ExponentialModel:
    """Negative-exponential headway model with rate per second."""

    rate: float

    def __post_init__(self):
        if self.rate <= 0.0:
            raise ValueError(f"rate must be positive, got {self.rate}")


@dataclass(frozen=True)
class LogNormalModel:
    """Log-normal speed model; mu/sigma act on ln(speed in m/s)."""

    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


def exp_pdf(model: ExponentialModel, h: float) -> float:
    """Density lambda * exp(-lambda * h) for headway h >= 0 seconds."""
    if h < 0.0:
        raise ValueError(f"headway must be nonnegative, got {h}")
    return model.rate * math.exp(-model.rate * h)


def lognormal_pdf(model: LogNormalModel, v: float) -> float:
    """Standard log-normal density at speed v > 0 m/s."""
    if v <= 0.0:
        raise ValueError(f"speed must be positive, got {v}")
    z = (math.log(v) - model.mu) / model.sigma
    return math.exp(-0.5 * z * z) / (model.sigma * v * math.sqrt(2.0 * math.pi))


def fit_exponential(samples: Sequence[float]) -> ExponentialModel:
    """Maximum-likelihood fit: rate = 1 / mean(samples)."""
    data = np.asarray(samples, dtype=float)
    if data.size == 0:
        raise FitError("cannot fit an exponential to an empty sample set")
    if np.any(data < 0.0):
        raise FitError("exponential samples must be nonnegative")
    mean = float(data.mean())
    if mean <= 0.0:
        raise FitError("exponential fit requires a positive sample mean")
    return ExponentialModel(rate=1.0 / mean)


def fit_lognormal(samples: Sequence[float]) -> LogNormalModel:
    """Maximum-likelihood fit: mu/sigma are the mean and population std of ln(v)."""
    data = np.asarray(samples, dtype=float)
    if data.size == 0:
        raise FitError("cannot fit a log-normal to an empty sample set")
    if np.any(data <= 0.0):
        raise FitError("log-normal samples must be strictly positive")
    logs = np.log(data)
    sigma = float(logs.std())
    if sigma <= 0.0:
        raise FitError("degenerate fit: all samples equal, sigma would be zero")
    return LogNormalModel(mu=float(logs.mean()), sigma=sigma)


def sample_headway(model: ExponentialModel, rng: np.random.Generator) -> float:
    """Inverse-CDF draw: h = -ln(1 - u) / lambda."""
    u = rng.random()
    return -math.log1p(-u) / model.rate


def sample_speed(model: LogNormalModel, rng: np.random.Generator) -> float:
    """Inverse-CDF draw: v = exp(mu + sigma * probit(u))."""
    u = rng.random()
    return math.exp(model.mu + model.sigma * _STD_NORMAL.inv_cdf(u))


# --- pedestrian demographics --------------------------------------------------

AGE_GROUPS = ("teen", "young", "middle", "older")
AGE_BOUNDS: Mapping[str, tuple[int, int]] = {
    "teen": (13, 18),
    "young": (19, 30),
    "middle": (31, 59),
    "older": (60, 85),
}
GENDERS = ("male", "female")
RISK_PREFERENCES = ("unaware", "pass_first", "yield_back")

# mean walking speed (m/s) per age group
DEFAULT_GROUP_SPEEDS: Mapping[str, float] = {
    "teen": 1.46,
    "young": 1.46,
    "middle": 1.45,
    "older": 1.03,
}
DEFAULT_SPEED_SD = 0.15
MIN_WALK_SPEED = 0.3


@dataclass(frozen=True)
class PedestrianProfile:
    age: int
    gender: str
    age_group: str
    risk_preference: str
    base_speed: float

    def __post_init__(self):
        if self.base_speed <= 0.0:
            raise ValueError("base_speed must be positive")
        lo, hi = AGE_BOUNDS[self.age_group]
        if not lo <= self.age <= hi:
            raise ValueError(f"age {self.age} outside {self.age_group} bounds [{lo}, {hi}]")

    def to_dict(self) -> dict:
        return {
            "age": self.age,
            "gender": self.gender,
            "age_group": self.age_group,
            "risk_preference": self.risk_preference,
            "base_speed": self.base_speed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PedestrianProfile":
        return cls(
            age=int(d["age"]),
            gender=str(d["gender"]),
            age_group=str(d["age_group"]),
            risk_preference=str(d["risk_preference"]),
            base_speed=float(d["base_speed"]),
        )


class DemographicsTable:
    """Sampling weights over (age_group, gender, risk_preference) cells.

    Weights are renormalized at load time and verified to sum to one.
    Per-group walking speeds are truncated normals: mean from
    ``group_speeds``, spread ``speed_sd``, floor ``min_speed``.
    """

    def __init__(
        self,
        weights: Mapping[tuple[str, str, str], float],
        group_speeds: Optional[Mapping[str, float]] = None,
        speed_sd: float = DEFAULT_SPEED_SD,
        min_speed: float = MIN_WALK_SPEED,
    ):
        cells = []
        raw = []
        for cell, w in weights.items():
            group, gender, risk = cell
            if group not in AGE_GROUPS:
                raise ValueError(f"unknown age group {group!r}")
            if gender not in GENDERS:
                raise ValueError(f"unknown gender {gender!r}")
            if risk not in RISK_PREFERENCES:
                raise ValueError(f"unknown risk preference {risk!r}")
            if w < 0.0:
                raise ValueError(f"negative weight for cell {cell}")
            cells.append((group, gender, risk))
            raw.append(float(w))
        total = sum(raw)
        if total <= 0.0:
            raise ValueError("demographics weights must have positive total mass")
        self.cells = tuple(cells)
        self.weights = tuple(w / total for w in raw)
        assert abs(sum(self.weights) - 1.0) <= 1e-9
        self._cumulative = np.cumsum(self.weights)
        self.group_speeds = dict(group_speeds or DEFAULT_GROUP_SPEEDS)
        for g in AGE_GROUPS:
            if g not in self.group_speeds:
                raise ValueError(f"missing speed for age group {g!r}")
        if speed_sd < 0.0 or min_speed <= 0.0:
            raise ValueError("speed_sd must be >= 0 and min_speed > 0")
        self.speed_sd = speed_sd
        self.min_speed = min_speed

    @classmethod
    def default(cls) -> "DemographicsTable":
        """Uniform weights over every (group, gender, risk) cell."""
        weights = {
            (g, s, r): 1.0
            for g in AGE_GROUPS
            for s in GENDERS
            for r in RISK_PREFERENCES
        }
        return cls(weights)

    def to_dict(self) -> dict:
        return {
            "weights": {"|".join(cell): w for cell, w in zip(self.cells, self.weights)},
            "group_speeds": dict(self.group_speeds),
            "speed_sd": self.speed_sd,
            "min_speed": self.min_speed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "DemographicsTable":
        weights = {}
        for key, w in d["weights"].items():
            parts = tuple(key.split("|"))
            if len(parts) != 3:
                raise ValueError(f"demographics cell key must be 'group|gender|risk', got {key!r}")
            weights[parts] = float(w)
        return cls(
            weights,
            group_speeds=d.get("group_speeds"),
            speed_sd=float(d.get("speed_sd", DEFAULT_SPEED_SD)),
            min_speed=float(d.get("min_speed", MIN_WALK_SPEED)),
        )


def sample_profile(table: DemographicsTable, rng: np.random.Generator) -> PedestrianProfile:
    """Draw one pedestrian: cell by weight, age uniform in group, speed truncated normal."""
    u = rng.random()
    idx = int(np.searchsorted(table._cumulative, u, side="right"))
    idx = min(idx, len(table.cells) - 1)
    group, gender, risk = table.cells[idx]
    lo, hi = AGE_BOUNDS[group]
    age = lo + int(rng.random() * (hi - lo + 1))
    age = min(age, hi)
    mean = table.group_speeds[group]
    speed = _truncated_normal(mean, table.speed_sd, table.min_speed, rng)
    return PedestrianProfile(age=age, gender=gender, age_group=group, risk_preference=risk, base_speed=speed)


def _truncated_normal(mean: float, sd: float, floor: float, rng: np.random.Generator) -> float:
    if sd == 0.0:
        return max(mean, floor)
    for _ in range(1000):
        u = rng.random()
        # inv_cdf is undefined at exactly 0/1; the stream never returns 1.0
        if u <= 0.0:
            continue
        value = mean + sd * _STD_NORMAL.inv_cdf(u)
        if value >= floor:
            return value
    return floor


# --- scenario initial-parameter sampling ---------------------------------------


@dataclass(frozen=True)
class VehicleParams:
    x: float
    y: float
    heading: float
    speed: float


@dataclass(frozen=True)
class PedestrianParams:
    profile: PedestrianProfile
    start: tuple[float, float]
    destination: tuple[float, float]
    trigger_distance: float
    color: tuple[float, float, float]


@dataclass(frozen=True)
class SceneParams:
    """One sampled initial condition: the joint draw over every role."""

    vehicles: tuple[VehicleParams, ...]
    pedestrians: tuple[PedestrianParams, ...]

    def to_dict(self) -> dict:
        return {
            "vehicles": [[v.x, v.y, v.heading, v.speed] for v in self.vehicles],
            "pedestrians": [
                {
                    "profile": p.profile.to_dict(),
                    "start": list(p.start),
                    "destination": list(p.destination),
                    "trigger_distance": p.trigger_distance,
                    "color": list(p.color),
                }
                for p in self.pedestrians
            ],
        }


class PlacementError(ValueError):
    """Raised when vehicles cannot be placed on the requested lane span."""


def sample_initial_scene(scenario: "ScenarioConfig", rng: np.random.Generator) -> SceneParams:
    """Sample the full initial parameter set for one episode.

    Vehicle speeds come from the intersection or mid-block log-normal per the
    scenario flag, positions from their placement rule (fixed point, uniform
    span, or headway-times-leader-speed behind a same-lane leader), and each
    pedestrian gets a profile plus its sampled walk-trigger distance.  All
    draws are independent, so the joint density is the product of the parts.
    """
    speed_model = (
        scenario.rules.intersection_speed
        if scenario.layout.intersection
        else scenario.rules.midblock_speed
    )
    vehicles: list[VehicleParams] = []
    for spec in scenario.vehicles:
        if spec.speed == "sample":
            speed = min(sample_speed(speed_model, rng), scenario.rules.speed_limit)
        else:
            speed = float(spec.speed)
        placement = spec.placement
        kind = placement[0]
        if kind == "fixed":
            x = placement[1]
        elif kind == "uniform":
            lo, hi = placement[1], placement[2]
            x = lo + rng.random() * (hi - lo)
        elif kind == "headway":
            leader_idx = placement[1]
            if leader_idx >= len(vehicles):
                raise PlacementError(
                    f"headway placement needs an already-placed leader, got index {leader_idx}"
                )
            leader = vehicles[leader_idx]
            if scenario.vehicles[leader_idx].lane_y != spec.lane_y:
                raise PlacementError("headway placement requires the same lane as the leader")
            gap = sample_headway(scenario.rules.headway, rng) * max(leader.speed, 0.1)
            x = leader.x - gap - spec.extent[0]
            if x < scenario.rules.lane_min_x:
                raise PlacementError(
                    f"vehicle placed at x={x:.1f}, before the lane start {scenario.rules.lane_min_x}"
                )
        else:  # pragma: no cover - specs are built internally
            raise PlacementError(f"unknown placement rule {kind!r}")
        vehicles.append(VehicleParams(x=x, y=spec.lane_y, heading=spec.heading, speed=speed))

    pedestrians: list[PedestrianParams] = []
    for ped in scenario.pedestrians:
        profile = sample_profile(scenario.demographics, rng)
        lo, hi = ped.trigger_range
        trigger = lo + rng.random() * (hi - lo)
        pedestrians.append(
            PedestrianParams(
                profile=profile,
                start=ped.start,
                destination=ped.destination,
                trigger_distance=trigger,
                color=ped.color,
            )
        )
    return SceneParams(vehicles=tuple(vehicles), pedestrians=tuple(pedestrians))

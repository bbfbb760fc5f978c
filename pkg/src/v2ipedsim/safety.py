"""Surrogate safety measures, injury severity, and report aggregation.

Event labels follow a three-way partition per episode: contact (or a
predicted zero-distance pass) is a collision; a close pass that crosses the
time or speed danger thresholds is a conflict; everything else is clean.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .world import EpisodeRecord

NON_CONFLICT = "non_conflict"
CONFLICT = "conflict"
COLLISION = "collision"

MPS_TO_KMH = 3.6

# logistic injury-severity coefficients: intercept, squared-speed, age
INJURY_INTERCEPT = -2.9893
INJURY_SPEED_SQ = 0.0013
INJURY_AGE = 0.0286


class AlignmentError(ValueError):
    """Raised when paired trajectories do not share a common time base."""


class AggregationError(ValueError):
    """Raised when a report is requested over no records."""


@dataclass(frozen=True)
class ConflictIndicators:
    """Minimum predicted distance (m), time to it (s), conflicting speed (m/s)."""

    md: float
    tmd: float
    cs: float

    def __post_init__(self):
        if self.tmd < 0.0 or self.cs < 0.0:
            raise ValueError("tmd and cs must be nonnegative")


@dataclass(frozen=True)
class SafetyParams:
    """Aggregation defaults; the proximity gate ships at its calibrated value."""

    horizon: float = 5.0
    combined_radius: float = 1.2   # vehicle half-width + pedestrian radius
    time_threshold: float = 1.5
    speed_threshold: float = 1.0
    proximity_gate: float = 3.0
    injury_speed_unit: str = "kmh"  # unit fed to the injury logistic
    v_grid: tuple = tuple(range(0, 81, 5))
    a_grid: tuple = tuple(range(10, 81, 10))


def compute_indicators(
    ego_traj: Sequence[Sequence[float]],
    ped_traj: Sequence[Sequence[float]],
    horizon: float = 5.0,
    dt: float = 0.05,
    combined_radius: float = 1.2,
) -> ConflictIndicators:
    """Scan two recorded trajectories for their most critical predicted pass.

    Each trajectory row is (x, y, vx, vy) per frame.  At every frame both
    agents are extrapolated at constant velocity over [0, horizon]; the
    predicted separation minus ``combined_radius`` is minimized in closed
    form.  MD is the global minimum, TMD the predicted time remaining at the
    frame achieving it (earliest such frame), CS the relative speed there.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    ego = np.asarray(ego_traj, dtype=float)
    ped = np.asarray(ped_traj, dtype=float)
    if ego.ndim != 2 or ped.ndim != 2 or ego.shape[1] != 4 or ped.shape[1] != 4:
        raise AlignmentError("trajectories must be (N, 4) arrays of x, y, vx, vy")
    if ego.shape[0] != ped.shape[0]:
        raise AlignmentError(
            f"trajectories must be time-aligned, got lengths {ego.shape[0]} and {ped.shape[0]}"
        )
    if ego.shape[0] == 0:
        raise AlignmentError("trajectories must be nonempty")

    rx = ped[:, 0] - ego[:, 0]
    ry = ped[:, 1] - ego[:, 1]
    ux = ped[:, 2] - ego[:, 2]
    uy = ped[:, 3] - ego[:, 3]
    u2 = ux * ux + uy * uy
    ru = rx * ux + ry * uy
    with np.errstate(divide="ignore", invalid="ignore"):
        t_star = np.where(u2 > 0.0, -ru / np.where(u2 > 0.0, u2, 1.0), 0.0)
    np.clip(t_star, 0.0, horizon, out=t_star)
    cx = rx + ux * t_star
    cy = ry + uy * t_star
    dist = np.sqrt(cx * cx + cy * cy) - combined_radius
    idx = int(np.argmin(dist))
    return ConflictIndicators(
        md=float(dist[idx]),
        tmd=float(t_star[idx]),
        cs=float(math.sqrt(u2[idx])),
    )


def classify_event(
    indicators: ConflictIndicators,
    contact: bool,
    time_threshold: float = 1.5,
    speed_threshold: float = 1.0,
    proximity_gate: float = 5.0,
) -> str:
    """Label one episode: collision beats conflict beats non-conflict.

    Collision on physical contact or a predicted separation that reaches
    zero.  Conflict when the pass came within the proximity gate and either
    the time margin fell under ``time_threshold`` or the conflicting speed
    exceeded ``speed_threshold``.
    """
    if contact or indicators.md <= 0.0:
        return COLLISION
    if indicators.md < proximity_gate and (
        indicators.tmd < time_threshold or indicators.cs > speed_threshold
    ):
        return CONFLICT
    return NON_CONFLICT


def injury_probability(p_collision: float, v: float, a: float) -> float:
    """Probability of severe injury or death given impact speed and age.

    ``v`` is taken in the unit the logistic was fitted in (km/h downstream);
    the collision probability scales the logistic linearly.
    """
    if not 0.0 <= p_collision <= 1.0:
        raise ValueError(f"p_collision must be in [0, 1], got {p_collision}")
    if v < 0.0 or a < 0.0:
        raise ValueError("speed and age must be nonnegative")
    logit = INJURY_INTERCEPT + INJURY_SPEED_SQ * v * v + INJURY_AGE * a
    return p_collision / (1.0 + math.exp(-logit))


def trajectories_from_record(record: EpisodeRecord) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame (x, y, vx, vy) for the ego and the pedestrian."""
    rows = np.asarray(record.frames, dtype=float)
    if rows.size == 0:
        raise AlignmentError("record holds no frames")
    ego = np.column_stack([
        rows[:, 1], rows[:, 2],
        rows[:, 4] * np.cos(rows[:, 3]), rows[:, 4] * np.sin(rows[:, 3]),
    ])
    ped = np.column_stack([
        rows[:, 5], rows[:, 6],
        rows[:, 8] * np.cos(rows[:, 7]), rows[:, 8] * np.sin(rows[:, 7]),
    ])
    return ego, ped


def first_detection_distance(record: EpisodeRecord) -> Optional[float]:
    """True ego-pedestrian distance at the earliest frame with any detection."""
    if not record.detections:
        return None
    frame = min(int(d[0]) for d in record.detections)
    row = record.frames[frame]
    return math.hypot(row[5] - row[1], row[6] - row[2])


def _nearest_rank(sorted_values: Sequence[float], pct: float) -> float:
    n = len(sorted_values)
    rank = max(1, math.ceil(pct / 100.0 * n))
    return sorted_values[rank - 1]


@dataclass
class SafetyReport:
    """Aggregated outcome statistics for one (scenario, mode) batch."""

    scenario: str
    mode: str
    episodes: int
    collision_rate: float
    conflict_rate: float
    mean_injury_probability: float
    fdd_p10: Optional[float]
    fdd_p50: Optional[float]
    fdd_p90: Optional[float]
    fdd_values: list = field(default_factory=list)
    injury_surface: list = field(default_factory=list)  # rows of [V, A, P_I]
    speed_unit: str = "kmh"

    CSV_COLUMNS = (
        "scenario", "mode", "episodes", "collision_rate", "conflict_rate",
        "mean_injury", "fdd_p10", "fdd_p50", "fdd_p90",
    )

    def csv_row(self) -> list:
        return [
            self.scenario, self.mode, self.episodes,
            self.collision_rate, self.conflict_rate, self.mean_injury_probability,
            self.fdd_p10, self.fdd_p50, self.fdd_p90,
        ]

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "mode": self.mode,
            "episodes": self.episodes,
            "collision_rate": self.collision_rate,
            "conflict_rate": self.conflict_rate,
            "mean_injury_probability": self.mean_injury_probability,
            "fdd_p10": self.fdd_p10,
            "fdd_p50": self.fdd_p50,
            "fdd_p90": self.fdd_p90,
            "fdd_values": list(self.fdd_values),
            "injury_surface": [list(r) for r in self.injury_surface],
            "speed_unit": self.speed_unit,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SafetyReport":
        return cls(
            scenario=d["scenario"],
            mode=d["mode"],
            episodes=int(d["episodes"]),
            collision_rate=float(d["collision_rate"]),
            conflict_rate=float(d["conflict_rate"]),
            mean_injury_probability=float(d["mean_injury_probability"]),
            fdd_p10=d["fdd_p10"],
            fdd_p50=d["fdd_p50"],
            fdd_p90=d["fdd_p90"],
            fdd_values=list(d.get("fdd_values", [])),
            injury_surface=[list(r) for r in d.get("injury_surface", [])],
            speed_unit=d.get("speed_unit", "kmh"),
        )


def classify_record(record: EpisodeRecord, params: SafetyParams) -> tuple[str, ConflictIndicators]:
    ego, ped = trajectories_from_record(record)
    indicators = compute_indicators(
        ego, ped, horizon=params.horizon, dt=record.dt,
        combined_radius=params.combined_radius,
    )
    label = classify_event(
        indicators,
        contact=record.collision is not None,
        time_threshold=params.time_threshold,
        speed_threshold=params.speed_threshold,
        proximity_gate=params.proximity_gate,
    )
    return label, indicators


def aggregate(
    records: Sequence[EpisodeRecord],
    scenario: str,
    mode: str,
    params: Optional[SafetyParams] = None,
) -> SafetyReport:
    """Fold episode records into a SafetyReport.

    Rates are exact counts over N.  The injury figure is the mean severity
    over collision-labeled episodes scaled by the collision rate; for a
    collision label without physical contact the conflicting speed stands in
    for the impact speed.
    """
    if not records:
        raise AggregationError("cannot aggregate zero records")
    params = params or SafetyParams()
    n = len(records)
    n_collision = 0
    n_conflict = 0
    severities = []
    fdd_values = []
    for record in records:
        label, indicators = classify_record(record, params)
        if label == COLLISION:
            n_collision += 1
            if record.collision is not None:
                v_mps = float(record.collision["impact_speed"])
                age = float(record.collision["pedestrian_age"])
            else:
                v_mps = indicators.cs
                age = float(record.pedestrian["age"])
            v = v_mps * MPS_TO_KMH if params.injury_speed_unit == "kmh" else v_mps
            severities.append(injury_probability(1.0, v, age))
        elif label == CONFLICT:
            n_conflict += 1
        fdd = first_detection_distance(record)
        if fdd is not None:
            fdd_values.append(fdd)

    collision_rate = n_collision / n
    conflict_rate = n_conflict / n
    mean_injury = collision_rate * (sum(severities) / len(severities)) if severities else 0.0

    fdd_sorted = sorted(fdd_values)
    p10 = _nearest_rank(fdd_sorted, 10) if fdd_sorted else None
    p50 = _nearest_rank(fdd_sorted, 50) if fdd_sorted else None
    p90 = _nearest_rank(fdd_sorted, 90) if fdd_sorted else None

    surface = [
        [float(v), float(a), injury_probability(collision_rate, float(v), float(a))]
        for v in params.v_grid
        for a in params.a_grid
    ]

    return SafetyReport(
        scenario=scenario,
        mode=mode,
        episodes=n,
        collision_rate=collision_rate,
        conflict_rate=conflict_rate,
        mean_injury_probability=mean_injury,
        fdd_p10=p10,
        fdd_p50=p50,
        fdd_p90=p90,
        fdd_values=fdd_values,
        injury_surface=surface,
        speed_unit=params.injury_speed_unit,
    )

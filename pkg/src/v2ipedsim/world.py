"""Road layout, agent kinematics, behavior controllers, and episode stepping.

The world is deliberately 2.5-D: agents live on the ground plane, while
opaque volumes (vehicles, street furniture) extrude their footprints upward
for the benefit of the sensor model.  The ego drives a fixed lane; the single
pedestrian crosses it.  One ``WorldState`` exists per episode and is mutated
only by its episode loop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .geometry import intrinsics_from_spec, RigidTransform
from .perception import (
    ConvexPrism,
    Detection,
    SensorRig,
    SensorSpec,
    body_pose,
    look_at_pose,
    perceive,
)
from .stochastic import (
    KEY_SENSOR,
    SENSOR_IDS,
    DemographicsTable,
    ExponentialModel,
    LogNormalModel,
    PedestrianProfile,
    SceneParams,
    make_stream,
)

KEY_BLEND = 7  # episode-level stream key for the per-sensor camouflage draw

EGO_EXTENT = (4.5, 1.9, 1.5)
PED_RADIUS = 0.25
PED_HEIGHT = 1.75


class ConfigError(ValueError):
    """Raised for unknown scenario names or inconsistent scenario fields."""


class NumericalFaultError(RuntimeError):
    """Raised when an episode produces a non-finite state."""


@dataclass(frozen=True)
class Lane:
    center_y: float
    width: float
    direction: float  # heading of travel, radians

    def __post_init__(self):
        if self.width <= 0.0:
            raise ConfigError("lane width must be positive")


@dataclass(frozen=True)
class Crosswalk:
    x_min: float
    x_max: float
    y_min: float
    y_max: float


@dataclass(frozen=True)
class StaticObject:
    vertices: tuple[tuple[float, float], ...]  # convex, counter-clockwise
    height: float
    color: tuple[float, float, float]

    @classmethod
    def box(cls, x_min: float, x_max: float, y_min: float, y_max: float,
            height: float, color: tuple[float, float, float]) -> "StaticObject":
        verts = ((x_min, y_min), (x_max, y_min), (x_max, y_max), (x_min, y_max))
        return cls(vertices=verts, height=height, color=color)


@dataclass(frozen=True)
class RoadLayout:
    lanes: tuple[Lane, ...]
    crosswalk: Optional[Crosswalk]
    intersection: bool
    static_objects: tuple[StaticObject, ...] = ()

    def __post_init__(self):
        if self.crosswalk is not None:
            cw = self.crosswalk
            touches = any(
                cw.y_min <= lane.center_y + lane.width / 2
                and cw.y_max >= lane.center_y - lane.width / 2
                for lane in self.lanes
            )
            if not touches:
                raise ConfigError("crosswalk does not intersect any lane")


@dataclass(frozen=True)
class TrafficRules:
    speed_limit: float
    headway: ExponentialModel
    intersection_speed: LogNormalModel
    midblock_speed: LogNormalModel
    pedestrian_right_of_way: bool = True
    lane_min_x: float = -300.0


@dataclass(frozen=True)
class BehaviorParams:
    """Controller constants; none of these are measured quantities."""

    a_brake: float = 6.0
    a_accel: float = 2.0
    awareness_radius: float = 15.0
    pass_first_multiplier: float = 1.5
    yield_back_max_s: float = 2.0
    corridor_halfwidth: float = 1.5
    conflict_horizon_s: float = 5.0
    track_window_s: float = 0.7
    track_min_baseline_s: float = 0.25
    track_stale_s: float = 1.5
    moving_speed_threshold: float = 0.5


Placement = Union[tuple, list]


@dataclass(frozen=True)
class VehicleSpec:
    role: str                     # ego | occluder | background
    controller: str               # cruise_brake | stopped
    lane_y: float
    heading: float
    placement: Placement          # ("fixed", x) | ("uniform", lo, hi) | ("headway", leader_idx)
    speed: Union[str, float]      # "sample" or a fixed value in m/s
    extent: tuple[float, float, float] = EGO_EXTENT
    color: tuple[float, float, float] = (0.5, 0.5, 0.5)
    dest_x: float = 1e9


@dataclass(frozen=True)
class PedestrianSpec:
    start: tuple[float, float]
    destination: tuple[float, float]
    trigger_range: tuple[float, float]
    color: tuple[float, float, float]


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    layout: RoadLayout
    vehicles: tuple[VehicleSpec, ...]
    pedestrians: tuple[PedestrianSpec, ...]
    rules: TrafficRules
    rig: SensorRig
    demographics: DemographicsTable
    behavior: BehaviorParams = field(default_factory=BehaviorParams)
    max_frames: int = 600
    dt: float = 0.05

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ConfigError("dt must be positive")
        if self.max_frames < 1:
            raise ConfigError("max_frames must be at least 1")
        if sum(1 for v in self.vehicles if v.role == "ego") != 1:
            raise ConfigError("exactly one ego vehicle is required")
        if len(self.pedestrians) != 1:
            raise ConfigError("exactly one pedestrian is supported")

    @property
    def role_count(self) -> int:
        return len(self.vehicles) + len(self.pedestrians)

    @property
    def controllers(self) -> tuple[str, ...]:
        return tuple(v.controller for v in self.vehicles) + ("walk",) * len(self.pedestrians)

    @property
    def destinations(self) -> tuple[tuple[float, float], ...]:
        dests = tuple((v.dest_x, v.lane_y) for v in self.vehicles)
        return dests + tuple(p.destination for p in self.pedestrians)


# --- agent states -------------------------------------------------------------


class VehicleState:
    __slots__ = (
        "x", "y", "heading", "speed", "accel", "length", "width", "height",
        "role", "color", "controller", "dest_x", "initial_speed", "done",
    )

    def __init__(self, x, y, heading, speed, extent, role, color, controller, dest_x):
        self.x = x
        self.y = y
        self.heading = heading
        self.speed = speed
        self.accel = 0.0
        self.length, self.width, self.height = extent
        self.role = role
        self.color = color
        self.controller = controller
        self.dest_x = dest_x
        self.initial_speed = speed
        self.done = False
        if speed < 0.0:
            raise ValueError("vehicle speed must be nonnegative")
        if min(extent) <= 0.0:
            raise ValueError("vehicle extent components must be positive")


class PedestrianState:
    __slots__ = (
        "x", "y", "heading", "speed", "profile", "color", "radius", "height",
        "dest_x", "dest_y", "trigger_distance", "walking", "yield_elapsed", "done",
    )

    def __init__(self, x, y, profile: PedestrianProfile, color, dest, trigger_distance):
        self.x = x
        self.y = y
        self.heading = math.atan2(dest[1] - y, dest[0] - x)
        self.speed = 0.0
        self.profile = profile
        self.color = color
        self.radius = PED_RADIUS
        self.height = PED_HEIGHT
        self.dest_x, self.dest_y = dest
        self.trigger_distance = trigger_distance
        self.walking = False
        self.yield_elapsed = 0.0
        self.done = False


class _EgoController:
    """Cruise until a tracked pedestrian conflicts with the lane corridor.

    Keeps a short history of position estimates from the detections the ego
    actually received; braking latches until the pedestrian clears the swept
    corridor, the ego stops, or the track goes stale.
    """

    __slots__ = ("mode", "track", "lane_y", "params")

    def __init__(self, lane_y: float, params: BehaviorParams):
        self.mode = "cruise"
        self.track: list[tuple[float, float, float]] = []
        self.lane_y = lane_y
        self.params = params

    def observe(self, t: float, detections: Sequence[Detection]):
        if detections:
            det = detections[0]  # onboard first when present
            x, y = det.est_position_world
            self.track.append((t, x, y))
            cutoff = t - 2.0 * self.params.track_window_s
            while len(self.track) > 2 and self.track[0][0] < cutoff:
                self.track.pop(0)

    def _estimate(self, t: float):
        """Predicted pedestrian position and velocity at time t, or None."""
        if not self.track:
            return None
        t_last, x_last, y_last = self.track[-1]
        if t - t_last > self.params.track_stale_s:
            return None
        vx = vy = None
        for t0, x0, y0 in self.track:
            if t_last - t0 <= self.params.track_window_s and t_last - t0 >= self.params.track_min_baseline_s:
                dt = t_last - t0
                vx = (x_last - x0) / dt
                vy = (y_last - y0) / dt
                break
        if vx is None:
            return (x_last, y_last, 0.0, 0.0, False)
        return (x_last + vx * (t - t_last), y_last + vy * (t - t_last), vx, vy, True)

    def _conflict(self, est, ego: VehicleState) -> bool:
        if est is None:
            return False
        px, py, vx, vy, has_velocity = est
        if px < ego.x - ego.length / 2.0:
            return False  # already passed
        half = self.params.corridor_halfwidth
        offset = py - self.lane_y
        if abs(offset) <= half:
            return True
        if not has_velocity or abs(vy) < 0.05:
            return False
        # time until the predicted straight-line path enters the lane band
        edge = self.lane_y + half if offset > 0.0 else self.lane_y - half
        t_enter = (edge - py) / vy
        return 0.0 <= t_enter <= self.params.conflict_horizon_s

    def command(self, t: float, ego: VehicleState) -> float:
        est = self._estimate(t)
        conflict = self._conflict(est, ego)
        if self.mode == "cruise":
            if conflict:
                self.mode = "brake"
        if self.mode == "brake":
            if not conflict:
                self.mode = "cruise"
            elif ego.speed <= 0.0:
                self.mode = "hold"
        if self.mode == "hold" and not conflict:
            self.mode = "cruise"

        if self.mode == "brake":
            return -self.params.a_brake
        if self.mode == "hold":
            return 0.0
        if ego.speed < ego.initial_speed:
            return self.params.a_accel
        return 0.0


class WorldState:
    """Mutable per-episode world: one ego, scenery vehicles, one pedestrian."""

    def __init__(self, scenario: ScenarioConfig, theta: SceneParams):
        self.scenario = scenario
        self.layout = scenario.layout
        self.behavior = scenario.behavior
        self.rig = scenario.rig
        self.dt = scenario.dt
        self.frame = 0

        vehicles = []
        ego = None
        for spec, params in zip(scenario.vehicles, theta.vehicles):
            state = VehicleState(
                x=params.x, y=params.y, heading=params.heading, speed=params.speed,
                extent=spec.extent, role=spec.role, color=spec.color,
                controller=spec.controller, dest_x=spec.dest_x,
            )
            vehicles.append(state)
            if spec.role == "ego":
                ego = state
        if ego is None:
            raise ConfigError("scenario must place an ego vehicle")
        self.ego = ego
        self.vehicles = vehicles

        ped_params = theta.pedestrians[0]
        self.pedestrian = PedestrianState(
            x=ped_params.start[0], y=ped_params.start[1],
            profile=ped_params.profile, color=ped_params.color,
            dest=ped_params.destination, trigger_distance=ped_params.trigger_distance,
        )
        self.ego_controller = _EgoController(ego.y, scenario.behavior)

        self._static_prisms = [
            ConvexPrism(obj.vertices, obj.height, obj.color)
            for obj in scenario.layout.static_objects
        ]
        self._scenery_prisms = [
            ConvexPrism.from_oriented_rect(v.x, v.y, v.heading, v.length, v.width, v.height, v.color)
            for v in vehicles
            if v is not ego
        ]
        self._onboard_occluders = self._static_prisms + self._scenery_prisms
        self._ego_prism_frame = -1
        self._ego_prism: Optional[ConvexPrism] = None

    def occluders_for_onboard(self) -> list[ConvexPrism]:
        return self._onboard_occluders

    def occluders_for_roadside(self) -> list[ConvexPrism]:
        # the ego itself can block the pole's view of the pedestrian
        if self._ego_prism_frame != self.frame:
            e = self.ego
            self._ego_prism = ConvexPrism.from_oriented_rect(
                e.x, e.y, e.heading, e.length, e.width, e.height, e.color
            )
            self._ego_prism_frame = self.frame
        return self._onboard_occluders + [self._ego_prism]


def check_collision(world: WorldState) -> Optional[tuple[float, int]]:
    """Ego footprint against the pedestrian disc, tangency included.

    Returns (impact_speed, pedestrian_age) at contact, else None.
    """
    ego = world.ego
    ped = world.pedestrian
    c = math.cos(ego.heading)
    s = math.sin(ego.heading)
    dx = ped.x - ego.x
    dy = ped.y - ego.y
    local_x = c * dx + s * dy
    local_y = -s * dx + c * dy
    hl = ego.length / 2.0
    hw = ego.width / 2.0
    qx = min(max(local_x, -hl), hl)
    qy = min(max(local_y, -hw), hw)
    ddx = local_x - qx
    ddy = local_y - qy
    if ddx * ddx + ddy * ddy <= ped.radius * ped.radius:
        return ego.speed, world.pedestrian.profile.age
    return None


def _pedestrian_threat(world: WorldState) -> bool:
    """A moving vehicle inside the awareness radius and closing in."""
    ped = world.pedestrian
    p = world.behavior
    for v in world.vehicles:
        if v.speed <= p.moving_speed_threshold:
            continue
        dx = ped.x - v.x
        dy = ped.y - v.y
        dist = math.hypot(dx, dy)
        if dist > p.awareness_radius or dist < 1e-9:
            continue
        vvx = v.speed * math.cos(v.heading)
        vvy = v.speed * math.sin(v.heading)
        pvx = ped.speed * math.cos(ped.heading)
        pvy = ped.speed * math.sin(ped.heading)
        closing_rate = ((dx) * (pvx - vvx) + (dy) * (pvy - vvy)) / dist
        if closing_rate < -0.1:
            return True
    return False


def _blocked_by_stopped_vehicle(world: WorldState, ped: PedestrianState) -> bool:
    """A stationary vehicle right in the walking direction: wait, don't walk into it."""
    step_ahead = ped.radius + 0.35
    ax = ped.x + step_ahead * math.cos(ped.heading)
    ay = ped.y + step_ahead * math.sin(ped.heading)
    clearance = ped.radius + 0.1
    for v in world.vehicles:
        if v.speed > world.behavior.moving_speed_threshold:
            continue
        c = math.cos(v.heading)
        s = math.sin(v.heading)
        dx = ax - v.x
        dy = ay - v.y
        local_x = c * dx + s * dy
        local_y = -s * dx + c * dy
        qx = min(max(local_x, -v.length / 2.0), v.length / 2.0)
        qy = min(max(local_y, -v.width / 2.0), v.width / 2.0)
        ddx = local_x - qx
        ddy = local_y - qy
        if ddx * ddx + ddy * ddy <= clearance * clearance:
            return True
    return False


def _step_pedestrian(world: WorldState, dt: float):
    ped = world.pedestrian
    params = world.behavior
    if ped.done:
        ped.speed = 0.0
        return
    if not ped.walking:
        ego = world.ego
        if math.hypot(ego.x - ped.x, ego.y - ped.y) <= ped.trigger_distance:
            ped.walking = True
        else:
            ped.speed = 0.0
            return

    to_dest = math.atan2(ped.dest_y - ped.y, ped.dest_x - ped.x)
    base = ped.profile.base_speed
    threat = _pedestrian_threat(world)
    risk = ped.profile.risk_preference
    if not threat:
        ped.heading = to_dest
        ped.speed = base
        ped.yield_elapsed = 0.0
    elif risk == "unaware":
        ped.heading = to_dest
        ped.speed = base
    elif risk == "pass_first":
        ped.heading = to_dest
        ped.speed = base * params.pass_first_multiplier
    else:  # yield_back
        if ped.yield_elapsed < params.yield_back_max_s:
            ped.heading = to_dest + math.pi
            ped.speed = base
            ped.yield_elapsed += dt
        else:
            ped.speed = 0.0

    if ped.speed > 0.0 and _blocked_by_stopped_vehicle(world, ped):
        ped.speed = 0.0
        return

    ped.x += ped.speed * dt * math.cos(ped.heading)
    ped.y += ped.speed * dt * math.sin(ped.heading)
    if math.hypot(ped.dest_x - ped.x, ped.dest_y - ped.y) < 0.2:
        ped.done = True
        ped.speed = 0.0


def step(world: WorldState, detections: Sequence[Detection], dt: float) -> WorldState:
    """Advance the world one frame given the ego's current detections.

    Explicit Euler: positions move with the pre-update speed, then speeds
    integrate acceleration (clamped at zero).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    t = world.frame * dt

    ctrl = world.ego_controller
    ctrl.observe(t, detections)
    for v in world.vehicles:
        if v.controller == "cruise_brake":
            v.accel = ctrl.command(t, v)
        else:  # stopped scenery
            v.accel = 0.0

    _step_pedestrian(world, dt)

    for v in world.vehicles:
        v.x += v.speed * dt * math.cos(v.heading)
        v.y += v.speed * dt * math.sin(v.heading)
        v.speed = max(0.0, v.speed + v.accel * dt)
        if v.accel > 0.0 and v.speed > v.initial_speed:
            v.speed = v.initial_speed  # cruise controller never exceeds its set speed
        if not v.done and v.x >= v.dest_x:
            v.done = True

    world.frame += 1
    return world


# --- episode records ------------------------------------------------------------


@dataclass
class EpisodeRecord:
    """Full trajectory log of one episode plus its detection/collision events."""

    scenario: str
    mode: str
    episode_index: int
    seed: int
    dt: float
    termination: str
    frames: list          # [frame, ego x, y, heading, speed, ped x, y, heading, speed]
    detections: list      # [frame, source, est_x, est_y, est_dist, truth_x, truth_y, in_frame, bbox|None]
    collision: Optional[dict]
    pedestrian: dict
    initial: dict

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "mode": self.mode,
            "episode_index": self.episode_index,
            "seed": self.seed,
            "dt": self.dt,
            "termination": self.termination,
            "frames": [
                [f[0]] + [round(x, 6) for x in f[1:]] for f in self.frames
            ],
            "detections": [
                [d[0], d[1]] + [round(x, 6) for x in d[2:7]] + [d[7]]
                + [None if d[8] is None else [round(x, 2) for x in d[8]]]
                for d in self.detections
            ],
            "collision": self.collision,
            "pedestrian": self.pedestrian,
            "initial": self.initial,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EpisodeRecord":
        return cls(
            scenario=d["scenario"],
            mode=d["mode"],
            episode_index=int(d["episode_index"]),
            seed=int(d["seed"]),
            dt=float(d["dt"]),
            termination=d["termination"],
            frames=[list(f) for f in d["frames"]],
            detections=[list(x) for x in d["detections"]],
            collision=d.get("collision"),
            pedestrian=dict(d["pedestrian"]),
            initial=dict(d["initial"]),
        )


def run_episode(
    scenario: ScenarioConfig,
    theta: SceneParams,
    mode: str,
    episode_seed: int,
    episode_index: int = 0,
) -> EpisodeRecord:
    """Roll one episode to termination and return its complete record.

    Terminates on first contact, on every role reaching its destination, or on
    the frame budget.  All per-frame randomness is keyed by
    (episode_seed, purpose, sensor, frame) so results do not depend on
    execution order.
    """
    world = WorldState(scenario, theta)
    rig = scenario.rig
    dt = scenario.dt

    blend_pass = {
        name: make_stream(episode_seed, KEY_BLEND, SENSOR_IDS[name]).random()
        < spec.blend_detect_prob
        for name, spec in (("onboard", rig.onboard), ("roadside", rig.roadside))
        if spec is not None
    }

    frames: list = []
    detection_rows: list = []
    collision: Optional[dict] = None
    termination = "frame_budget"

    for frame in range(scenario.max_frames):
        world.frame = frame
        ego = world.ego
        ped = world.pedestrian
        if not (math.isfinite(ego.x) and math.isfinite(ego.y) and math.isfinite(ped.x) and math.isfinite(ped.y)):
            raise NumericalFaultError(
                f"non-finite state at frame {frame}: ego=({ego.x}, {ego.y}) ped=({ped.x}, {ped.y})"
            )
        frames.append([frame, ego.x, ego.y, ego.heading, ego.speed, ped.x, ped.y, ped.heading, ped.speed])

        contact = check_collision(world)
        if contact is not None:
            collision = {
                "frame": frame,
                "impact_speed": round(contact[0], 6),
                "pedestrian_age": contact[1],
            }
            termination = "collision"
            break
        if ped.done and all(v.done or v.controller != "cruise_brake" for v in world.vehicles):
            termination = "destinations_reached"
            break

        rngs = {"onboard": make_stream(episode_seed, KEY_SENSOR, SENSOR_IDS["onboard"], frame)}
        if mode == "v2i" and rig.roadside is not None:
            rngs["roadside"] = make_stream(episode_seed, KEY_SENSOR, SENSOR_IDS["roadside"], frame)
        detections = perceive(world, mode, rig, rngs, frame, blend_pass)
        for det in detections:
            bbox = None
            if det.bbox is not None:
                bbox = [det.bbox.u_min, det.bbox.v_min, det.bbox.u_max, det.bbox.v_max]
            detection_rows.append([
                frame, det.source,
                det.est_position_world[0], det.est_position_world[1], det.est_distance,
                det.truth_position_world[0], det.truth_position_world[1],
                int(det.in_frame), bbox,
            ])

        step(world, detections, dt)

    return EpisodeRecord(
        scenario=scenario.name,
        mode=mode,
        episode_index=episode_index,
        seed=episode_seed,
        dt=dt,
        termination=termination,
        frames=frames,
        detections=detection_rows,
        collision=collision,
        pedestrian=world.pedestrian.profile.to_dict(),
        initial=theta.to_dict(),
    )


# --- built-in scenarios -----------------------------------------------------------

_LANE_EGO = -1.75
_LANE_ADJACENT = 1.75
_BLACK = (0.05, 0.05, 0.05)
_DARK = (0.06, 0.06, 0.07)

# per-scenario tuning; trigger ranges set the danger mix and were calibrated
# against the acceptance targets
SCENARIO_TUNING = {
    "crossing": {"trigger": (15.0, 45.0), "ego_start": (-55.0, -45.0)},
    "jaywalking": {"trigger": (15.0, 45.0), "ego_start": (-55.0, -45.0)},
    "background_blending": {"trigger": (15.0, 40.0), "ego_start": (-55.0, -45.0)},
}

DEFAULT_RULES = TrafficRules(
    speed_limit=16.7,
    headway=ExponentialModel(rate=0.1742),
    intersection_speed=LogNormalModel(mu=1.5853, sigma=0.3827),
    midblock_speed=LogNormalModel(mu=1.8304, sigma=0.4857),
)


def default_onboard_sensor() -> SensorSpec:
    # camera behind the windshield: 0.5 m ahead of center, 1.5 m up
    r = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])
    p = np.array([0.5, 0.0, 1.5])
    mount = RigidTransform.from_rotation_translation(r, -r @ p)
    return SensorSpec(
        source="onboard",
        mount=mount,
        intrinsics=intrinsics_from_spec(800, 600, 90.0),
        max_range=50.0,
    )


def default_roadside_sensor(eye: tuple[float, float, float], target: tuple[float, float, float]) -> SensorSpec:
    return SensorSpec(
        source="roadside",
        mount=look_at_pose(eye, target),
        intrinsics=intrinsics_from_spec(800, 600, 90.0),
        max_range=50.0,
    )


def _two_lane_layout(crosswalk: Optional[Crosswalk], intersection: bool,
                     statics: Sequence[StaticObject]) -> RoadLayout:
    lanes = (
        Lane(center_y=_LANE_EGO, width=3.5, direction=0.0),
        Lane(center_y=_LANE_ADJACENT, width=3.5, direction=0.0),
    )
    return RoadLayout(lanes=lanes, crosswalk=crosswalk, intersection=intersection,
                      static_objects=tuple(statics))


def builtin_scenario(name: str, demographics: Optional[DemographicsTable] = None) -> ScenarioConfig:
    """One of the three stock safety-critical scenarios.

    crossing: a pedestrian steps onto a crosswalk from behind a vehicle
    stopped at the line in the adjacent lane; a curbside guardrail hides the
    waiting spot from far away.  Ego speeds follow the intersection model.

    jaywalking: the same dart-out mid-block, with curbside parking rows
    hiding the approach and the vehicle stopped in the adjacent lane; ego
    speeds follow the (faster) mid-block model.

    background_blending: no line-of-sight blockage at all, but the pedestrian
    dresses in the same color as the vehicles waiting behind their crossing
    path, so the onboard camera usually cannot tell them apart.
    """
    demographics = demographics or DemographicsTable.default()
    if name not in SCENARIO_TUNING:
        raise ConfigError(
            f"unknown scenario {name!r}; expected one of {sorted(SCENARIO_TUNING)}"
        )
    tuning = SCENARIO_TUNING[name]
    ego_spec = VehicleSpec(
        role="ego", controller="cruise_brake", lane_y=_LANE_EGO, heading=0.0,
        placement=("uniform", *tuning["ego_start"]), speed="sample",
        color=(0.10, 0.25, 0.70), dest_x=25.0,
    )

    if name == "crossing":
        occluder = VehicleSpec(
            role="occluder", controller="stopped", lane_y=1.45, heading=0.0,
            placement=("fixed", -2.65), speed=0.0, color=_BLACK,
        )
        fence = StaticObject.box(-45.0, -0.3, 3.3, 3.9, height=1.8, color=(0.55, 0.55, 0.55))
        layout = _two_lane_layout(
            crosswalk=Crosswalk(-0.6, 2.4, -7.0, 7.0), intersection=True, statics=[fence],
        )
        ped = PedestrianSpec(
            start=(0.9, 4.3), destination=(0.9, -5.5),
            trigger_range=tuning["trigger"], color=(0.35, 0.20, 0.50),
        )
        roadside = default_roadside_sensor(eye=(6.0, 6.0, 6.0), target=(0.0, 0.0, 0.0))
        vehicles = (ego_spec, occluder)

    elif name == "jaywalking":
        occluder = VehicleSpec(
            role="occluder", controller="stopped", lane_y=1.45, heading=0.0,
            placement=("fixed", -2.65), speed=0.0, color=_BLACK,
        )
        parked_upstream = StaticObject.box(-34.0, -0.6, 3.65, 5.55, height=1.5, color=(0.25, 0.25, 0.30))
        parked_downstream = StaticObject.box(2.4, 12.0, 3.65, 5.55, height=1.5, color=(0.25, 0.25, 0.30))
        layout = _two_lane_layout(
            crosswalk=None, intersection=False, statics=[parked_upstream, parked_downstream],
        )
        ped = PedestrianSpec(
            start=(0.9, 6.2), destination=(0.9, -5.5),
            trigger_range=tuning["trigger"], color=(0.35, 0.20, 0.50),
        )
        roadside = default_roadside_sensor(eye=(6.0, 8.0, 6.0), target=(0.0, 1.0, 0.0))
        vehicles = (ego_spec, occluder)

    else:  # background_blending
        waiting = VehicleSpec(
            role="background", controller="stopped", lane_y=1.75, heading=0.0,
            placement=("fixed", 2.85), speed=0.0, color=_DARK,
        )
        parked = StaticObject.box(-2.0, 2.5, 4.95, 6.85, height=1.5, color=_DARK)
        kiosk = StaticObject.box(1.3, 5.6, 2.5, 4.9, height=1.6, color=_DARK)
        layout = _two_lane_layout(
            crosswalk=Crosswalk(-1.35, 1.65, -7.0, 7.0), intersection=True,
            statics=[parked, kiosk],
        )
        ped = PedestrianSpec(
            start=(0.15, 4.6), destination=(0.15, -5.5),
            trigger_range=tuning["trigger"], color=_DARK,
        )
        roadside = default_roadside_sensor(eye=(-6.0, 5.5, 6.0), target=(0.5, 0.5, 0.0))
        vehicles = (ego_spec, waiting)

    return ScenarioConfig(
        name=name,
        layout=layout,
        vehicles=vehicles,
        pedestrians=(ped,),
        rules=DEFAULT_RULES,
        rig=SensorRig(onboard=default_onboard_sensor(), roadside=roadside),
        demographics=demographics,
    )

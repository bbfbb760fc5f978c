"""Onboard and roadside sensor models.

Detection is a geometric proxy for a learned detector: a pedestrian is
detected when enough of its body samples have a clear line of sight inside
the camera frustum, and when it is not camouflaged against a backdrop of
nearly the same color.  Distance comes from clustering an analytic depth
patch, so estimates carry realistic quantization error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

from .geometry import (
    BoundingBox,
    CameraIntrinsics,
    CameraPoint,
    PixelPoint,
    RigidTransform,
    pedestrian_distance_from_bbox,
    project,
)

if TYPE_CHECKING:  # pragma: no cover
    from .world import PedestrianState, WorldState

DEPTH_LEVELS = 256          # depth maps quantize to max_range / 256 per pixel
PATCH_SHAPE = (10, 20)      # analytic depth patch over the bounding box
PATCH_TARGET_FRACTION = 0.7  # pedestrian pixels; the rest shows the backdrop
BACKDROP_REACH = 2.0        # meters behind the target along the viewing ray


@dataclass(frozen=True)
class SensorSpec:
    """One camera: mounting, optics, and detector thresholds.

    ``mount`` is world->camera for a roadside unit and body->camera for an
    onboard unit (the body pose changes every frame).
    """

    source: str                  # "onboard" | "roadside"
    mount: RigidTransform
    intrinsics: CameraIntrinsics
    max_range: float = 50.0
    tau_vis: float = 0.4
    blend_delta: float = 0.15
    blend_detect_prob: float = 0.1
    depth_noise: bool = True

    def __post_init__(self):
        if self.max_range <= 0.0:
            raise ValueError("max_range must be positive")
        if not 0.0 < self.tau_vis <= 1.0:
            raise ValueError("tau_vis must be in (0, 1]")
        if not 0.0 <= self.blend_delta <= math.sqrt(3.0):
            raise ValueError("blend_delta must be in [0, sqrt(3)]")
        if not 0.0 <= self.blend_detect_prob <= 1.0:
            raise ValueError("blend_detect_prob must be in [0, 1]")


@dataclass(frozen=True)
class SensorRig:
    onboard: SensorSpec
    roadside: Optional[SensorSpec] = None


@dataclass(frozen=True)
class Detection:
    """A perceived pedestrian, tagged by which camera produced it."""

    frame: int
    source: str
    bbox: Optional[BoundingBox]
    center_px: PixelPoint
    est_distance: float
    est_position_world: tuple[float, float]
    truth_position_world: tuple[float, float]
    in_frame: bool = True

    def __post_init__(self):
        if self.est_distance <= 0.0:
            raise ValueError("est_distance must be positive")


class ConvexPrism:
    """A convex footprint extruded from the ground to ``height`` meters.

    Used for every opaque object in the scene: vehicle footprints and static
    obstacles alike.  Carries a color so it can double as a blending backdrop.
    """

    __slots__ = ("xs", "ys", "nxs", "nys", "offsets", "height", "color", "cx", "cy", "radius")

    def __init__(self, vertices: Sequence[tuple[float, float]], height: float, color: tuple[float, float, float]):
        if len(vertices) < 3:
            raise ValueError("a footprint needs at least 3 vertices")
        if height <= 0.0:
            raise ValueError("height must be positive")
        self.xs = [float(x) for x, _ in vertices]
        self.ys = [float(y) for _, y in vertices]
        n = len(vertices)
        # outward edge normals; vertices must wind counter-clockwise
        nxs, nys, offs = [], [], []
        for i in range(n):
            x0, y0 = self.xs[i], self.ys[i]
            x1, y1 = self.xs[(i + 1) % n], self.ys[(i + 1) % n]
            nx, ny = (y1 - y0), -(x1 - x0)
            norm = math.hypot(nx, ny)
            if norm < 1e-12:
                raise ValueError("degenerate footprint edge")
            nx, ny = nx / norm, ny / norm
            nxs.append(nx)
            nys.append(ny)
            offs.append(nx * x0 + ny * y0)
        self.nxs, self.nys, self.offsets = nxs, nys, offs
        self.height = float(height)
        self.color = color
        self.cx = sum(self.xs) / n
        self.cy = sum(self.ys) / n
        self.radius = max(math.hypot(x - self.cx, y - self.cy) for x, y in zip(self.xs, self.ys))
        for nx, ny, off in zip(nxs, nys, offs):
            if nx * self.cx + ny * self.cy - off > 1e-9:
                raise ValueError("vertices must wind counter-clockwise")

    @classmethod
    def from_oriented_rect(
        cls,
        x: float,
        y: float,
        heading: float,
        length: float,
        width: float,
        height: float,
        color: tuple[float, float, float],
    ) -> "ConvexPrism":
        c, s = math.cos(heading), math.sin(heading)
        hl, hw = length / 2.0, width / 2.0
        corners = [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)]
        return cls([(x + c * dx - s * dy, y + s * dx + c * dy) for dx, dy in corners], height, color)

    def intersect_segment(self, p0: tuple[float, float, float], p1: tuple[float, float, float]) -> Optional[float]:
        """Entry parameter t in [0, 1] where the segment enters the prism, or None."""
        x0, y0, z0 = p0
        dx, dy, dz = p1[0] - x0, p1[1] - y0, p1[2] - z0
        # cheap reject: 2-D distance from the segment's line to the bounding circle
        ex, ey = self.cx - x0, self.cy - y0
        seg2 = dx * dx + dy * dy
        if seg2 > 1e-18:
            t_close = (ex * dx + ey * dy) / seg2
            if t_close < 0.0:
                t_close = 0.0
            elif t_close > 1.0:
                t_close = 1.0
            qx, qy = ex - t_close * dx, ey - t_close * dy
            if qx * qx + qy * qy > self.radius * self.radius + 1e-9:
                return None
        t_lo, t_hi = 0.0, 1.0
        for nx, ny, off in zip(self.nxs, self.nys, self.offsets):
            denom = nx * dx + ny * dy
            dist = nx * x0 + ny * y0 - off
            if abs(denom) < 1e-15:
                if dist > 0.0:
                    return None
                continue
            t = -dist / denom
            if denom < 0.0:
                if t > t_lo:
                    t_lo = t
            else:
                if t < t_hi:
                    t_hi = t
            if t_lo > t_hi:
                return None
        # z slab [0, height]
        if abs(dz) < 1e-15:
            if not 0.0 <= z0 <= self.height:
                return None
        else:
            t_a = (0.0 - z0) / dz
            t_b = (self.height - z0) / dz
            if t_a > t_b:
                t_a, t_b = t_b, t_a
            if t_a > t_lo:
                t_lo = t_a
            if t_b < t_hi:
                t_hi = t_b
            if t_lo > t_hi:
                return None
        return t_lo


def look_at_pose(eye: tuple[float, float, float], target: tuple[float, float, float]) -> RigidTransform:
    """World->camera pose for a camera at ``eye`` aimed at ``target`` (roll-free)."""
    f = np.array(target, dtype=float) - np.array(eye, dtype=float)
    norm = np.linalg.norm(f)
    if norm < 1e-9:
        raise ValueError("eye and target coincide")
    f /= norm
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(f, up)
    rn = np.linalg.norm(right)
    if rn < 1e-9:
        raise ValueError("camera cannot look straight up or down without a roll convention")
    right /= rn
    down = np.cross(f, right)
    r = np.vstack([right, down, f])
    t = -r @ np.array(eye, dtype=float)
    return RigidTransform.from_rotation_translation(r, t)


def body_pose(x: float, y: float, heading: float) -> RigidTransform:
    """World->body for a ground vehicle at (x, y) with the given heading."""
    c, s = math.cos(heading), math.sin(heading)
    # body axes in world coords: forward (c, s, 0), left (-s, c, 0), up z
    r = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
    t = -r @ np.array([x, y, 0.0])
    return RigidTransform.from_rotation_translation(r, t)


def onboard_camera_pose(sensor: SensorSpec, x: float, y: float, heading: float) -> RigidTransform:
    """World->camera for an onboard sensor given the carrier's pose."""
    return sensor.mount @ body_pose(x, y, heading)


def pedestrian_sample_points(ped: "PedestrianState", toward: tuple[float, float]) -> list[tuple[float, float, float]]:
    """Head, torso center, both shoulders, and feet of a standing pedestrian.

    Shoulders are offset perpendicular to the viewing direction so that they
    present the body's width to the camera.
    """
    h = ped.height
    dx, dy = ped.x - toward[0], ped.y - toward[1]
    norm = math.hypot(dx, dy)
    if norm < 1e-9:
        px, py = 1.0, 0.0
    else:
        px, py = -dy / norm, dx / norm
    shoulder = 0.20
    return [
        (ped.x, ped.y, h - 0.05),
        (ped.x, ped.y, h / 2.0),
        (ped.x + px * shoulder, ped.y + py * shoulder, h * 0.83),
        (ped.x - px * shoulder, ped.y - py * shoulder, h * 0.83),
        (ped.x, ped.y, 0.15),
    ]


def _camera_origin(pose: RigidTransform) -> tuple[float, float, float]:
    m = pose.matrix
    r = m[:3, :3]
    t = m[:3, 3]
    c = -r.T @ t
    return (float(c[0]), float(c[1]), float(c[2]))


def visible_fraction(
    pose: RigidTransform,
    intrinsics: CameraIntrinsics,
    max_range: float,
    sample_points: Sequence[tuple[float, float, float]],
    occluders: Sequence[ConvexPrism],
) -> float:
    """Fraction of body samples visible: in frustum, in range, and unoccluded."""
    rows = pose.rows()
    origin = _camera_origin(pose)
    visible = 0
    for pt in sample_points:
        x, y, z = pt
        zc = rows[8] * x + rows[9] * y + rows[10] * z + rows[11]
        if zc <= 0.0:
            continue
        dx, dy, dz = x - origin[0], y - origin[1], z - origin[2]
        if dx * dx + dy * dy + dz * dz > max_range * max_range:
            continue
        xc = rows[0] * x + rows[1] * y + rows[2] * z + rows[3]
        yc = rows[4] * x + rows[5] * y + rows[6] * z + rows[7]
        u = intrinsics.fx * xc / zc + intrinsics.cx
        if u < 0.0 or u > intrinsics.width:
            continue
        v = intrinsics.fy * yc / zc + intrinsics.cy
        if v < 0.0 or v > intrinsics.height:
            continue
        blocked = False
        for prism in occluders:
            if prism.intersect_segment(origin, pt) is not None:
                blocked = True
                break
        if not blocked:
            visible += 1
    return visible / len(sample_points)


def find_backdrop(
    origin: tuple[float, float, float],
    target: tuple[float, float, float],
    prisms: Sequence[ConvexPrism],
    reach: float = BACKDROP_REACH,
) -> Optional[tuple[tuple[float, float, float], float]]:
    """First object the viewing ray hits within ``reach`` meters past the target.

    Returns (color, extra_depth) where extra_depth is the distance beyond the
    target at which the backdrop is hit, or None when the ray escapes.
    """
    dx = target[0] - origin[0]
    dy = target[1] - origin[1]
    dz = target[2] - origin[2]
    dist = math.sqrt(dx * dx + dy * dy + dz * dz)
    if dist < 1e-9:
        return None
    scale = (dist + reach) / dist
    far = (origin[0] + dx * scale, origin[1] + dy * scale, origin[2] + dz * scale)
    t_target = dist / (dist + reach)
    best_t = None
    best_color = None
    for prism in prisms:
        t = prism.intersect_segment(origin, far)
        if t is not None and t > t_target and (best_t is None or t < best_t):
            best_t = t
            best_color = prism.color
    if best_t is None:
        return None
    return best_color, best_t * (dist + reach) - dist


def _quantize(depth: float, max_range: float) -> float:
    step = max_range / DEPTH_LEVELS
    return round(depth / step) * step


def try_detect(
    sensor: SensorSpec,
    pose: RigidTransform,
    ped: "PedestrianState",
    occluders: Sequence[ConvexPrism],
    rng: np.random.Generator,
    frame: int,
    blend_pass: Optional[bool] = None,
) -> Optional[Detection]:
    """Attempt one detection; returning None is an ordinary outcome.

    Succeeds when the visible fraction clears the sensor threshold and the
    camouflage test passes.  Camouflage: with a backdrop close behind the
    pedestrian whose color matches within ``blend_delta``, detection succeeds
    only with probability ``blend_detect_prob``.  The episode loop resolves
    that Bernoulli once per sensor from the episode stream and passes it as
    ``blend_pass`` (camouflage failure is systematic, not per-frame noise);
    when omitted, the draw comes from ``rng``.
    """
    origin = _camera_origin(pose)
    samples = pedestrian_sample_points(ped, (origin[0], origin[1]))
    fraction = visible_fraction(pose, sensor.intrinsics, sensor.max_range, samples, occluders)
    if fraction < sensor.tau_vis:
        return None

    center_world = (ped.x, ped.y, ped.height / 2.0)
    backdrop = find_backdrop(origin, center_world, occluders)
    if backdrop is not None:
        color, extra = backdrop
        dr = color[0] - ped.color[0]
        dg = color[1] - ped.color[1]
        db = color[2] - ped.color[2]
        if math.sqrt(dr * dr + dg * dg + db * db) < sensor.blend_delta:
            passed = blend_pass if blend_pass is not None else rng.random() < sensor.blend_detect_prob
            if not passed:
                return None

    rows = pose.rows()
    cz = rows[8] * center_world[0] + rows[9] * center_world[1] + rows[10] * center_world[2] + rows[11]
    if cz <= 0.0:
        return None
    cxc = rows[0] * center_world[0] + rows[1] * center_world[1] + rows[2] * center_world[2] + rows[3]
    cyc = rows[4] * center_world[0] + rows[5] * center_world[1] + rows[6] * center_world[2] + rows[7]
    intr = sensor.intrinsics
    center_px = PixelPoint(intr.fx * cxc / cz + intr.cx, intr.fy * cyc / cz + intr.cy)

    bbox = _project_extent_bbox(rows, intr, ped)
    if bbox is None:
        return None

    if sensor.depth_noise:
        ped_depth = _quantize(cz, sensor.max_range)
        n_total = PATCH_SHAPE[0] * PATCH_SHAPE[1]
        n_ped = int(n_total * PATCH_TARGET_FRACTION)
        if backdrop is not None:
            back_depth = _quantize(cz + backdrop[1], sensor.max_range)
            patch = np.concatenate(
                [np.full(n_ped, ped_depth), np.full(n_total - n_ped, back_depth)]
            )
        else:
            patch = np.full(n_total, ped_depth)
        est_distance = pedestrian_distance_from_bbox(bbox, patch, k=2, rng=rng)
    else:
        est_distance = cz

    # localize from the center pixel at the estimated depth, back in the world
    ex = (center_px.u - intr.cx) * est_distance / intr.fx
    ey = (center_px.v - intr.cy) * est_distance / intr.fy
    inv = pose.inverse().rows()
    wx = inv[0] * ex + inv[1] * ey + inv[2] * est_distance + inv[3]
    wy = inv[4] * ex + inv[5] * ey + inv[6] * est_distance + inv[7]

    return Detection(
        frame=frame,
        source=sensor.source,
        bbox=bbox,
        center_px=center_px,
        est_distance=est_distance,
        est_position_world=(wx, wy),
        truth_position_world=(ped.x, ped.y),
    )


def _project_extent_bbox(rows: tuple, intr: CameraIntrinsics, ped: "PedestrianState") -> Optional[BoundingBox]:
    """Project the pedestrian's bounding volume corners to a pixel box."""
    r = ped.radius
    u_min = v_min = math.inf
    u_max = v_max = -math.inf
    for dx in (-r, r):
        for dy in (-r, r):
            for z in (0.0, ped.height):
                x, y = ped.x + dx, ped.y + dy
                zc = rows[8] * x + rows[9] * y + rows[10] * z + rows[11]
                if zc <= 0.0:
                    return None
                xc = rows[0] * x + rows[1] * y + rows[2] * z + rows[3]
                yc = rows[4] * x + rows[5] * y + rows[6] * z + rows[7]
                u = intr.fx * xc / zc + intr.cx
                v = intr.fy * yc / zc + intr.cy
                if u < u_min:
                    u_min = u
                if u > u_max:
                    u_max = u
                if v < v_min:
                    v_min = v
                if v > v_max:
                    v_max = v
    return BoundingBox(u_min, v_min, u_max, v_max)


def fuse_v2i(
    detection: Detection,
    intr_src: CameraIntrinsics,
    t_src: RigidTransform,
    t_dst: RigidTransform,
    intr_dst: CameraIntrinsics,
) -> Detection:
    """Re-express a roadside detection in the vehicle camera's pixel plane.

    Bounding-box corners are lifted at the estimated distance, carried through
    the frame chain, and reprojected.  A transferred point behind the vehicle
    camera is flagged out-of-frame but keeps its world-position estimate.
    """
    chain = (t_dst @ t_src.inverse()).rows()
    d = detection.est_distance

    def lift(u: float, v: float) -> tuple[float, float, float]:
        x = (u - intr_src.cx) * d / intr_src.fx
        y = (v - intr_src.cy) * d / intr_src.fy
        return (
            chain[0] * x + chain[1] * y + chain[2] * d + chain[3],
            chain[4] * x + chain[5] * y + chain[6] * d + chain[7],
            chain[8] * x + chain[9] * y + chain[10] * d + chain[11],
        )

    center = lift(detection.center_px.u, detection.center_px.v)
    inv = t_dst.inverse().rows()
    wx = inv[0] * center[0] + inv[1] * center[1] + inv[2] * center[2] + inv[3]
    wy = inv[4] * center[0] + inv[5] * center[1] + inv[6] * center[2] + inv[7]

    in_frame = center[2] > 0.0
    bbox = None
    center_px = detection.center_px
    if in_frame:
        center_px = project(CameraPoint(*center), intr_dst)
        if detection.bbox is not None:
            us, vs = [], []
            for u, v in (
                (detection.bbox.u_min, detection.bbox.v_min),
                (detection.bbox.u_min, detection.bbox.v_max),
                (detection.bbox.u_max, detection.bbox.v_min),
                (detection.bbox.u_max, detection.bbox.v_max),
            ):
                corner = lift(u, v)
                if corner[2] <= 0.0:
                    in_frame = False
                    break
                px = project(CameraPoint(*corner), intr_dst)
                us.append(px.u)
                vs.append(px.v)
            else:
                bbox = BoundingBox(min(us), min(vs), max(us), max(vs))

    return Detection(
        frame=detection.frame,
        source=detection.source,
        bbox=bbox,
        center_px=center_px,
        est_distance=detection.est_distance,
        est_position_world=(wx, wy),
        truth_position_world=detection.truth_position_world,
        in_frame=in_frame,
    )


def perceive(
    world: "WorldState",
    mode: str,
    rig: SensorRig,
    rngs: dict[str, np.random.Generator],
    frame: int,
    blend_pass: Optional[dict[str, bool]] = None,
) -> list[Detection]:
    """All detections available to the ego this frame.

    single_vehicle: the onboard camera only.  v2i: onboard plus roadside
    detections fused into the vehicle frame.  Each sensor owns its stream so
    the onboard result is identical across modes for the same world state.
    """
    if mode not in ("single_vehicle", "v2i"):
        raise ValueError(f"unknown mode {mode!r}")
    blend_pass = blend_pass or {}
    ego = world.ego
    onboard_pose = onboard_camera_pose(rig.onboard, ego.x, ego.y, ego.heading)
    detections: list[Detection] = []
    det = try_detect(
        rig.onboard, onboard_pose, world.pedestrian,
        world.occluders_for_onboard(), rngs["onboard"], frame,
        blend_pass.get("onboard"),
    )
    if det is not None:
        detections.append(det)
    if mode == "v2i" and rig.roadside is not None:
        det = try_detect(
            rig.roadside, rig.roadside.mount, world.pedestrian,
            world.occluders_for_roadside(), rngs["roadside"], frame,
            blend_pass.get("roadside"),
        )
        if det is not None:
            detections.append(
                fuse_v2i(det, rig.roadside.intrinsics, rig.roadside.mount, onboard_pose, rig.onboard.intrinsics)
            )
    return detections

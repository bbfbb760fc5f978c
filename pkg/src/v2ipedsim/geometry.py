"""Camera mathematics: intrinsics, projection, rigid transforms, depth clustering.

Conventions (right-handed, standard computer vision):
  Camera frame: X right, Y down, Z forward along the optical axis.
  Pixel frame:  u right, v down, origin at the top-left image corner.
  World frame:  X/Y ground plane in meters, Z up.

A ``RigidTransform`` always maps world coordinates into a camera frame
(or one body frame into another); points transfer between two cameras as
``T_dst @ T_src.inverse()``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


class CameraSpecError(ValueError):
    """Raised for out-of-range image dimensions or field of view."""


class DepthError(ValueError):
    """Raised when a nonpositive depth is used for back-projection."""


class BehindCameraError(ValueError):
    """Raised when projecting a point with Z <= 0; never silently clamped."""


class EmptyInputError(ValueError):
    """Raised when clustering is asked to run on no data."""


_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics with square pixels and a centered principal point."""

    width: int
    height: int
    fov_deg: float
    fx: float
    fy: float
    cx: float
    cy: float

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


def intrinsics_from_spec(width: int, height: int, fov_deg: float) -> CameraIntrinsics:
    """Build intrinsics from image size and horizontal field of view.

    fx = fy = width / (2 * tan(fov/2)); the principal point is the image
    center.  fov must lie strictly inside (0, 180) degrees.
    """
    if width <= 0 or height <= 0:
        raise CameraSpecError(f"image dimensions must be positive, got {width}x{height}")
    if not 0.0 < fov_deg < 180.0:
        raise CameraSpecError(f"fov_deg must be in (0, 180), got {fov_deg}")
    f = width / (2.0 * math.tan(math.radians(fov_deg) / 2.0))
    return CameraIntrinsics(
        width=width,
        height=height,
        fov_deg=fov_deg,
        fx=f,
        fy=f,
        cx=width / 2.0,
        cy=height / 2.0,
    )


@dataclass(frozen=True)
class PixelPoint:
    u: float
    v: float


@dataclass(frozen=True)
class CameraPoint:
    x: float
    y: float
    z: float


def backproject(p: PixelPoint, depth: float, intr: CameraIntrinsics) -> CameraPoint:
    """Lift a pixel with known depth into the camera frame.

    X = (u - cx) * depth / fx, Y = (v - cy) * depth / fy, Z = depth.
    """
    if depth <= 0.0:
        raise DepthError(f"depth must be positive, got {depth}")
    return CameraPoint(
        x=(p.u - intr.cx) * depth / intr.fx,
        y=(p.v - intr.cy) * depth / intr.fy,
        z=depth,
    )


def project(point: CameraPoint, intr: CameraIntrinsics) -> PixelPoint:
    """Project a camera-frame point onto the pixel plane (Z must be > 0)."""
    if point.z <= 0.0:
        raise BehindCameraError(f"cannot project point behind the camera, Z={point.z}")
    return PixelPoint(
        u=intr.fx * point.x / point.z + intr.cx,
        v=intr.fy * point.y / point.z + intr.cy,
    )


class RigidTransform:
    """A 4x4 homogeneous rigid-body transform (rotation + translation).

    The rotation block is validated to be orthonormal with determinant +1
    at construction, so composition and inversion never need re-checking.
    """

    __slots__ = ("_m",)

    def __init__(self, matrix: np.ndarray, *, _validated: bool = False):
        m = np.asarray(matrix, dtype=float)
        if m.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got shape {m.shape}")
        if not _validated:
            r = m[:3, :3]
            if not np.allclose(r @ r.T, np.eye(3), atol=_ORTHO_TOL, rtol=0.0):
                raise ValueError("rotation block is not orthonormal")
            if abs(np.linalg.det(r) - 1.0) > 1e-7:
                raise ValueError("rotation block must have determinant +1")
            if not np.allclose(m[3], (0.0, 0.0, 0.0, 1.0), atol=_ORTHO_TOL):
                raise ValueError("bottom row must be [0, 0, 0, 1]")
        self._m = m

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(4), _validated=True)

    @classmethod
    def _unchecked(cls, matrix: np.ndarray) -> "RigidTransform":
        """Internal: wrap a matrix known to be rigid (no re-validation)."""
        return cls(matrix, _validated=True)

    @classmethod
    def from_rotation_translation(cls, rotation: np.ndarray, translation: Sequence[float]) -> "RigidTransform":
        m = np.eye(4)
        m[:3, :3] = rotation
        m[:3, 3] = translation
        return cls(m)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Return the transform applying ``other`` first, then ``self``."""
        return RigidTransform(self._m @ other._m, _validated=True)

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return self.compose(other)

    def inverse(self) -> "RigidTransform":
        r = self._m[:3, :3]
        t = self._m[:3, 3]
        m = np.eye(4)
        m[:3, :3] = r.T
        m[:3, 3] = -r.T @ t
        return RigidTransform(m, _validated=True)

    def apply(self, x: float, y: float, z: float) -> tuple[float, float, float]:
        """Apply to a point given as plain floats (fast path, no arrays)."""
        m = self._m
        return (
            m[0, 0] * x + m[0, 1] * y + m[0, 2] * z + m[0, 3],
            m[1, 0] * x + m[1, 1] * y + m[1, 2] * z + m[1, 3],
            m[2, 0] * x + m[2, 1] * y + m[2, 2] * z + m[2, 3],
        )

    def apply_point(self, p: CameraPoint) -> CameraPoint:
        x, y, z = self.apply(p.x, p.y, p.z)
        return CameraPoint(x, y, z)

    def rows(self) -> tuple[float, ...]:
        """The 12 meaningful entries, row-major, for hot loops."""
        m = self._m
        return (
            m[0, 0], m[0, 1], m[0, 2], m[0, 3],
            m[1, 0], m[1, 1], m[1, 2], m[1, 3],
            m[2, 0], m[2, 1], m[2, 2], m[2, 3],
        )


def transfer_point(p_src: CameraPoint, t_src: RigidTransform, t_dst: RigidTransform) -> CameraPoint:
    """Map a point from a source camera frame into a destination camera frame.

    Both transforms are world->camera; the chain is ``t_dst @ t_src^-1``.
    """
    return (t_dst @ t_src.inverse()).apply_point(p_src)


def transfer_pixel(
    p: PixelPoint,
    depth: float,
    intr_src: CameraIntrinsics,
    t_src: RigidTransform,
    t_dst: RigidTransform,
    intr_dst: CameraIntrinsics,
) -> PixelPoint:
    """Full pixel-to-pixel transfer: backproject, move frames, reproject.

    Defined as the literal composition of the three steps so pipeline and
    step-by-step results agree bit for bit.
    """
    return project(transfer_point(backproject(p, depth, intr_src), t_src, t_dst), intr_dst)


@dataclass(frozen=True)
class BoundingBox:
    u_min: float
    v_min: float
    u_max: float
    v_max: float

    def __post_init__(self):
        if self.u_min > self.u_max or self.v_min > self.v_max:
            raise ValueError("bounding box must have u_min <= u_max and v_min <= v_max")

    @property
    def area(self) -> float:
        return (self.u_max - self.u_min) * (self.v_max - self.v_min)

    @property
    def center(self) -> PixelPoint:
        return PixelPoint((self.u_min + self.u_max) / 2.0, (self.v_min + self.v_max) / 2.0)


def bbox_iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes; 0 when disjoint."""
    iw = min(a.u_max, b.u_max) - max(a.u_min, b.u_min)
    ih = min(a.v_max, b.v_max) - max(a.v_min, b.v_min)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0.0:
        # two degenerate (zero-area) boxes that touch
        return 1.0
    return inter / union


# --- one-dimensional k-means ------------------------------------------------

_KMEANS_MAX_ITER = 100
_KMEANS_TOL = 1e-6


def cluster_depths(
    depths: Sequence[float],
    k: int,
    rng: Optional[np.random.Generator] = None,
) -> list[tuple[float, int]]:
    """Lloyd's algorithm on 1-D values with k-means++ style seeding.

    Returns ``[(center, size), ...]`` sorted by ascending center.  Ties in the
    point-to-center assignment go to the smaller center.  Seeding draws come
    from ``rng`` (a fixed default stream when omitted), so results are a pure
    function of (depths, k, stream state).
    """
    values = np.asarray(depths, dtype=float).ravel()
    n = values.size
    if n == 0:
        raise EmptyInputError("cannot cluster an empty depth set")
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if k == 1:
        return [(float(values.mean()), n)]

    # Exact shortcuts where Lloyd's fixed point is independent of seeding:
    # one distinct value fills the first cluster (ties go to the lower
    # center), and exactly k distinct values each claim their own cluster.
    uniq, counts = np.unique(values, return_counts=True)
    if uniq.size == 1:
        v = float(uniq[0])
        return [(v, n)] + [(v, 0)] * (k - 1)
    if uniq.size == k:
        return [(float(c), int(s)) for c, s in zip(uniq, counts)]

    if rng is None:
        rng = np.random.default_rng(0)
    centers = _seed_centers(values, k, rng)
    centers.sort()
    for _ in range(_KMEANS_MAX_ITER):
        # assign to nearest center; argmin breaks ties toward the lower index,
        # which is the smaller center because they are kept sorted
        dist = np.abs(values[:, None] - centers[None, :])
        labels = np.argmin(dist, axis=1)
        new_centers = centers.copy()
        for j in range(k):
            members = values[labels == j]
            if members.size:
                new_centers[j] = members.mean()
        new_centers.sort()
        shift = np.max(np.abs(new_centers - centers))
        centers = new_centers
        if shift <= _KMEANS_TOL:
            break

    dist = np.abs(values[:, None] - centers[None, :])
    labels = np.argmin(dist, axis=1)
    sizes = np.bincount(labels, minlength=k)
    return [(float(c), int(s)) for c, s in zip(centers, sizes)]


def _seed_centers(values: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding using only uniform draws from the stream."""
    n = values.size
    centers = np.empty(k)
    centers[0] = values[int(rng.random() * n) % n]
    d2 = (values - centers[0]) ** 2
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining mass is at existing centers; pick uniformly
            centers[j] = values[int(rng.random() * n) % n]
            continue
        target = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(d2), target, side="right"))
        idx = min(idx, n - 1)
        centers[j] = values[idx]
        d2 = np.minimum(d2, (values - centers[j]) ** 2)
    return centers


def pedestrian_distance_from_bbox(
    bbox: BoundingBox,
    depth_patch: Sequence[float],
    k: int = 2,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Distance estimate from per-pixel depths inside a detection box.

    Clusters the patch and returns the nearest (smallest) cluster center,
    which separates the target from any background behind it.
    """
    patch = np.asarray(depth_patch, dtype=float).ravel()
    k = min(k, patch.size) if patch.size else k
    clusters = cluster_depths(patch, k, rng)
    return clusters[0][0]

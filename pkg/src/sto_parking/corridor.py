"""Safe convex regions around reference poses by ellipse shrinking and expansion.

For each reference pose an ellipse is seeded at the vehicle centre, shrunk
until no buffered obstacle enters it, and then inflated uniformly. Each time
the inflated ellipse touches the nearest remaining obstacle a tangent
half-space is emitted and everything beyond it is discarded. All nearest-point
queries run in the space where the ellipse is the unit disk, so they reduce to
closest-point-to-origin problems solved with GJK.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geom2d import AffineMap2, BufferedObstacle, Polygon, clip_polygon, halfspace_polygon, rotation, vec2
from .gjk import GJK_TOL, closest_point_to_origin, distance
from .vehicle import VehicleGeometry

# The initial ellipse circumscribes the footprint with the footprint's aspect ratio.
CIRCUMSCRIBE = math.sqrt(2.0)
MAJOR_AXIS_BACKOFF = 0.95
BISECTION_STEPS = 32
RETOUCH_STEPS = 100
REMOVE_TOL = 1e-12


class CorridorInfeasibleError(RuntimeError):
    def __init__(self, message: str, segment: int | None = None, index: int | None = None):
        where = "" if segment is None else f" (segment {segment}, point {index})"
        super().__init__(message + where)
        self.segment = segment
        self.index = index


@dataclass(frozen=True, eq=False)
class Ellipse:
    """``{C u + d : |u| <= 1}`` with ``C = R diag(alpha, beta) R^T``."""

    rotation: np.ndarray
    semi_major: float
    semi_minor: float
    center: np.ndarray

    def __post_init__(self):
        if not (self.semi_major >= self.semi_minor > 0):
            raise ValueError(f"need semi_major >= semi_minor > 0, got {self.semi_major}, {self.semi_minor}")
        object.__setattr__(self, "rotation", np.asarray(self.rotation, float))
        object.__setattr__(self, "center", vec2(self.center))

    @classmethod
    def from_heading(cls, center, heading: float, semi_major: float, semi_minor: float) -> "Ellipse":
        return cls(rotation(heading), float(semi_major), float(semi_minor), center)

    @property
    def heading(self) -> float:
        return math.atan2(self.rotation[1, 0], self.rotation[0, 0])

    @property
    def shape_matrix(self) -> np.ndarray:
        r = self.rotation
        return r @ np.diag([self.semi_major, self.semi_minor]) @ r.T

    @property
    def map(self) -> AffineMap2:
        return AffineMap2(self.shape_matrix, self.center)

    def with_axes(self, semi_major: float | None = None, semi_minor: float | None = None) -> "Ellipse":
        return Ellipse(self.rotation,
                       self.semi_major if semi_major is None else semi_major,
                       self.semi_minor if semi_minor is None else semi_minor,
                       self.center)

    def to_unit(self, p) -> np.ndarray:
        """Coordinates of ``p`` in the space where this ellipse is the unit disk."""
        r = self.rotation
        q = r.T @ (vec2(p) - self.center)
        return r @ np.array([q[0] / self.semi_major, q[1] / self.semi_minor])

    def contains(self, p, tol: float = 0.0) -> bool:
        return bool(np.linalg.norm(self.to_unit(p)) <= 1.0 + tol)

    def boundary(self, n: int = 100, scale: float = 1.0) -> np.ndarray:
        t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        u = np.column_stack([np.cos(t), np.sin(t)]) * scale
        return u @ self.shape_matrix.T + self.center


@dataclass(frozen=True, eq=False)
class HalfSpace:
    normal: np.ndarray
    offset: float

    def __post_init__(self):
        a = vec2(self.normal)
        n = float(np.linalg.norm(a))
        if n <= 0:
            raise ValueError("half-space normal must be non-zero")
        object.__setattr__(self, "normal", a / n)
        object.__setattr__(self, "offset", float(self.offset) / n)

    def value(self, p) -> float:
        return float(self.normal @ vec2(p) - self.offset)


@dataclass(frozen=True, eq=False)
class ConvexPolygonRegion:
    """``{p : A p <= b}``; ``anchor`` is the point the region was grown around."""

    halfspaces: tuple[HalfSpace, ...]
    anchor: np.ndarray = field(default_factory=lambda: np.zeros(2))
    ellipse: Ellipse | None = None
    n_obstacle_planes: int = 0

    @property
    def A(self) -> np.ndarray:
        if not self.halfspaces:
            return np.zeros((0, 2))
        return np.array([h.normal for h in self.halfspaces])

    @property
    def b(self) -> np.ndarray:
        return np.array([h.offset for h in self.halfspaces])

    def contains(self, p, tol: float = 0.0) -> bool:
        return bool(np.all(self.A @ vec2(p) <= self.b + tol))

    def margin(self, p) -> float:
        """Smallest slack ``b - A p``; positive means strictly inside."""
        return float(np.min(self.b - self.A @ vec2(p)))

    def vertices(self) -> np.ndarray:
        return halfspace_polygon(self.A, self.b)

    def as_polygon(self) -> Polygon:
        return Polygon.unchecked(self.vertices())


@dataclass
class Corridor:
    regions: list[list[ConvexPolygonRegion]]
    vehicle: VehicleGeometry | None = None

    def __len__(self):
        return sum(len(seg) for seg in self.regions)

    def to_dict(self) -> dict:
        return {"segments": [[{"A": r.A.tolist(), "b": r.b.tolist(), "vertices": r.vertices().tolist()}
                              for r in seg] for seg in self.regions]}


def proximity_box(rear_axle, half_widths) -> list[HalfSpace]:
    p = vec2(rear_axle)
    hx, hy = (float(h) for h in half_widths)
    return [HalfSpace((1.0, 0.0), p[0] + hx), HalfSpace((-1.0, 0.0), -(p[0] - hx)),
            HalfSpace((0.0, 1.0), p[1] + hy), HalfSpace((0.0, -1.0), -(p[1] - hy))]


def _inverse_closest(e: Ellipse, obs: BufferedObstacle):
    """Closest point of ``F^-1(obs)`` to the origin, and its image back in world space."""
    fmap = e.map
    res = closest_point_to_origin(obs.transformed(fmap.inverse()), tol=GJK_TOL)
    return res, fmap.apply(res.point)


def _point_clear(p, obstacles) -> bool:
    pt = Polygon.unchecked([vec2(p)])
    for o in obstacles:
        res = distance(pt, o)
        if res.contains_origin or res.distance <= 0.0:
            return False
    return True


def _axis_clear(center, direction, half_len, obs) -> bool:
    seg = Polygon.unchecked([center - half_len * direction, center + half_len * direction])
    res = distance(seg, obs)
    return not res.contains_origin and res.distance > 0.0


def initial_ellipse(ref_point, veh: VehicleGeometry, obstacles: Sequence[BufferedObstacle],
                    scale: float = CIRCUMSCRIBE) -> Ellipse:
    """Heading-aligned ellipse at the vehicle centre with the footprint's aspect ratio.

    The semi-major axis starts at ``scale * length / 2`` and is reduced by
    bisection until the whole major axis clears every buffered obstacle.
    """
    s = np.asarray(ref_point, float)
    if not np.all(np.isfinite(s)):
        raise ValueError("reference point must be finite")
    heading = float(s[2])
    center = veh.center(s)
    if not _point_clear(center, obstacles):
        raise CorridorInfeasibleError("vehicle centre lies inside a buffered obstacle")
    ratio = veh.W / veh.length
    alpha0 = scale * 0.5 * veh.length
    direction = np.array([math.cos(heading), math.sin(heading)])
    alpha = alpha0
    for obs in obstacles:
        if _axis_clear(center, direction, alpha, obs):
            continue
        lo, hi = 0.0, alpha
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            if _axis_clear(center, direction, mid, obs):
                lo = mid
            else:
                hi = mid
        alpha = lo
    if alpha < alpha0:
        # a tip resting exactly on an obstacle face would force the minor axis to zero
        alpha *= MAJOR_AXIS_BACKOFF
    if alpha <= 0.0:
        raise CorridorInfeasibleError("major axis collapsed to zero length")
    return Ellipse.from_heading(center, heading, alpha, alpha * ratio)


def _minor_axis_through(e: Ellipse, p) -> float:
    q = e.rotation.T @ (vec2(p) - e.center)
    ratio = q[0] / e.semi_major
    if abs(ratio) >= 1.0 or abs(q[1]) <= 1e-12:
        raise CorridorInfeasibleError("obstacle closest point lies on the major axis")
    return abs(q[1]) / math.sqrt(1.0 - ratio * ratio)


def shrink_ellipse(e: Ellipse, obstacles: Sequence[BufferedObstacle]) -> Ellipse:
    """Shorten the minor axis until every obstacle is outside the ellipse interior.

    Obstacles are visited in input order. When an obstacle's nearest point
    lies inside, the minor axis is set so the ellipse passes through it with
    the major axis fixed; the query is repeated for that obstacle until it
    only touches, since the thinner ellipse can meet the obstacle elsewhere.
    """
    for obs in obstacles:
        for _ in range(RETOUCH_STEPS):
            res, p = _inverse_closest(e, obs)
            if res.distance >= 1.0 - 1e-9 and not res.contains_origin:
                break
            if res.contains_origin:
                raise CorridorInfeasibleError("buffered obstacle covers the ellipse centre")
            beta = _minor_axis_through(e, p)
            if not beta < e.semi_minor:
                break
            e = e.with_axes(semi_minor=beta)
        else:
            e = _bisect_minor(e, obs)
    return e


def _bisect_minor(e: Ellipse, obs: BufferedObstacle) -> Ellipse:
    lo, hi = 0.0, e.semi_minor
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        res, _ = _inverse_closest(e.with_axes(semi_minor=mid), obs)
        if res.distance >= 1.0 and not res.contains_origin:
            lo = mid
        else:
            hi = mid
    if lo <= 0.0:
        raise CorridorInfeasibleError("minor axis collapsed to zero length")
    return e.with_axes(semi_minor=lo)


def tangent_halfspace(e: Ellipse, p) -> HalfSpace:
    """Supporting half-space of the inflated ellipse through boundary point ``p``."""
    c_inv = np.linalg.inv(e.shape_matrix)
    p = vec2(p)
    a = c_inv @ c_inv.T @ (p - e.center)
    return HalfSpace(a, float(a @ p))


def _outside(obs: BufferedObstacle, h: HalfSpace) -> bool:
    lowest = obs.support(-h.normal) @ h.normal
    return lowest >= h.offset - REMOVE_TOL


def _overlaps_box(obs: BufferedObstacle, box: Sequence[HalfSpace]) -> bool:
    return not any(_outside(obs, h) for h in box)


def generate_polygon(e: Ellipse, obstacles: Sequence[BufferedObstacle],
                     box: Sequence[HalfSpace] = ()) -> ConvexPolygonRegion:
    """Inflate ``e`` against the obstacles and intersect the tangent half-spaces with ``box``."""
    remaining = [o for o in obstacles if _overlaps_box(o, box)] if box else list(obstacles)
    cache = [_inverse_closest(e, o) for o in remaining]
    planes: list[HalfSpace] = []
    while remaining:
        k = min(range(len(remaining)), key=lambda i: cache[i][0].distance)
        res, p = cache[k]
        if res.contains_origin or res.distance <= 0.0:
            raise CorridorInfeasibleError("obstacle reaches the ellipse centre")
        h = tangent_halfspace(e, p)
        # GJK stops within its tolerance; slide the plane onto the obstacle's exact supporting line
        lowest = float(remaining[k].support(-h.normal) @ h.normal)
        if lowest < h.offset:
            h = HalfSpace(h.normal, lowest)
        planes.append(h)
        # the obstacle that generated h lies beyond it by construction
        del remaining[k], cache[k]
        keep_obs, keep_cache = [], []
        for obs, c in zip(remaining, cache):
            if _outside(obs, h):
                continue
            base = obs.base
            if isinstance(base, Polygon):
                # (O + B) n H is covered by (O n {a.o <= b + r}) + B
                clipped = clip_polygon(base.vertices, h.normal, h.offset + obs.buffer)
                if len(clipped) == 0:
                    continue
                if len(clipped) != len(base.vertices) or not np.allclose(clipped, base.vertices):
                    obs = obs.with_base(Polygon.unchecked(clipped))
                    c = _inverse_closest(e, obs)
            keep_obs.append(obs)
            keep_cache.append(c)
        remaining, cache = keep_obs, keep_cache
    n_obs = len(planes)
    return ConvexPolygonRegion(tuple(planes) + tuple(box), anchor=e.center, ellipse=e, n_obstacle_planes=n_obs)


def region_for_pose(ref_state, veh: VehicleGeometry, obstacles: Sequence[BufferedObstacle],
                    box_half_widths=(3.0, 3.0)) -> ConvexPolygonRegion:
    """Full two-step construction for one reference pose.

    The bounding box is the proximity box on the rear axle widened by the
    vehicle's reach, so it never cuts a footprint whose rear axle respects the
    proximity bound.
    """
    s = np.asarray(ref_state, float)
    relevant_box = proximity_box(s[:2], np.asarray(box_half_widths, float) + veh.reach)
    near = [o for o in obstacles if _overlaps_box(o, relevant_box)]
    e = initial_ellipse(s, veh, near)
    e = shrink_ellipse(e, near)
    return generate_polygon(e, near, relevant_box)


def build_corridor(traj, veh: VehicleGeometry, obstacles: Sequence[BufferedObstacle],
                   box_half_widths=(3.0, 3.0)) -> Corridor:
    """One region per reference point; failures are tagged with (segment, index)."""
    regions = []
    for i, seg in enumerate(traj.segments):
        out = []
        for k, s in enumerate(np.asarray(seg.states, float)):
            try:
                out.append(region_for_pose(s, veh, obstacles, box_half_widths))
            except CorridorInfeasibleError as exc:
                raise CorridorInfeasibleError(str(exc), i, k) from exc
        regions.append(out)
    return Corridor(regions, veh)

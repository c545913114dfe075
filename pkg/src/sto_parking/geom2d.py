"""Planar affine algebra and convex shapes accessed through support functions.

Vectors are plain ``numpy`` arrays of shape ``(2,)``. Every shape exposes two
support entry points: :meth:`ConvexShape.support`, the array-facing version,
and :meth:`ConvexShape.support_xy`, a float-tuple fast path used by the GJK
inner loop where per-call ``numpy`` overhead dominates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

GEOM_TOL = 1e-9
SINGULAR_DET = 1e-12


class SingularMapError(ValueError):
    """Raised when an affine map with a (numerically) singular linear part is inverted."""


def vec2(p) -> np.ndarray:
    """Coerce ``p`` to a finite float array of shape (2,)."""
    arr = np.asarray(p, dtype=float).reshape(-1)
    if arr.shape != (2,):
        raise ValueError(f"expected a 2-vector, got shape {np.shape(p)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite vector {arr}")
    return arr


def _direction_xy(direction) -> tuple[float, float]:
    d = vec2(direction)
    dx, dy = float(d[0]), float(d[1])
    if dx == 0.0 and dy == 0.0:
        raise ValueError("support direction must be non-zero")
    return dx, dy


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True, eq=False)
class AffineMap2:
    """The map ``p -> linear @ p + offset``."""

    linear: np.ndarray
    offset: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        lin = np.array(self.linear, dtype=float)
        if lin.shape != (2, 2) or not np.all(np.isfinite(lin)):
            raise ValueError(f"linear part must be a finite 2x2 matrix, got {lin!r}")
        lin.setflags(write=False)
        off = vec2(self.offset).copy()
        off.setflags(write=False)
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "offset", off)

    @classmethod
    def identity(cls) -> "AffineMap2":
        return cls(np.eye(2), np.zeros(2))

    @property
    def det(self) -> float:
        m = self.linear
        return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])

    @property
    def invertible(self) -> bool:
        return abs(self.det) > SINGULAR_DET

    def apply(self, p) -> np.ndarray:
        return self.linear @ vec2(p) + self.offset

    def inverse(self) -> "AffineMap2":
        if not self.invertible:
            raise SingularMapError(f"affine map is singular (det={self.det:.3e})")
        inv = np.linalg.inv(self.linear)
        return AffineMap2(inv, -inv @ self.offset)

    def invert(self, p) -> np.ndarray:
        if not self.invertible:
            raise SingularMapError(f"affine map is singular (det={self.det:.3e})")
        return np.linalg.solve(self.linear, vec2(p) - self.offset)

    def compose(self, inner: "AffineMap2") -> "AffineMap2":
        """Return ``self o inner``."""
        return AffineMap2(self.linear @ inner.linear, self.linear @ inner.offset + self.offset)

    def linear_only(self) -> "AffineMap2":
        return AffineMap2(self.linear, np.zeros(2))

    def __eq__(self, other):
        if not isinstance(other, AffineMap2):
            return NotImplemented
        return np.array_equal(self.linear, other.linear) and np.array_equal(self.offset, other.offset)

    def __hash__(self):
        return hash((self.linear.tobytes(), self.offset.tobytes()))


def apply_map(m: AffineMap2, p) -> np.ndarray:
    return m.apply(p)


def invert_map(m: AffineMap2, p) -> np.ndarray:
    return m.invert(p)


class ConvexShape:
    """Base class for compact convex sets queried through their support function."""

    def support_xy(self, dx: float, dy: float) -> tuple[float, float]:
        raise NotImplementedError

    def support(self, direction) -> np.ndarray:
        dx, dy = _direction_xy(direction)
        return np.array(self.support_xy(dx, dy))

    def seed_point(self) -> np.ndarray:
        """Some point of the set; used to start GJK."""
        raise NotImplementedError

    def transformed(self, m: AffineMap2) -> "ConvexShape":
        raise NotImplementedError

    def contains(self, p, tol: float = GEOM_TOL) -> bool:
        raise NotImplementedError


class Polygon(ConvexShape):
    """Convex polygon with counter-clockwise vertices.

    The public constructor validates strict convexity. Internally derived
    pieces (clipping results, vertices of an affine image) are built with
    :meth:`Polygon.unchecked`, which only requires a non-empty point list; the
    support function is correct for the convex hull of any point set.
    """

    def __init__(self, vertices, *, _validate: bool = True):
        v = np.array(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) == 0:
            raise ValueError(f"polygon vertices must be an (n, 2) array, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("polygon vertices must be finite")
        if _validate:
            _check_strictly_convex_ccw(v)
        v.setflags(write=False)
        self.vertices = v
        self._xy = tuple((float(a), float(b)) for a, b in v)

    @classmethod
    def unchecked(cls, vertices) -> "Polygon":
        return cls(vertices, _validate=False)

    @classmethod
    def box(cls, xmin: float, ymin: float, xmax: float, ymax: float) -> "Polygon":
        return cls([(xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)])

    @classmethod
    def rectangle(cls, center, heading: float, length: float, width: float) -> "Polygon":
        c = vec2(center)
        half = np.array([[0.5 * length, -0.5 * width], [0.5 * length, 0.5 * width],
                         [-0.5 * length, 0.5 * width], [-0.5 * length, -0.5 * width]])
        return cls(half @ rotation(heading).T + c)

    @classmethod
    def regular(cls, n: int, radius: float = 1.0, center=(0.0, 0.0), phase: float = 0.0) -> "Polygon":
        t = phase + 2.0 * np.pi * np.arange(n) / n
        return cls(np.column_stack([np.cos(t), np.sin(t)]) * radius + vec2(center))

    def support_xy(self, dx, dy):
        pts = self._xy
        best = pts[0]
        best_val = best[0] * dx + best[1] * dy
        for p in pts[1:]:
            val = p[0] * dx + p[1] * dy
            if val > best_val:
                best, best_val = p, val
        return best

    def seed_point(self):
        return self.vertices[0].copy()

    def transformed(self, m: AffineMap2) -> "Polygon":
        if not m.invertible:
            raise SingularMapError(f"cannot transform a polygon by a singular map (det={m.det:.3e})")
        v = self.vertices @ m.linear.T + m.offset
        if m.det < 0:
            v = v[::-1]
        return Polygon.unchecked(v)

    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        """Outward unit normals ``A`` and offsets ``b`` with the polygon ``{A p <= b}``."""
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        n = np.column_stack([e[:, 1], -e[:, 0]])
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        return n, np.einsum("ij,ij->i", n, v)

    def contains(self, p, tol=GEOM_TOL):
        a, b = self.halfspaces()
        return bool(np.all(a @ vec2(p) <= b + tol))

    def is_ccw_convex(self, tol: float = 0.0) -> bool:
        try:
            _check_strictly_convex_ccw(self.vertices, tol)
        except ValueError:
            return False
        return True

    def __repr__(self):
        return f"Polygon({self.vertices.tolist()!r})"


def _check_strictly_convex_ccw(v: np.ndarray, tol: float = 0.0) -> None:
    n = len(v)
    if n < 3:
        raise ValueError(f"polygon needs at least 3 vertices, got {n}")
    nxt = np.roll(v, -1, axis=0)
    if np.any(np.linalg.norm(nxt - v, axis=1) <= GEOM_TOL):
        raise ValueError("polygon has duplicate vertices")
    e0 = nxt - v
    e1 = np.roll(e0, -1, axis=0)
    cross = e0[:, 0] * e1[:, 1] - e0[:, 1] * e1[:, 0]
    if np.any(cross <= tol):
        raise ValueError("polygon vertices must be strictly convex and counter-clockwise")
    # a star polygon passes the local turn test but winds more than once
    ang = np.arctan2(e0[:, 1], e0[:, 0])
    turn = np.mod(np.diff(np.append(ang, ang[0])), 2 * np.pi)
    if abs(turn.sum() - 2 * np.pi) > 1e-6:
        raise ValueError("polygon winds more than once")


class Disk(ConvexShape):
    def __init__(self, center, radius: float):
        radius = float(radius)
        if not (radius > 0 and math.isfinite(radius)):
            raise ValueError(f"disk radius must be positive, got {radius}")
        self.center = vec2(center)
        self.center.setflags(write=False)
        self.radius = radius
        self._c = (float(self.center[0]), float(self.center[1]))

    def support_xy(self, dx, dy):
        s = self.radius / math.hypot(dx, dy)
        return (self._c[0] + s * dx, self._c[1] + s * dy)

    def seed_point(self):
        return self.center.copy()

    def transformed(self, m: AffineMap2) -> ConvexShape:
        lin = m.linear @ (self.radius * np.eye(2))
        gram = m.linear @ m.linear.T
        scale2 = 0.5 * np.trace(gram)
        if not m.invertible:
            raise SingularMapError(f"cannot transform a disk by a singular map (det={m.det:.3e})")
        if np.allclose(gram, scale2 * np.eye(2), rtol=0.0, atol=1e-12 * max(scale2, 1.0)):
            return Disk(m.apply(self.center), self.radius * math.sqrt(scale2))
        return EllipseShape(AffineMap2(lin, m.apply(self.center)))

    def contains(self, p, tol=GEOM_TOL):
        return bool(np.linalg.norm(vec2(p) - self.center) <= self.radius + tol)

    def __repr__(self):
        return f"Disk({self.center.tolist()!r}, {self.radius!r})"


class EllipseShape(ConvexShape):
    """The image ``{M u + m : |u| <= 1}`` of the unit disk under an invertible map."""

    def __init__(self, m: AffineMap2):
        if not m.invertible:
            raise ValueError("ellipse map must be invertible")
        self.map = m
        (a, b), (c, d) = m.linear.tolist()
        self._lin = (a, b, c, d)
        self._off = (float(m.offset[0]), float(m.offset[1]))

    @classmethod
    def from_axes(cls, center, semi_axes: Sequence[float], angle: float = 0.0) -> "EllipseShape":
        a, b = (float(s) for s in semi_axes)
        if not (a > 0 and b > 0):
            raise ValueError(f"ellipse semi-axes must be positive, got {semi_axes}")
        r = rotation(angle)
        return cls(AffineMap2(r @ np.diag([a, b]), vec2(center)))

    def support_xy(self, dx, dy):
        a, b, c, d = self._lin
        # u* = M^T v / |M^T v|, support = M u* + m
        ux, uy = a * dx + c * dy, b * dx + d * dy
        n = math.hypot(ux, uy)
        ux, uy = ux / n, uy / n
        return (a * ux + b * uy + self._off[0], c * ux + d * uy + self._off[1])

    def seed_point(self):
        return self.map.offset.copy()

    def transformed(self, m: AffineMap2) -> "EllipseShape":
        if not m.invertible:
            raise SingularMapError(f"cannot transform an ellipse by a singular map (det={m.det:.3e})")
        return EllipseShape(m.compose(self.map))

    def semi_axes(self) -> np.ndarray:
        return np.linalg.svd(self.map.linear, compute_uv=False)

    def contains(self, p, tol=GEOM_TOL):
        u = self.map.invert(p)
        return bool(np.linalg.norm(u) <= 1.0 + tol)

    def __repr__(self):
        return f"EllipseShape(linear={self.map.linear.tolist()!r}, center={self.map.offset.tolist()!r})"


class MinkowskiSum(ConvexShape):
    def __init__(self, parts: Iterable[ConvexShape]):
        self.parts = tuple(parts)
        if not self.parts:
            raise ValueError("Minkowski sum needs at least one part")

    def support_xy(self, dx, dy):
        sx = sy = 0.0
        for part in self.parts:
            px, py = part.support_xy(dx, dy)
            sx += px
            sy += py
        return (sx, sy)

    def seed_point(self):
        return np.sum([p.seed_point() for p in self.parts], axis=0)

    def transformed(self, m: AffineMap2) -> "MinkowskiSum":
        first, *rest = self.parts
        lin = m.linear_only()
        return MinkowskiSum([first.transformed(m), *(p.transformed(lin) for p in rest)])


@dataclass(frozen=True, eq=False)
class BufferedObstacle:
    """A convex set grown by a disk of radius ``buffer``; never materialised as geometry."""

    base: ConvexShape
    buffer: float = 0.0

    def __post_init__(self):
        if not (self.buffer >= 0 and math.isfinite(self.buffer)):
            raise ValueError(f"buffer must be a non-negative finite length, got {self.buffer}")

    def support_xy(self, dx, dy):
        bx, by = self.base.support_xy(dx, dy)
        if self.buffer == 0.0:
            return (bx, by)
        s = self.buffer / math.hypot(dx, dy)
        return (bx + s * dx, by + s * dy)

    def support(self, direction) -> np.ndarray:
        dx, dy = _direction_xy(direction)
        return np.array(self.support_xy(dx, dy))

    def seed_point(self) -> np.ndarray:
        return self.base.seed_point()

    def as_shape(self) -> ConvexShape:
        if self.buffer == 0.0:
            return self.base
        return MinkowskiSum([self.base, Disk((0.0, 0.0), self.buffer)])

    def transformed(self, m: AffineMap2) -> ConvexShape:
        """Image under ``m``: ``m(base) + linear(m)(disk)``."""
        return self.as_shape().transformed(m)

    def with_base(self, base: ConvexShape) -> "BufferedObstacle":
        return BufferedObstacle(base, self.buffer)


def support(shape: ConvexShape, direction) -> np.ndarray:
    return shape.support(direction)


def support_buffered(obs: BufferedObstacle, direction) -> np.ndarray:
    return obs.support(direction)


def transform_shape(m: AffineMap2, shape: ConvexShape) -> ConvexShape:
    return shape.transformed(m)


def clip_polygon(vertices: np.ndarray, normal, offset: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex point loop against ``normal . p <= offset``.

    Returns the (possibly empty) clipped vertex array; degenerate outputs with
    fewer than three vertices are returned as-is.
    """
    a = vec2(normal)
    out = []
    n = len(vertices)
    if n == 0:
        return np.empty((0, 2))
    vals = vertices @ a - offset
    for i in range(n):
        p, q = vertices[i], vertices[(i + 1) % n]
        fp, fq = vals[i], vals[(i + 1) % n]
        if fp <= 0:
            out.append(p)
        if (fp < 0 < fq) or (fq < 0 < fp):
            t = fp / (fp - fq)
            out.append(p + t * (q - p))
    if not out:
        return np.empty((0, 2))
    pts = np.array(out)
    keep = [0]
    for i in range(1, len(pts)):
        if np.linalg.norm(pts[i] - pts[keep[-1]]) > GEOM_TOL:
            keep.append(i)
    if len(keep) > 1 and np.linalg.norm(pts[keep[-1]] - pts[keep[0]]) <= GEOM_TOL:
        keep.pop()
    return pts[keep]


def halfspace_polygon(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vertices (CCW) of the bounded region ``{p : a p <= b}``; empty if infeasible.

    Uses repeated clipping of a large box, which is exact for the bounded
    regions produced here (corridor regions always include a proximity box).
    """
    big = 1e6
    v = np.array([(-big, -big), (big, -big), (big, big), (-big, big)], dtype=float)
    for ai, bi in zip(np.asarray(a, float), np.asarray(b, float)):
        v = clip_polygon(v, ai, bi)
        if len(v) == 0:
            break
    return v

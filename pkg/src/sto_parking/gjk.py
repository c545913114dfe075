"""Closest point to the origin of a convex set given only its support function.

This is the 2-D Gilbert-Johnson-Keerthi distance iteration: take the support
point opposite the current estimate, add it to the simplex, and replace the
estimate with the closest point of the simplex hull.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .geom2d import ConvexShape, vec2

GJK_TOL = 1e-8
MAX_ITER = 64

SupportXY = Callable[[float, float], "tuple[float, float]"]


class GJKNonConvergence(RuntimeError):
    def __init__(self, message: str, best: "ClosestPointResult"):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class ClosestPointResult:
    point: np.ndarray
    distance: float
    contains_origin: bool
    iterations: int = 0
    support_point: np.ndarray | None = None


@dataclass(frozen=True)
class Simplex2:
    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not 1 <= len(self.points) <= 3:
            raise ValueError(f"a planar simplex has 1 to 3 points, got {len(self.points)}")


def _support_fn(obj: Union[ConvexShape, SupportXY, object]) -> SupportXY:
    fn = getattr(obj, "support_xy", None)
    if fn is not None:
        return fn
    if callable(obj):
        return obj
    raise TypeError(f"{obj!r} has no support function")


def _closest_on_segment(a, b):
    ax, ay = a
    ex, ey = b[0] - ax, b[1] - ay
    ee = ex * ex + ey * ey
    if ee <= 0.0:
        return a, (a,)
    t = -(ax * ex + ay * ey) / ee
    if t <= 0.0:
        return a, (a,)
    if t >= 1.0:
        return b, (b,)
    return (ax + t * ex, ay + t * ey), (a, b)


def _closest_xy(pts):
    if len(pts) == 1:
        return pts[0], pts
    if len(pts) == 2:
        return _closest_on_segment(pts[0], pts[1])
    a, b, c = pts
    # signed areas of the sub-triangles with the origin
    d1 = b[0] * c[1] - b[1] * c[0]
    d2 = c[0] * a[1] - c[1] * a[0]
    d3 = a[0] * b[1] - a[1] * b[0]
    total = d1 + d2 + d3
    if total != 0.0 and ((d1 >= 0 and d2 >= 0 and d3 >= 0) or (d1 <= 0 and d2 <= 0 and d3 <= 0)):
        return (0.0, 0.0), pts
    best = None
    for p, q in ((a, b), (a, c), (b, c)):
        cand, sub = _closest_on_segment(p, q)
        n = cand[0] * cand[0] + cand[1] * cand[1]
        if best is None or n < best[0]:
            best = (n, cand, sub)
    return best[1], best[2]


def closest_point_on_simplex(s: Simplex2) -> tuple[np.ndarray, Simplex2]:
    """Closest point of the hull of ``s`` to the origin and the minimal supporting sub-simplex."""
    pts = tuple((float(p[0]), float(p[1])) for p in s.points)
    p, sub = _closest_xy(pts)
    return np.array(p), Simplex2(sub)


def closest_point_to_origin(support, seed=None, tol: float = GJK_TOL,
                            max_iter: int = MAX_ITER) -> ClosestPointResult:
    """Minimise ``|p|`` over a compact convex set.

    Args:
        support: a shape with ``support_xy`` or a callable ``(dx, dy) -> (x, y)``.
        seed: any point of the set; defaults to ``support.seed_point()``.
        tol: absolute tolerance on the duality gap ``|p| - <p, w>/|p|``.

    Raises:
        GJKNonConvergence: after ``max_iter`` iterations; carries the best iterate.
    """
    sup = _support_fn(support)
    if seed is None:
        seed = support.seed_point()
    sx, sy = vec2(seed)
    p = (float(sx), float(sy))
    simplex: tuple = (p,)
    pn = math.hypot(*p)
    w = p
    for it in range(max_iter):
        if pn < tol:
            return ClosestPointResult(np.zeros(2), 0.0, True, it, np.array(w))
        w = sup(-p[0], -p[1])
        gap = pn - (p[0] * w[0] + p[1] * w[1]) / pn
        if abs(gap) < tol:
            return ClosestPointResult(np.array(p), pn, False, it, np.array(w))
        if any(abs(q[0] - w[0]) < 1e-12 and abs(q[1] - w[1]) < 1e-12 for q in simplex):
            # support point repeats: the gap cannot shrink further in floating point
            return ClosestPointResult(np.array(p), pn, False, it, np.array(w))
        new_p, new_simplex = _closest_xy((w,) + simplex)
        new_pn = math.hypot(*new_p)
        if new_pn >= pn:
            return ClosestPointResult(np.array(p), pn, False, it, np.array(w))
        p, simplex, pn = new_p, new_simplex, new_pn
    best = ClosestPointResult(np.array(p), pn, pn < tol, max_iter, np.array(w))
    raise GJKNonConvergence(f"GJK did not converge in {max_iter} iterations (|p|={pn:.3e})", best)


class _Difference:
    """Support function of ``A - B``."""

    def __init__(self, a, b):
        self._a = _support_fn(a)
        self._b = _support_fn(b)

    def __call__(self, dx, dy):
        ax, ay = self._a(dx, dy)
        bx, by = self._b(-dx, -dy)
        return (ax - bx, ay - by)


def distance(a, b, tol: float = GJK_TOL, max_iter: int = MAX_ITER) -> ClosestPointResult:
    """Separation of two convex sets; ``point`` is the shortest vector from ``b`` to ``a``."""
    diff = _Difference(a, b)
    seed = diff(1.0, 0.0)
    return closest_point_to_origin(diff, seed, tol=tol, max_iter=max_iter)

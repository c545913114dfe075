"""Coarse kinematic search for an initial segmented parking path.

A hybrid-state lattice search: nodes carry continuous poses but are deduplicated
on an ``(x, y, heading)`` grid. Each expansion drives a short arc at curvature
``-kappa_max``, ``0`` or ``+kappa_max`` forwards or backwards. The returned path
is split into segments wherever the driving direction changes.
"""
from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geom2d import BufferedObstacle, Disk, Polygon
from .gjk import distance as gjk_distance
from .sto import BACKWARD, FORWARD, LabeledPath, PathSegment
from .vehicle import VehicleGeometry, corners

log = logging.getLogger(__name__)


class PlannerFailure(RuntimeError):
    pass


def wrap_angle(a):
    return (np.asarray(a) + np.pi) % (2 * np.pi) - np.pi


@dataclass(frozen=True)
class GridSpec:
    xy_resolution: float = 0.2
    heading_resolution: float = math.radians(10.0)
    step: float = 0.3
    sample_spacing: float = 0.1
    switch_penalty: float = 2.0
    steer_change_penalty: float = 0.2
    heading_weight: float = 2.0
    goal_xy_tolerance: float = 0.2
    goal_heading_tolerance: float = math.radians(5.0)
    max_nodes: int = 200_000
    clearance: float = 0.0

    def __post_init__(self):
        positive = (self.xy_resolution, self.heading_resolution, self.step, self.sample_spacing,
                    self.goal_xy_tolerance, self.goal_heading_tolerance)
        if any(not v > 0 for v in positive) or self.max_nodes < 1 or self.clearance < 0:
            raise ValueError(f"invalid grid specification: {self}")


@dataclass
class SearchNode:
    pose: tuple[float, float, float]
    direction: str | None
    g_cost: float
    parent: int
    kappa: float = 0.0


def _seg_point_dist(p, a, b):
    """Distance from points ``p`` (..., 2) to segments ``a``-``b`` (broadcast)."""
    ab = b - a
    t = np.einsum("...i,...i->...", p - a, ab) / np.maximum(np.einsum("...i,...i->...", ab, ab), 1e-300)
    t = np.clip(t, 0.0, 1.0)
    q = a + t[..., None] * ab
    return np.linalg.norm(p - q, axis=-1)


class FootprintChecker:
    """Vectorized vehicle-rectangle versus buffered-obstacle tests."""

    def __init__(self, obstacles: Sequence[BufferedObstacle], veh: VehicleGeometry, clearance: float = 0.0):
        self.veh = veh
        self.polys, self.disks, self.other = [], [], []
        for o in obstacles:
            r = o.buffer + clearance
            if isinstance(o.base, Polygon):
                v = o.base.vertices
                vn = np.roll(v, -1, axis=0)
                e = vn - v
                normals = np.column_stack([e[:, 1], -e[:, 0]])
                normals /= np.linalg.norm(normals, axis=1, keepdims=True)
                box = np.concatenate([v.min(0) - r, v.max(0) + r])
                self.polys.append((v, vn, normals, r, box))
            elif isinstance(o.base, Disk):
                self.disks.append((o.base.center, o.base.radius + r))
            else:
                self.other.append((o, clearance))

    def free(self, poses) -> np.ndarray:
        """Boolean mask over poses ``(..., 3)``: ``True`` where the footprint clears every obstacle."""
        poses = np.asarray(poses, float)
        shape = poses.shape[:-1]
        P = poses.reshape(-1, 3)
        ok = np.ones(len(P), bool)
        if not len(P):
            return ok.reshape(shape)
        C = corners(P, self.veh)  # (n, 4, 2) in FL, FR, RL, RR
        ring = C[:, [0, 1, 3, 2]]  # FL, FR, RR, RL walks the boundary
        ring_next = np.roll(ring, -1, axis=1)
        c, s = np.cos(P[:, 2]), np.sin(P[:, 2])
        axes_r = np.stack([np.column_stack([c, s]), np.column_stack([-s, c])], axis=1)  # (n, 2, 2)
        lo, hi = C.min(axis=1), C.max(axis=1)
        for v, vn, normals, r, box in self.polys:
            # broad phase on bounding boxes, exact test only where they overlap
            near = np.flatnonzero(ok & np.all(hi >= box[:2], axis=1) & np.all(lo <= box[2:], axis=1))
            if not len(near):
                continue
            rg, rn, ax = ring[near], ring_next[near], axes_r[near]
            # separating axis test on the base polygon
            pr_r = np.einsum("nkd,nad->nka", rg, ax)
            pv_r = np.einsum("md,nad->nma", v, ax)
            sep = np.any((pr_r.max(1) < pv_r.min(1)) | (pv_r.max(1) < pr_r.min(1)), axis=1)
            pr_p = rg @ normals.T
            pv_p = v @ normals.T
            sep |= np.any((pr_p.max(1) < pv_p.min(0)) | (pv_p.max(0) < pr_p.min(1)), axis=1)
            d1 = _seg_point_dist(rg[:, :, None, :], v[None, None], vn[None, None]).min(axis=(1, 2))
            d2 = _seg_point_dist(v[None, :, None, :], rg[:, None], rn[:, None]).min(axis=(1, 2))
            ok[near] = sep & (np.minimum(d1, d2) > r)
        for center, rad in self.disks:
            rel = center - P[:, :2]
            lx = rel[:, 0] * c + rel[:, 1] * s
            ly = -rel[:, 0] * s + rel[:, 1] * c
            dx = np.maximum(np.maximum(-self.veh.L_r - lx, lx - self.veh.L_f), 0.0)
            dy = np.maximum(np.abs(ly) - 0.5 * self.veh.W, 0.0)
            ok &= np.hypot(dx, dy) > rad
        for o, clearance in self.other:
            for i in np.flatnonzero(ok):
                res = gjk_distance(self.veh.footprint(P[i]), o)
                ok[i] = (not res.contains_origin) and res.distance > clearance
        return ok.reshape(shape)


def _arc_samples(pose, direction: float, kappa: float, length: float, n: int) -> np.ndarray:
    """Poses along an arc, excluding the start, ``(n, 3)``."""
    x, y, th = pose
    s = direction * length * np.arange(1, n + 1) / n
    if abs(kappa) < 1e-12:
        return np.column_stack([x + s * math.cos(th), y + s * math.sin(th), np.full(n, th)])
    t = th + kappa * s
    return np.column_stack([x + (np.sin(t) - math.sin(th)) / kappa,
                            y - (np.cos(t) - math.cos(th)) / kappa, t])


def plan_seed_path(start, goal, obstacles: Sequence[BufferedObstacle], veh: VehicleGeometry,
                   grid: GridSpec | None = None, kappa_max: float = 0.16) -> LabeledPath:
    """Search for a collision-free forward/backward arc path from ``start`` to ``goal``.

    Raises:
        PlannerFailure: if either endpoint collides or the node budget runs out.
    """
    grid = grid or GridSpec()
    start = tuple(float(v) for v in start)
    goal = tuple(float(v) for v in goal)
    checker = FootprintChecker(obstacles, veh, grid.clearance)
    if not checker.free(np.array([start]))[0]:
        raise PlannerFailure("start pose collides with an obstacle")
    if not checker.free(np.array([goal]))[0]:
        raise PlannerFailure("goal pose collides with an obstacle")

    def reached(p):
        return (math.hypot(p[0] - goal[0], p[1] - goal[1]) <= grid.goal_xy_tolerance
                and abs(float(wrap_angle(p[2] - goal[2]))) <= grid.goal_heading_tolerance)

    if reached(start):
        return LabeledPath([PathSegment(np.array([start]), FORWARD)])

    n_samples = max(1, math.ceil(grid.step / grid.sample_spacing - 1e-9))
    prims = [(d, k) for d in (1.0, -1.0) for k in (-kappa_max, 0.0, kappa_max)]
    n_head = max(1, round(2 * math.pi / grid.heading_resolution))
    local = np.stack([_arc_samples((0.0, 0.0, 0.0), d, k, grid.step, n_samples) for d, k in prims])

    def cell(p):
        return (round(p[0] / grid.xy_resolution), round(p[1] / grid.xy_resolution),
                round(p[2] / grid.heading_resolution) % n_head)

    def heuristic(p):
        return (math.hypot(goal[0] - p[0], goal[1] - p[1])
                + grid.heading_weight * abs(float(wrap_angle(goal[2] - p[2]))))

    nodes = [SearchNode(start, None, 0.0, -1)]
    samples = [np.empty((0, 3))]
    best_g = {cell(start): 0.0}
    closed = set()
    heap = [(heuristic(start), 0)]
    goal_id = None
    while heap:
        _, nid = heapq.heappop(heap)
        node = nodes[nid]
        c = cell(node.pose)
        if c in closed:
            continue
        closed.add(c)
        if reached(node.pose):
            goal_id = nid
            break
        if len(nodes) >= grid.max_nodes:
            break
        x0, y0, th0 = node.pose
        c0, s0 = math.cos(th0), math.sin(th0)
        arcs = np.empty_like(local)
        arcs[..., 0] = x0 + c0 * local[..., 0] - s0 * local[..., 1]
        arcs[..., 1] = y0 + s0 * local[..., 0] + c0 * local[..., 1]
        arcs[..., 2] = th0 + local[..., 2]
        free = checker.free(arcs).all(axis=1)
        for (d, k), arc, ok in zip(prims, arcs, free):
            if not ok:
                continue
            end = (float(arc[-1, 0]), float(arc[-1, 1]), float(arc[-1, 2]))
            cend = cell(end)
            if cend in closed:
                continue
            direction = FORWARD if d > 0 else BACKWARD
            g = node.g_cost + grid.step
            if node.direction is not None and node.direction != direction:
                g += grid.switch_penalty
            g += grid.steer_change_penalty * abs(k - node.kappa) / kappa_max
            if g >= best_g.get(cend, math.inf):
                continue
            best_g[cend] = g
            nodes.append(SearchNode(end, direction, g, nid, k))
            samples.append(arc)
            heapq.heappush(heap, (g + heuristic(end), len(nodes) - 1))
    if goal_id is None:
        raise PlannerFailure(f"no path found after expanding {len(closed)} cells ({len(nodes)} nodes)")
    log.info("seed search: %d nodes, %d expanded, cost %.2f", len(nodes), len(closed), nodes[goal_id].g_cost)
    return _extract(nodes, samples, goal_id, start)


def _extract(nodes, samples, goal_id, start) -> LabeledPath:
    chain = []
    i = goal_id
    while i > 0:
        chain.append(i)
        i = nodes[i].parent
    chain.reverse()
    segments = []
    poses = [np.array([start])]
    current = nodes[chain[0]].direction
    for i in chain:
        node = nodes[i]
        if node.direction != current:
            segments.append(PathSegment(np.vstack(poses), current))
            poses = [poses[-1][-1:]]
            current = node.direction
        poses.append(samples[i])
    segments.append(PathSegment(np.vstack(poses), current))
    return LabeledPath(segments)

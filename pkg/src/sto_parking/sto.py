"""Segmented trajectory optimization.

A labelled geometric path (one entry per driving direction) is turned into a
timed reference with a trapezoidal speed plan, then refined by sequential
quadratic programming. Each iteration rebuilds the safety corridor around the
current reference, linearizes the Euler-discretized bicycle model and the
footprint corners, solves the resulting convex QP, and stops once a
fourth-order Runge-Kutta rollout of the solution's controls agrees with the
solution's own states to within the feasibility tolerance.

Curvature is left free across gear shifts; ``mode="baseline"`` additionally
ties the curvature on both sides of every shift together.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import qp as qpsolve
from .corridor import Corridor, CorridorInfeasibleError, build_corridor
from .geom2d import BufferedObstacle
from .gjk import GJKNonConvergence
from .vehicle import VehicleGeometry, corner_jacobians, eval_feasibility_error, step_jacobians

log = logging.getLogger(__name__)

FORWARD, BACKWARD = "forward", "backward"
STO, BASELINE = "sto", "baseline"

CONVERGED = "converged"
MAX_ITER = "max_iter"
QP_INFEASIBLE = "qp_infeasible"
CORRIDOR_INFEASIBLE = "corridor_infeasible"

NX, NU = 5, 2
POINT = NX + 1  # state plus one slack


class AssemblyError(ValueError):
    pass


def _check_direction(direction: str) -> str:
    if direction not in (FORWARD, BACKWARD):
        raise ValueError(f"direction must be '{FORWARD}' or '{BACKWARD}', got {direction!r}")
    return direction


@dataclass
class PathSegment:
    """Geometric poses ``(n, 3)`` driven in one direction."""

    poses: np.ndarray
    direction: str = FORWARD

    def __post_init__(self):
        self.poses = np.atleast_2d(np.asarray(self.poses, float))
        if self.poses.shape[1] != 3 or len(self.poses) < 1:
            raise ValueError(f"path poses must be (n, 3), got {self.poses.shape}")
        _check_direction(self.direction)

    @property
    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.poses[:, :2], axis=0), axis=1)))


@dataclass
class LabeledPath:
    segments: list[PathSegment]

    @property
    def directions(self) -> list[str]:
        return [s.direction for s in self.segments]

    @property
    def length(self) -> float:
        return sum(s.length for s in self.segments)


@dataclass
class Segment:
    states: np.ndarray
    controls: np.ndarray
    direction: str = FORWARD
    slack: np.ndarray | None = None

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, float))
        self.controls = np.asarray(self.controls, float).reshape(-1, NU)
        _check_direction(self.direction)
        if self.states.shape[1] != NX:
            raise ValueError("segment states must be (N, 5)")
        if len(self.states) < 2:
            raise ValueError("a segment needs at least two points")
        if len(self.controls) != len(self.states) - 1:
            raise ValueError("a segment needs N - 1 controls")

    @property
    def n(self) -> int:
        return len(self.states)


@dataclass
class SegmentedTrajectory:
    segments: list[Segment]
    timestep: float = 0.2

    def __post_init__(self):
        if not self.segments:
            raise ValueError("trajectory needs at least one segment")
        if not self.timestep > 0:
            raise ValueError("timestep must be positive")

    @property
    def directions(self) -> list[str]:
        return [s.direction for s in self.segments]

    @property
    def n_points(self) -> int:
        return sum(s.n for s in self.segments)

    def all_states(self) -> np.ndarray:
        return np.vstack([s.states for s in self.segments])

    def all_controls(self) -> np.ndarray:
        return np.vstack([s.controls for s in self.segments])


@dataclass
class StoParams:
    weights: tuple = (0.3, 0.3, 0.1, 1.8, 30.0, 10.0, 5.0, 100.0)
    kappa_max: float = 0.16
    a_max: float = 1.0
    psi_max: float = 0.03
    v_max: float = 3.0
    v_min: float = -3.0
    dp_max: tuple = (3.0, 3.0)
    dtheta_max: float = 0.175
    e_f: tuple = (0.01, 0.01, 0.01, 1e-4, 1e-4)
    max_iter: int = 10
    timestep: float = 0.2
    # linear slack penalty on top of the quadratic one; keeps corner containment exact when possible
    slack_linear_weight: float = 1e3
    # speed-plan limits for the initial reference; None means use a_max / v_max
    plan_accel: float | None = None
    plan_speed: float | None = None

    def __post_init__(self):
        self.weights = tuple(float(w) for w in self.weights)
        self.dp_max = tuple(float(d) for d in self.dp_max)
        self.e_f = tuple(float(e) for e in self.e_f)
        if len(self.weights) != 8 or any(w < 0 for w in self.weights):
            raise ValueError("need eight non-negative weights")
        if len(self.dp_max) != 2 or len(self.e_f) != 5:
            raise ValueError("dp_max has two entries and e_f five")
        positive = (self.kappa_max, self.a_max, self.psi_max, self.v_max, -self.v_min,
                    self.dtheta_max, self.timestep, *self.dp_max, *self.e_f)
        if any(not p > 0 for p in positive):
            raise ValueError("bounds, tolerances and timestep must be positive (v_min negative)")
        if self.slack_linear_weight < 0:
            raise ValueError("slack_linear_weight must be non-negative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        for name in ("plan_accel", "plan_speed"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def speed_limits(self) -> tuple[float, float]:
        accel = self.a_max if self.plan_accel is None else min(self.plan_accel, self.a_max)
        speed = min(self.v_max, -self.v_min)
        if self.plan_speed is not None:
            speed = min(self.plan_speed, speed)
        return accel, speed


@dataclass
class StoResult:
    trajectory: SegmentedTrajectory
    status: str
    iterations: int
    errors: list[np.ndarray] = field(default_factory=list)
    corridors: list[Corridor] = field(default_factory=list)
    reference: SegmentedTrajectory | None = None
    failed_iteration: int | None = None
    message: str = ""
    corridor_time: float = 0.0
    qp_time: float = 0.0
    qp_iterations: list[int] = field(default_factory=list)
    max_slack: float = 0.0

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def total_time(self) -> float:
        return self.corridor_time + self.qp_time


# --- reference generation -------------------------------------------------------------

def trapezoid_profile(length: float, accel: float, speed: float) -> tuple[float, float, float, float]:
    """``(t_accel, t_cruise, t_total, v_peak)`` of a rest-to-rest trapezoidal profile."""
    if length <= 0:
        return 0.0, 0.0, 0.0, 0.0
    if length >= speed * speed / accel:
        t_acc = speed / accel
        t_cru = (length - speed * speed / accel) / speed
        return t_acc, t_cru, 2 * t_acc + t_cru, speed
    v_peak = math.sqrt(length * accel)
    t_acc = v_peak / accel
    return t_acc, 0.0, 2 * t_acc, v_peak


def _profile_distance(t: np.ndarray, accel: float, t_acc: float, t_cru: float, v_peak: float) -> np.ndarray:
    t_dec0 = t_acc + t_cru
    s_acc = 0.5 * accel * t_acc ** 2
    out = np.where(t <= t_acc, 0.5 * accel * t ** 2, s_acc + v_peak * (t - t_acc))
    td = np.clip(t - t_dec0, 0.0, None)
    return np.where(t > t_dec0, s_acc + v_peak * t_cru + v_peak * td - 0.5 * accel * td ** 2, out)


def path_curvature(poses: np.ndarray, direction: str) -> np.ndarray:
    """Signed curvature at each pose from the circle through neighbouring points.

    The sign follows ``d theta / d s`` with ``s`` signed by the driving direction,
    so backward arcs keep the curvature that ``theta' = v kappa`` needs.
    """
    p = np.asarray(poses, float)[:, :2]
    n = len(p)
    k = np.zeros(n)
    if n < 3:
        return k
    a, b, c = p[:-2], p[1:-1], p[2:]
    ab, bc, ac = b - a, c - b, c - a
    cross = ab[:, 0] * bc[:, 1] - ab[:, 1] * bc[:, 0]
    denom = np.linalg.norm(ab, axis=1) * np.linalg.norm(bc, axis=1) * np.linalg.norm(ac, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = np.where(denom > 1e-12, 2.0 * cross / denom, 0.0)
    k[1:-1] = inner
    k[0], k[-1] = k[1], k[-2]
    return -k if direction == BACKWARD else k


def plan_simple_speed(path: LabeledPath, params: StoParams) -> SegmentedTrajectory:
    """Trapezoidal rest-to-rest speed plan resampled at the optimizer timestep."""
    T = params.timestep
    accel, speed = params.speed_limits
    segments = []
    for seg in path.segments:
        poses = seg.poses.copy()
        poses[:, 2] = np.unwrap(poses[:, 2])
        sign = 1.0 if seg.direction == FORWARD else -1.0
        ds = np.linalg.norm(np.diff(poses[:, :2], axis=0), axis=1)
        s = np.concatenate([[0.0], np.cumsum(ds)])
        length = float(s[-1])
        if length <= 1e-9:
            st = np.zeros((2, NX))
            st[:, :3] = poses[0]
            segments.append(Segment(st, np.zeros((1, NU)), seg.direction))
            continue
        kappa = path_curvature(poses, seg.direction)
        t_acc, t_cru, t_total, v_peak = trapezoid_profile(length, accel, speed)
        steps = max(2, math.ceil(t_total / T - 1e-9))
        stretch = t_total / (steps * T)
        tk = np.arange(steps + 1) * T * stretch
        sk = np.clip(_profile_distance(tk, accel, t_acc, t_cru, v_peak), 0.0, length)
        sk[-1] = length
        st = np.zeros((steps + 1, NX))
        # keep distinct sample positions for interpolation where the path has repeated points
        keep = np.concatenate([[True], ds > 1e-12])
        su, pu, ku = s[keep], poses[keep], kappa[keep]
        for j in range(3):
            st[:, j] = np.interp(sk, su, pu[:, j])
        st[:, 4] = np.interp(sk, su, ku)
        vk = np.diff(sk) / T
        st[:-1, 3] = sign * vk
        # forward-difference speeds reproduce the sampled positions under Euler; ends at rest
        st[0, 3] = 0.0
        st[-1, 3] = 0.0
        if steps >= 2:
            st[1:-1, 3] = sign * 0.5 * (vk[:-1] + vk[1:])
        ctrl = np.column_stack([np.diff(st[:, 3]) / T, np.diff(st[:, 4]) / T])
        segments.append(Segment(st, ctrl, seg.direction))
    return SegmentedTrajectory(segments, T)


# --- QP assembly ----------------------------------------------------------------------

@dataclass
class Layout:
    """Variable indexing: per segment ``[x0 s0 u0 x1 s1 u1 ... x_{N-1} s_{N-1}]``."""

    sizes: list[int]
    offsets: list[int] = field(init=False)
    n_vars: int = field(init=False)

    def __post_init__(self):
        self.offsets = []
        off = 0
        for n in self.sizes:
            self.offsets.append(off)
            off += POINT * n + NU * (n - 1)
        self.n_vars = off

    def state(self, i: int, k) -> np.ndarray:
        """Column indices ``(..., 5)`` of the state at point(s) ``k`` of segment ``i``."""
        k = np.asarray(k)
        return self.offsets[i] + (POINT + NU) * k[..., None] + np.arange(NX)

    def slack(self, i: int, k) -> np.ndarray:
        return self.offsets[i] + (POINT + NU) * np.asarray(k) + NX

    def control(self, i: int, k) -> np.ndarray:
        k = np.asarray(k)
        return self.offsets[i] + (POINT + NU) * k[..., None] + POINT + np.arange(NU)

    def unpack(self, z: np.ndarray, directions: Sequence[str], T: float) -> SegmentedTrajectory:
        segs = []
        for i, (n, d) in enumerate(zip(self.sizes, directions)):
            k = np.arange(n)
            segs.append(Segment(z[self.state(i, k)], z[self.control(i, k[:-1])], d, z[self.slack(i, k)]))
        return SegmentedTrajectory(segs, T)

    def pack(self, traj: SegmentedTrajectory) -> np.ndarray:
        z = np.zeros(self.n_vars)
        for i, seg in enumerate(traj.segments):
            k = np.arange(seg.n)
            z[self.state(i, k)] = seg.states
            z[self.control(i, k[:-1])] = seg.controls
            if seg.slack is not None:
                z[self.slack(i, k)] = seg.slack
        return z


class _Rows:
    """Accumulates sparse constraint rows as COO triplets."""

    def __init__(self):
        self.r, self.c, self.v = [], [], []
        self.lo, self.hi = [], []
        self.m = 0

    def add(self, cols, vals, lo, hi):
        """``cols``/``vals`` are ``(rows, width)``; ``lo``/``hi`` broadcast to ``rows``."""
        cols = np.atleast_2d(cols)
        vals = np.broadcast_to(np.atleast_2d(vals), cols.shape)
        rows = cols.shape[0]
        idx = np.arange(self.m, self.m + rows)
        self.r.append(np.repeat(idx, cols.shape[1]))
        self.c.append(cols.ravel())
        self.v.append(np.asarray(vals, float).ravel())
        self.lo.append(np.broadcast_to(np.asarray(lo, float), (rows,)))
        self.hi.append(np.broadcast_to(np.asarray(hi, float), (rows,)))
        self.m += rows

    def bound(self, cols, lo, hi):
        cols = np.asarray(cols).reshape(-1, 1)
        self.add(cols, np.ones_like(cols, dtype=float), lo, hi)

    def matrix(self, n):
        if not self.m:
            return sp.csr_matrix((0, n)), np.zeros(0), np.zeros(0)
        A = sp.csr_matrix((np.concatenate(self.v), (np.concatenate(self.r), np.concatenate(self.c))),
                          shape=(self.m, n))
        return A, np.concatenate(self.lo), np.concatenate(self.hi)


def _nearest_angle(target: float, reference: float) -> float:
    return target + 2 * math.pi * round((reference - target) / (2 * math.pi))


def unwrap_trajectory(traj: SegmentedTrajectory) -> SegmentedTrajectory:
    """Make headings continuous along the whole trajectory."""
    theta = np.unwrap(traj.all_states()[:, 2])
    out, pos = [], 0
    for seg in traj.segments:
        st = seg.states.copy()
        st[:, 2] = theta[pos:pos + seg.n]
        pos += seg.n
        out.append(replace(seg, states=st))
    return SegmentedTrajectory(out, traj.timestep)


@dataclass
class Subproblem:
    problem: qpsolve.QpProblem
    layout: Layout
    n_dynamics_rows: int
    n_corner_rows: int


def assemble_subproblem(ref: SegmentedTrajectory, corridor: Corridor | None, params: StoParams,
                        mode: str = STO, start=None, goal=None) -> Subproblem:
    """Linearize around ``ref`` and build the convex QP for one SQP iteration.

    ``start``/``goal`` default to the first/last reference pose; ``corridor``
    may be ``None`` to drop the footprint constraints entirely.
    """
    if mode not in (STO, BASELINE):
        raise AssemblyError(f"unknown mode {mode!r}")
    if corridor is not None:
        if len(corridor.regions) != len(ref.segments) or any(
                len(r) != s.n for r, s in zip(corridor.regions, ref.segments)):
            raise AssemblyError("corridor regions are not aligned with the reference points")
    T = params.timestep
    if abs(ref.timestep - T) > 1e-12:
        raise AssemblyError(f"reference timestep {ref.timestep} differs from params.timestep {T}")
    layout = Layout([s.n for s in ref.segments])
    n = layout.n_vars
    w1, w2, w3, w4, w5, w6, w7, w8 = params.weights
    M = len(ref.segments)

    hdiag = np.zeros(n)
    g = np.zeros(n)
    eq, ineq = _Rows(), _Rows()
    n_corner_rows = 0
    dth_box = params.dtheta_max
    dpx, dpy = params.dp_max

    for i, seg in enumerate(ref.segments):
        N = seg.n
        xr = seg.states
        k = np.arange(N)
        sidx = layout.state(i, k)
        cidx = layout.control(i, k[:-1])
        slk = layout.slack(i, k)

        for j, w in ((0, w1), (1, w2), (2, w3)):
            hdiag[sidx[:, j]] = 2 * w
            g[sidx[:, j]] = -2 * w * xr[:, j]
        hdiag[sidx[:, 3]] = 2 * w4
        hdiag[sidx[:, 4]] = 2 * w5
        hdiag[slk] = 2 * w6
        g[slk] = params.slack_linear_weight
        hdiag[cidx[:, 0]] = 2 * w7
        hdiag[cidx[:, 1]] = 2 * w8

        # linearized Euler dynamics: x_{k+1} - A x_k - B u_k = c
        if N > 1:
            Ak, Bk = step_jacobians(xr[:-1], T)
            nxt = xr[:-1] + T * np.column_stack([
                xr[:-1, 3] * np.cos(xr[:-1, 2]), xr[:-1, 3] * np.sin(xr[:-1, 2]),
                xr[:-1, 3] * xr[:-1, 4], np.zeros(N - 1), np.zeros(N - 1)])
            ck = nxt - np.einsum("kij,kj->ki", Ak, xr[:-1])
            for r in range(NX):
                cols = np.concatenate([sidx[1:, r:r + 1], sidx[:-1], cidx], axis=1)
                vals = np.concatenate([np.ones((N - 1, 1)), -Ak[:, r, :], -Bk[:, r, :]], axis=1)
                eq.add(cols, vals, ck[:, r], ck[:, r])

        # physical limits
        ineq.bound(sidx[:, 4], -params.kappa_max, params.kappa_max)
        if N > 1:
            ineq.bound(cidx[:, 0], -params.a_max, params.a_max)
            ineq.bound(cidx[:, 1], -params.psi_max, params.psi_max)
        # direction-consistent speed
        if seg.direction == FORWARD:
            ineq.bound(sidx[:, 3], 0.0, params.v_max)
        else:
            ineq.bound(sidx[:, 3], params.v_min, 0.0)
        # every maneuver starts and ends at rest
        eq.bound(sidx[[0, -1], 3], 0.0, 0.0)
        # proximity (trust region) around the reference
        ineq.bound(sidx[:, 0], xr[:, 0] - dpx, xr[:, 0] + dpx)
        ineq.bound(sidx[:, 1], xr[:, 1] - dpy, xr[:, 1] + dpy)
        ineq.bound(sidx[:, 2], xr[:, 2] - dth_box, xr[:, 2] + dth_box)
        ineq.bound(slk, 0.0, np.inf)

        # footprint corners stay inside the region, relaxed by the point's slack
        if corridor is not None:
            dth, const = corner_jacobians(xr, _geom_of(corridor))
            for kk in range(N):
                reg = corridor.regions[i][kk]
                Ah, bh = reg.A, reg.b
                if not len(bh):
                    continue
                for c in range(4):
                    coef_th = Ah @ dth[kk, c]
                    rhs = bh - Ah @ const[kk, c]
                    cols = np.column_stack([np.full(len(bh), sidx[kk, 0]), np.full(len(bh), sidx[kk, 1]),
                                            np.full(len(bh), sidx[kk, 2]), np.full(len(bh), slk[kk])])
                    vals = np.column_stack([Ah[:, 0], Ah[:, 1], coef_th, -np.ones(len(bh))])
                    ineq.add(cols, vals, -np.inf, rhs)
                    n_corner_rows += len(bh)

    # boundary poses
    first, last = ref.segments[0].states[0], ref.segments[-1].states[-1]
    s0 = np.asarray(first[:3] if start is None else start, float)[:3].copy()
    sf = np.asarray(last[:3] if goal is None else goal, float)[:3].copy()
    s0[2] = _nearest_angle(s0[2], first[2])
    sf[2] = _nearest_angle(sf[2], last[2])
    eq.bound(layout.state(0, 0)[:3], s0, s0)
    eq.bound(layout.state(M - 1, ref.segments[-1].n - 1)[:3], sf, sf)

    # gear shifts: pose continuity; curvature only tied in baseline mode
    for i in range(M - 1):
        a_end = layout.state(i, ref.segments[i].n - 1)
        b_start = layout.state(i + 1, 0)
        tied = 3 if mode == STO else 5
        for j in range(tied):
            if j == 3:
                continue
            eq.add(np.array([[b_start[j], a_end[j]]]), np.array([[1.0, -1.0]]), 0.0, 0.0)

    A_eq, b_eq, _ = eq.matrix(n)
    A_in, l_in, u_in = ineq.matrix(n)
    problem = qpsolve.QpProblem(H=sp.diags(hdiag, format="csc"), g=g, A_eq=A_eq, b_eq=b_eq,
                                A_in=A_in, l_in=l_in, u_in=u_in)
    n_dyn = sum(NX * (s.n - 1) for s in ref.segments)
    return Subproblem(problem, layout, n_dyn, n_corner_rows)


def _geom_of(corridor: Corridor) -> VehicleGeometry:
    geom = getattr(corridor, "vehicle", None)
    if geom is None:
        raise AssemblyError("corridor carries no vehicle geometry")
    return geom


# --- SQP driver -----------------------------------------------------------------------

def optimize(path: LabeledPath, obstacles: Sequence[BufferedObstacle], veh: VehicleGeometry,
             params: StoParams | None = None, mode: str = STO, start=None, goal=None,
             qp_settings: qpsolve.QpSettings | None = None,
             keep_corridors: bool = False) -> StoResult:
    """Refine ``path`` into a dynamically feasible, corridor-safe trajectory."""
    params = params or StoParams()
    ref = unwrap_trajectory(plan_simple_speed(path, params))
    initial_ref = ref
    e_f = np.asarray(params.e_f)
    errors, corridors, qp_iters = [], [], []
    t_corr = t_qp = 0.0
    warm = None
    traj = ref
    last_slack = 0.0
    for it in range(1, params.max_iter + 1):
        t0 = time.perf_counter()
        try:
            corridor = build_corridor(ref, veh, obstacles, params.dp_max)
        except (CorridorInfeasibleError, GJKNonConvergence) as exc:
            t_corr += time.perf_counter() - t0
            return StoResult(traj, CORRIDOR_INFEASIBLE, it, errors, corridors, initial_ref, it, str(exc),
                             t_corr, t_qp, qp_iters)
        t_corr += time.perf_counter() - t0
        if keep_corridors:
            corridors.append(corridor)

        t0 = time.perf_counter()
        sub = assemble_subproblem(ref, corridor, params, mode, start, goal)
        sol = qpsolve.solve(sub.problem, warm_start=warm, settings=qp_settings)
        t_qp += time.perf_counter() - t0
        qp_iters.append(sol.iterations)
        log.info("sqp %d: qp %s in %d iterations (%.1f ms)", it, sol.status, sol.iterations,
                 1e3 * (time.perf_counter() - t0))
        if sol.status == qpsolve.INFEASIBLE:
            return StoResult(traj, QP_INFEASIBLE, it, errors, corridors, initial_ref, it,
                             "QP subproblem infeasible", t_corr, t_qp, qp_iters)
        if sol.status != qpsolve.OPTIMAL:
            log.warning("sqp %d: QP stopped with status %s (residuals %.2e / %.2e)", it, sol.status,
                        sol.primal_residual, sol.dual_residual)
        warm = sol.primal
        traj = sub.layout.unpack(sol.primal, ref.directions, params.timestep)
        last_slack = float(max(np.max(s.slack) for s in traj.segments))
        err = eval_feasibility_error(traj)
        errors.append(err)
        log.info("sqp %d: rk4 error %s, max slack %.3e", it, np.array2string(err, precision=3), last_slack)
        if np.all(err < e_f):
            return StoResult(traj, CONVERGED, it, errors, corridors, initial_ref, None, "",
                             t_corr, t_qp, qp_iters, last_slack)
        ref = traj
    return StoResult(traj, MAX_ITER, params.max_iter, errors, corridors, initial_ref, None,
                     "iteration cap reached", t_corr, t_qp, qp_iters, last_slack)


def path_length(traj) -> float:
    """Summed Euclidean length of the rear-axle polyline of every segment."""
    total = 0.0
    for seg in traj.segments:
        pts = np.asarray(seg.states if hasattr(seg, "states") else seg.poses, float)[:, :2]
        total += float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
    return total


def curvature_jumps(traj: SegmentedTrajectory) -> list[float]:
    """``|kappa_0^(i+1) - kappa_end^(i)|`` at every gear shift."""
    return [abs(float(b.states[0, 4] - a.states[-1, 4])) for a, b in zip(traj.segments, traj.segments[1:])]

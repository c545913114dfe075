"""Kinematic bicycle model in curvature form, vehicle footprint, and linearizations.

State ``[x, y, theta, v, kappa]`` sits at the rear-axle centre; control is
``[a, psi]`` (acceleration, curvature rate). All step functions accept either
single vectors or stacked ``(..., 5)`` / ``(..., 2)`` arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geom2d import Polygon

X, Y, THETA, V, KAPPA = range(5)
A_IDX, PSI = range(2)
CORNER_NAMES = ("FL", "FR", "RL", "RR")


class State(NamedTuple):
    x: float
    y: float
    theta: float
    v: float = 0.0
    kappa: float = 0.0


class Control(NamedTuple):
    a: float = 0.0
    psi: float = 0.0


@dataclass(frozen=True)
class VehicleGeometry:
    L_f: float = 3.89
    L_r: float = 1.043
    W: float = 1.87

    def __post_init__(self):
        if not (self.L_f > 0 and self.L_r > 0 and self.W > 0):
            raise ValueError(f"vehicle dimensions must be positive: {self}")
        if not self.L_f > self.L_r:
            raise ValueError("front overhang L_f must exceed rear overhang L_r")

    @property
    def length(self) -> float:
        return self.L_f + self.L_r

    @property
    def center_offset(self) -> float:
        """Distance from the rear axle to the geometric centre, along the heading."""
        return 0.5 * (self.L_f - self.L_r)

    @property
    def reach(self) -> float:
        """Largest distance from the rear axle to any corner."""
        return math.hypot(self.L_f, 0.5 * self.W)

    def local_corners(self) -> np.ndarray:
        hw = 0.5 * self.W
        return np.array([[self.L_f, hw], [self.L_f, -hw], [-self.L_r, hw], [-self.L_r, -hw]])

    def center(self, state) -> np.ndarray:
        s = np.asarray(state, float)
        off = self.center_offset
        return np.array([s[0] + off * math.cos(s[2]), s[1] + off * math.sin(s[2])])

    def footprint(self, state) -> Polygon:
        s = np.asarray(state, float)
        return Polygon.rectangle(self.center(s), float(s[2]), self.length, self.W)


def corners(state, geom: VehicleGeometry) -> np.ndarray:
    """Corner positions ``(..., 4, 2)`` in FL, FR, RL, RR order."""
    s = np.asarray(state, float)
    c, sn = np.cos(s[..., 2]), np.sin(s[..., 2])
    loc = geom.local_corners()
    cx = s[..., 0, None] + c[..., None] * loc[:, 0] - sn[..., None] * loc[:, 1]
    cy = s[..., 1, None] + sn[..., None] * loc[:, 0] + c[..., None] * loc[:, 1]
    return np.stack([cx, cy], axis=-1)


def dynamics(state, control) -> np.ndarray:
    s = np.asarray(state, float)
    u = np.asarray(control, float)
    th, v, k = s[..., 2], s[..., 3], s[..., 4]
    return np.stack([v * np.cos(th), v * np.sin(th), v * k, u[..., 0], u[..., 1]], axis=-1)


def euler_step(state, control, T: float) -> np.ndarray:
    if not T > 0:
        raise ValueError("timestep must be positive")
    s = np.asarray(state, float)
    return s + T * dynamics(s, control)


def rk4_step(state, control, T: float) -> np.ndarray:
    """Classical RK4 over one step with the control held constant."""
    if not T > 0:
        raise ValueError("timestep must be positive")
    s = np.asarray(state, float)
    k1 = dynamics(s, control)
    k2 = dynamics(s + 0.5 * T * k1, control)
    k3 = dynamics(s + 0.5 * T * k2, control)
    k4 = dynamics(s + T * k3, control)
    return s + (T / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass(frozen=True)
class LinearizedStep:
    """``x_next ~= A @ x + B @ u + c`` around a reference point."""

    A: np.ndarray
    B: np.ndarray
    c: np.ndarray

    def __call__(self, state, control) -> np.ndarray:
        return self.A @ np.asarray(state, float) + self.B @ np.asarray(control, float) + self.c


def step_jacobians(ref_states, T: float) -> tuple[np.ndarray, np.ndarray]:
    """Stacked Euler-step Jacobians ``(n, 5, 5)`` and ``(n, 5, 2)``."""
    s = np.atleast_2d(np.asarray(ref_states, float))
    n = len(s)
    th, v, k = s[:, 2], s[:, 3], s[:, 4]
    c, sn = np.cos(th), np.sin(th)
    A = np.tile(np.eye(5), (n, 1, 1))
    A[:, X, THETA] = -v * T * sn
    A[:, X, V] = T * c
    A[:, Y, THETA] = v * T * c
    A[:, Y, V] = T * sn
    A[:, THETA, V] = T * k
    A[:, THETA, KAPPA] = T * v
    B = np.zeros((n, 5, 2))
    B[:, V, A_IDX] = T
    B[:, KAPPA, PSI] = T
    return A, B


def linearize_step(ref_state, ref_control, T: float) -> LinearizedStep:
    s = np.asarray(ref_state, float)
    u = np.asarray(ref_control, float)
    A, B = step_jacobians(s, T)
    A, B = A[0], B[0]
    c = euler_step(s, u, T) - A @ s - B @ u
    return LinearizedStep(A, B, c)


@dataclass(frozen=True)
class CornerLinearization:
    """``corner ~= jac @ [x, y, theta] + const``; exact at the reference heading."""

    jac: np.ndarray
    const: np.ndarray

    def __call__(self, pose) -> np.ndarray:
        return self.jac @ np.asarray(pose, float)[:3] + self.const


def corner_jacobians(ref_states, geom: VehicleGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Linearized corners for many references.

    Returns ``dtheta`` of shape ``(n, 4, 2)`` (corner derivative w.r.t. heading)
    and ``const`` of shape ``(n, 4, 2)`` such that
    ``corner = p + dtheta * theta + const`` to first order.
    """
    s = np.atleast_2d(np.asarray(ref_states, float))
    th = s[:, 2]
    c, sn = np.cos(th)[:, None], np.sin(th)[:, None]
    loc = geom.local_corners()
    off = np.stack([c * loc[:, 0] - sn * loc[:, 1], sn * loc[:, 0] + c * loc[:, 1]], axis=-1)
    dth = np.stack([-sn * loc[:, 0] - c * loc[:, 1], c * loc[:, 0] - sn * loc[:, 1]], axis=-1)
    const = off - dth * th[:, None, None]
    return dth, const


def linearize_corner(ref_state, geom: VehicleGeometry, which: str | int) -> CornerLinearization:
    idx = CORNER_NAMES.index(which) if isinstance(which, str) else int(which)
    dth, const = corner_jacobians(ref_state, geom)
    jac = np.zeros((2, 3))
    jac[:, :2] = np.eye(2)
    jac[:, 2] = dth[0, idx]
    return CornerLinearization(jac, const[0, idx])


def eval_feasibility_error(traj, T: float | None = None) -> np.ndarray:
    """Componentwise max of ``|rk4(x_k, u_k) - x_{k+1}|`` over every transition.

    ``traj`` is anything with ``segments`` whose items carry ``states`` (N, 5)
    and ``controls`` (N-1, 2); ``T`` defaults to ``traj.timestep``.
    """
    if T is None:
        T = traj.timestep
    err = np.zeros(5)
    for seg in traj.segments:
        xs = np.asarray(seg.states, float)
        us = np.asarray(seg.controls, float)
        if len(xs) < 2:
            continue
        if len(us) != len(xs) - 1:
            raise ValueError("segment needs one control per transition")
        e = np.abs(rk4_step(xs[:-1], us, T) - xs[1:])
        err = np.maximum(err, e.max(axis=0))
    return err

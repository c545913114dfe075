import math

import numpy as np
import pytest

from sto_parking.sto import Segment, SegmentedTrajectory
from sto_parking.vehicle import (CORNER_NAMES, VehicleGeometry, corner_jacobians, corners, euler_step,
                                 eval_feasibility_error, linearize_corner, linearize_step, rk4_step,
                                 step_jacobians)

VEH = VehicleGeometry(3.89, 1.043, 1.87)


def random_states(rng, n):
    return np.column_stack([rng.uniform(-10, 10, n), rng.uniform(-10, 10, n), rng.uniform(-np.pi, np.pi, n),
                            rng.uniform(-3, 3, n), rng.uniform(-0.16, 0.16, n)])


def fd_jacobian(f, x, h=1e-6):
    x = np.asarray(x, float)
    cols = []
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)


# --- geometry -----------------------------------------------------------------------------

def test_corners_at_origin():
    c = corners((0, 0, 0), VEH)
    np.testing.assert_allclose(c, [(3.89, 0.935), (3.89, -0.935), (-1.043, 0.935), (-1.043, -0.935)])


def test_corners_quarter_turn():
    c = corners((0, 0, math.pi / 2), VEH)
    np.testing.assert_allclose(c[0], (-0.935, 3.89), atol=1e-12)


def test_corner_rigid_body_distances():
    rng = np.random.default_rng(0)
    for s in random_states(rng, 100):
        fl, fr, rl, rr = corners(s, VEH)
        assert np.linalg.norm(fl - fr) == pytest.approx(VEH.W, abs=1e-12)
        assert np.linalg.norm(rl - rr) == pytest.approx(VEH.W, abs=1e-12)
        assert np.linalg.norm(fl - rl) == pytest.approx(VEH.length, abs=1e-12)
        assert np.linalg.norm(fl - rr) == pytest.approx(math.hypot(VEH.W, VEH.length), abs=1e-12)


def test_geometry_validation():
    with pytest.raises(ValueError):
        VehicleGeometry(1.0, 2.0, 1.0)
    with pytest.raises(ValueError):
        VehicleGeometry(3.0, 1.0, 0.0)


def test_centre_and_footprint():
    assert VEH.center_offset == pytest.approx(1.4235)
    fp = VEH.footprint((1.0, 2.0, 0.3))
    np.testing.assert_allclose(sorted(map(tuple, fp.vertices)), sorted(map(tuple, corners((1.0, 2.0, 0.3), VEH))),
                               atol=1e-12)


# --- integration ----------------------------------------------------------------------------

def test_euler_straight():
    out = euler_step((0, 0, 0, 1, 0), (0, 0), 0.2)
    np.testing.assert_allclose(out, (0.2, 0, 0, 1, 0))


def test_euler_at_rest():
    out = euler_step((1, 2, 0.5, 0, 0.1), (0.5, 0.02), 0.2)
    np.testing.assert_allclose(out, (1, 2, 0.5, 0.1, 0.104))


def test_euler_heading_rate():
    assert euler_step((0, 0, 0, 1, 0.1), (0, 0), 0.2)[2] == pytest.approx(0.02)


def test_rk4_straight_is_exact():
    out = rk4_step((1, -1, 0.3, 2.0, 0.0), (0, 0), 0.2)
    np.testing.assert_allclose(out[:2], (1 + 0.4 * math.cos(0.3), -1 + 0.4 * math.sin(0.3)), atol=1e-15)


def _arc(v, kappa, t):
    th = v * kappa * t
    return np.array([math.sin(th) / kappa, (1 - math.cos(th)) / kappa, th])


def test_rk4_arc_local_error_order():
    errs = []
    for T in (0.4, 0.2, 0.1, 0.05):
        out = rk4_step((0, 0, 0, 1.5, 0.16), (0, 0), T)
        errs.append(np.linalg.norm(out[:3] - _arc(1.5, 0.16, T)))
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert min(orders) > 4.5  # local error is O(T^5)


def test_rk4_global_order():
    def final(T, steps):
        s = np.array([0, 0, 0, 1.0, 0.1])
        for _ in range(steps):
            s = rk4_step(s, (0.1, 0.01), T)
        return s

    a, b, c = final(0.4, 10), final(0.2, 20), final(0.1, 40)
    order = math.log2(np.linalg.norm(a - b) / np.linalg.norm(b - c))
    assert order >= 3.9


def test_rk4_minus_euler_vanishes():
    s, u = (0, 0, 0.4, 1.2, 0.1), (0.5, 0.02)
    gaps = [np.linalg.norm(rk4_step(s, u, T) - euler_step(s, u, T)) for T in (1e-1, 1e-2, 1e-3)]
    assert gaps[2] < 1e-6 and gaps[0] > gaps[1] > gaps[2]


def test_nonpositive_timestep():
    with pytest.raises(ValueError):
        euler_step((0, 0, 0, 0, 0), (0, 0), 0.0)
    with pytest.raises(ValueError):
        rk4_step((0, 0, 0, 0, 0), (0, 0), -0.1)


# --- linearization ---------------------------------------------------------------------------

def test_step_jacobian_values():
    lin = linearize_step((0, 0, 0, 1, 0), (0, 0), 0.2)
    A = lin.A
    assert A[0, 3] == pytest.approx(0.2)
    assert A[0, 2] == pytest.approx(0.0)
    assert A[1, 2] == pytest.approx(0.2)
    assert A[2, 4] == pytest.approx(0.2)


def test_step_jacobian_sparsity():
    rng = np.random.default_rng(2)
    s = random_states(rng, 1)[0]
    A = linearize_step(s, (0.3, 0.01), 0.2).A
    off = A - np.eye(5)
    expected = {(0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (2, 4)}
    assert {tuple(i) for i in np.argwhere(off != 0)} <= expected


def test_step_jacobians_match_finite_differences():
    rng = np.random.default_rng(7)
    T = 0.2
    worst = 0.0
    for s, u in zip(random_states(rng, 100), rng.uniform(-1, 1, (100, 2))):
        lin = linearize_step(s, u, T)
        Ja = fd_jacobian(lambda x: euler_step(x, u, T), s)
        Jb = fd_jacobian(lambda w: euler_step(s, w, T), u)
        worst = max(worst, np.max(np.abs(Ja - lin.A)), np.max(np.abs(Jb - lin.B)))
    assert worst < 1e-6


def test_linearization_exact_at_reference():
    rng = np.random.default_rng(3)
    for s, u in zip(random_states(rng, 20), rng.uniform(-1, 1, (20, 2))):
        lin = linearize_step(s, u, 0.2)
        np.testing.assert_allclose(lin(s, u), euler_step(s, u, 0.2), atol=1e-12)


def test_batched_jacobians_equal_single():
    rng = np.random.default_rng(4)
    S = random_states(rng, 5)
    A, B = step_jacobians(S, 0.1)
    for k in range(5):
        lin = linearize_step(S[k], (0, 0), 0.1)
        np.testing.assert_array_equal(A[k], lin.A)
        np.testing.assert_array_equal(B[k], lin.B)


def test_corner_jacobian_at_zero_heading():
    lin = linearize_corner((0, 0, 0), VEH, "FL")
    assert lin.jac[0, 2] == pytest.approx(-VEH.W / 2)
    assert lin.jac[1, 2] == pytest.approx(VEH.L_f)


def test_corner_jacobians_match_finite_differences():
    rng = np.random.default_rng(5)
    worst = 0.0
    for s in random_states(rng, 100):
        for i, name in enumerate(CORNER_NAMES):
            lin = linearize_corner(s, VEH, name)
            J = fd_jacobian(lambda p: corners(p, VEH)[i], s[:3])
            worst = max(worst, np.max(np.abs(J - lin.jac)))
            np.testing.assert_allclose(lin(s), corners(s, VEH)[i], atol=1e-12)
    assert worst < 1e-6


def test_corner_linearization_error_bound():
    rng = np.random.default_rng(6)
    dmax = 0.175
    bound = 0.5 * (VEH.L_f + VEH.W / 2) * dmax ** 2
    for s in random_states(rng, 50):
        for i in range(4):
            lin = linearize_corner(s, VEH, i)
            for d in np.linspace(-dmax, dmax, 15):
                p = s[:3] + (0, 0, d)
                assert np.linalg.norm(lin(p) - corners(p, VEH)[i]) <= bound + 1e-12


def test_corner_jacobians_batched():
    rng = np.random.default_rng(1)
    S = random_states(rng, 4)
    dth, const = corner_jacobians(S, VEH)
    for k in range(4):
        np.testing.assert_allclose(S[k, :2] + dth[k] * S[k, 2] + const[k], corners(S[k], VEH), atol=1e-12)


# --- feasibility error ------------------------------------------------------------------------

def _rollout(step, s0, controls, T):
    xs = [np.asarray(s0, float)]
    for u in controls:
        xs.append(step(xs[-1], u, T))
    return np.array(xs)


def test_rk4_rollout_has_zero_error():
    rng = np.random.default_rng(0)
    u = rng.uniform(-0.5, 0.5, (30, 2)) * (1, 0.05)
    traj = SegmentedTrajectory([Segment(_rollout(rk4_step, (0, 0, 0, 1, 0), u, 0.2), u)], 0.2)
    assert np.max(eval_feasibility_error(traj)) < 1e-12


def test_euler_straight_rollout_has_zero_error():
    u = np.zeros((20, 2))
    traj = SegmentedTrajectory([Segment(_rollout(euler_step, (0, 0, 0.3, 1.5, 0), u, 0.2), u)], 0.2)
    assert np.max(eval_feasibility_error(traj)) < 1e-14


def test_euler_arc_error_shrinks_quadratically():
    errs = []
    for T in (0.2, 0.1, 0.05):
        n = int(round(2.0 / T))
        u = np.zeros((n, 2))
        traj = SegmentedTrajectory([Segment(_rollout(euler_step, (0, 0, 0, 1, 0.1), u, T), u)], T)
        errs.append(np.max(eval_feasibility_error(traj)))
    assert errs[0] > 0
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(3.5 < r < 4.5 for r in ratios)


def test_feasibility_error_takes_componentwise_max_across_segments():
    u = np.zeros((3, 2))
    a = Segment(_rollout(rk4_step, (0, 0, 0, 1, 0), u, 0.2), u)
    bad = _rollout(rk4_step, (0, 0, 0, -1, 0), u, 0.2)
    bad[-1, 4] += 0.5  # last point: no later transition reads it
    b = Segment(bad, u, "backward")
    err = eval_feasibility_error(SegmentedTrajectory([a, b], 0.2))
    assert err[4] == pytest.approx(0.5)
    assert np.all(err[:4] < 1e-12)

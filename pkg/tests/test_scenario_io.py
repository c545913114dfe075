import json
import math

import numpy as np
import pytest

from sto_parking.geom2d import Disk, EllipseShape, Polygon
from sto_parking.scenario_io import (BUILTIN_SCENARIOS, CSV_COLUMNS, ObstacleSpec, Scenario, ScenarioError,
                                     SeedSegment, builtin_scenario, load_scenario, load_scenario_file,
                                     read_trajectory_csv, resolve_scenario, save_result, save_scenario,
                                     trajectory_csv)
from sto_parking.seed_planner import GridSpec
from sto_parking.sto import StoParams
from sto_parking.vehicle import VehicleGeometry

MINIMAL = '{"start": [0, 0, 0], "goal": [1, 2, 0.5]}'


def test_perpendicular_fixture():
    sc = builtin_scenario("perpendicular")
    assert sc.start == (0.0, 0.0, 0.0)
    assert sc.goal == (-3.7, -3.7, -1.6)
    assert sc.obstacles and all(o.buffer == 0.2 for o in sc.obstacles)
    assert sc.vehicle == VehicleGeometry(3.89, 1.043, 1.87)
    assert sc.params.timestep == 0.1


def test_reverse_angled_fixture():
    sc = builtin_scenario("reverse_angled")
    assert sc.start == pytest.approx((0.0, 0.0, math.pi))
    assert sc.goal == pytest.approx((-6.0, 0.6, math.pi / 4))
    assert all(o.buffer == 0.2 for o in sc.obstacles)


def test_fixture_params():
    for name in BUILTIN_SCENARIOS:
        p = builtin_scenario(name).params
        assert p.weights == (0.3, 0.3, 0.1, 1.8, 30.0, 10.0, 5.0, 100.0)
        assert (p.kappa_max, p.a_max, p.psi_max, p.v_max) == (0.16, 1.0, 0.03, 3.0)
        assert p.dp_max == (3.0, 3.0) and p.dtheta_max == 0.175
        assert p.e_f == (0.01, 0.01, 0.01, 1e-4, 1e-4)


def test_unknown_builtin():
    with pytest.raises(KeyError):
        builtin_scenario("parallel")


def test_minimal_document_defaults():
    sc = load_scenario(MINIMAL)
    assert sc.obstacles == []
    assert sc.goal == (1.0, 2.0, 0.5)
    assert sc.params == StoParams()


def test_empty_obstacle_list():
    sc = load_scenario('{"start": [0, 0, 0], "goal": [1, 0, 0], "obstacles": []}')
    assert sc.buffered_obstacles() == []


def test_shapes_build():
    text = json.dumps({"start": [0, 0, 0], "goal": [0, 0, 0], "obstacles": [
        {"polygon": [[0, 0], [1, 0], [1, 1]], "buffer": 0.1},
        {"disk": {"c": [3, 3], "r": 0.5}, "buffer": 0.0},
        {"ellipse": {"center": [0, 5], "semi_axes": [2, 1], "rotation": 0.3}, "buffer": 0.2},
    ]})
    bases = [o.base for o in load_scenario(text).buffered_obstacles()]
    assert isinstance(bases[0], Polygon) and isinstance(bases[1], Disk) and isinstance(bases[2], EllipseShape)


def random_scenario(rng) -> Scenario:
    def num():
        return float(np.round(rng.uniform(-20, 20), int(rng.integers(0, 12))))

    obstacles = []
    for _ in range(int(rng.integers(0, 5))):
        kind = rng.integers(3)
        buf = float(rng.uniform(0, 1))
        if kind == 0:
            n = int(rng.integers(3, 7))
            ang = np.linspace(0, 2 * np.pi, n, endpoint=False) + rng.uniform(0, 1)
            c = rng.uniform(-10, 10, 2)
            pts = tuple((float(c[0] + math.cos(a)), float(c[1] + math.sin(a))) for a in ang)
            obstacles.append(ObstacleSpec("polygon", pts, buf, f"p{len(obstacles)}"))
        elif kind == 1:
            obstacles.append(ObstacleSpec("disk", ((num(), num()), float(rng.uniform(0.1, 3))), buf))
        else:
            obstacles.append(ObstacleSpec("ellipse", ((num(), num()), (float(rng.uniform(0.1, 3)),
                                                                       float(rng.uniform(0.1, 3))),
                                                      float(rng.uniform(-3, 3))), buf))
    seed = None
    if rng.random() < 0.5:
        seed = tuple(SeedSegment(d, tuple((num(), num(), num()) for _ in range(int(rng.integers(1, 4)))))
                     for d in ("forward", "backward")[:int(rng.integers(1, 3))])
    lr = float(rng.uniform(0.5, 1.5))
    return Scenario(
        name=f"s{rng.integers(1000)}",
        vehicle=VehicleGeometry(lr + float(rng.uniform(0.5, 3)), lr, float(rng.uniform(1, 2.5))),
        obstacles=obstacles,
        start=(num(), num(), num()),
        goal=(num(), num(), num()),
        params=StoParams(weights=tuple(float(w) for w in rng.uniform(0, 50, 8)), kappa_max=float(rng.uniform(0.05, 0.3)),
                         max_iter=int(rng.integers(1, 20)), timestep=float(rng.choice([0.05, 0.1, 0.2])),
                         plan_accel=None if rng.random() < 0.5 else float(rng.uniform(0.1, 1))),
        planner=GridSpec(step=float(rng.uniform(0.1, 1)), max_nodes=int(rng.integers(100, 10**6))),
        seed_path=seed,
        description="" if rng.random() < 0.5 else "random scenario",
    )


def test_round_trip_random_scenarios():
    rng = np.random.default_rng(0)
    for _ in range(100):
        sc = random_scenario(rng)
        text = save_scenario(sc)
        back = load_scenario(text)
        assert back == sc
        assert save_scenario(back) == text


def test_fixture_round_trip():
    for name in BUILTIN_SCENARIOS:
        sc = builtin_scenario(name)
        assert load_scenario(save_scenario(sc)) == sc


def test_file_and_resolve(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(MINIMAL)
    assert load_scenario_file(p).goal == (1.0, 2.0, 0.5)
    assert resolve_scenario(str(p)).goal == (1.0, 2.0, 0.5)
    assert resolve_scenario("perpendicular").name == "perpendicular"


# --- errors --------------------------------------------------------------------------------

def _error(text) -> ScenarioError:
    with pytest.raises(ScenarioError) as info:
        load_scenario(text)
    return info.value


def test_parse_error_position():
    err = _error('{\n  "start": [0, 0, 0],\n  "goal": [1, 2 0]\n}')
    assert err.kind == "parse"
    assert (err.line, err.column) == (3, 17)  # the stray "0"


def test_missing_field():
    err = _error('{\n  "start": [0, 0, 0]\n}')
    assert err.kind == "missing"
    assert "goal" in str(err)
    assert err.line == 1


def test_unknown_field_position():
    err = _error('{\n  "start": [0, 0, 0],\n  "goal": [0, 0, 0],\n  "colour": "red"\n}')
    assert err.kind == "unknown"
    assert (err.line, err.column) == (4, 3)


def test_unknown_nested_field():
    err = _error('{"start": [0, 0, 0], "goal": [0, 0, 0], "params": {"kapa_max": 0.1}}')
    assert err.kind == "unknown" and "kapa_max" in str(err)
    assert err.line == 1 and err.column is not None


def test_negative_buffer():
    text = '{"start": [0, 0, 0], "goal": [0, 0, 0],\n "obstacles": [{"disk": {"c": [0, 0], "r": 1}, "buffer": -0.2}]}'
    err = _error(text)
    assert err.kind == "semantic"
    assert err.line == 2


@pytest.mark.parametrize("text", [
    '{"start": [0, 0], "goal": [0, 0, 0]}',
    '{"start": [0, 0, "a"], "goal": [0, 0, 0]}',
    '{"start": [0, 0, 0], "goal": [0, 0, 0], "vehicle": {"L_f": 1, "L_r": 2, "W": 1}}',
    '{"start": [0, 0, 0], "goal": [0, 0, 0], "obstacles": [{"disk": {"c": [0, 0], "r": 0}, "buffer": 0}]}',
    '{"start": [0, 0, 0], "goal": [0, 0, 0], "obstacles": [{"polygon": [[0, 0], [1, 1], [2, 2]], "buffer": 0}]}',
    '{"start": [0, 0, 0], "goal": [0, 0, 0], "obstacles": [{"buffer": 0}]}',
    '{"start": [0, 0, 0], "goal": [0, 0, 0], "params": {"weights": [1, 2]}}',
    '{"start": [0, 0, 0], "goal": [0, 0, 0], "seed_path": [{"direction": "sideways", "poses": [[0, 0, 0]]}]}',
    '[1, 2, 3]',
])
def test_semantic_errors_have_positions(text):
    err = _error(text)
    assert err.kind in ("semantic", "missing")
    assert err.line is not None and err.column is not None


def test_non_finite_rejected():
    err = _error('{"start": [0, 0, NaN], "goal": [0, 0, 0]}')
    assert err.line == 1


# --- results ---------------------------------------------------------------------------------

def test_csv_layout_and_round_trip(perpendicular_run):
    traj = perpendicular_run.results["sto"].trajectory
    text = trajectory_csv(traj)
    lines = text.splitlines()
    assert lines[0].split(",") == list(CSV_COLUMNS)
    assert len(lines) == 1 + traj.n_points
    back = read_trajectory_csv(text)
    assert back.directions == traj.directions
    assert back.timestep == pytest.approx(traj.timestep)
    for a, b in zip(traj.segments, back.segments):
        np.testing.assert_allclose(b.states, a.states, rtol=1e-8, atol=1e-9)
        np.testing.assert_allclose(b.controls, a.controls, rtol=1e-8, atol=1e-9)
    assert trajectory_csv(back) == text


def test_csv_time_is_continuous(perpendicular_run):
    traj = perpendicular_run.results["sto"].trajectory
    rows = trajectory_csv(traj).splitlines()[1:]
    t = np.array([float(r.split(",")[2]) for r in rows])
    assert np.all(np.diff(t) >= -1e-12)
    assert t[-1] == pytest.approx((traj.n_points - len(traj.segments)) * traj.timestep)


def test_report_contents(perpendicular_run):
    res = perpendicular_run.results["sto"]
    doc = json.loads(save_result(res))
    assert doc["status"] == "converged"
    assert doc["iterations"] == res.iterations
    assert doc["directions"] == res.trajectory.directions
    assert len(doc["feasibility_errors"]) == len(res.errors)
    assert "timings" in doc
    assert "timings" not in json.loads(save_result(res, timings=False))
    assert save_result(res, timings=False) == save_result(res, timings=False)

"""Shared fixtures, independent geometric oracles, and the acceptance summary hook."""
from __future__ import annotations

import math
import time

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from sto_parking import scenario_io
from sto_parking.geom2d import BufferedObstacle, Disk, EllipseShape, Polygon
from sto_parking.gjk import distance as gjk_distance
from sto_parking.seed_planner import plan_seed_path
from sto_parking.sto import BASELINE, STO, optimize

# --- oracles ---------------------------------------------------------------------------


def sample_boundary(shape, n: int = 10_000) -> np.ndarray:
    """Boundary points of a convex set taken through its support function at ``n`` angles."""
    t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return np.array([shape.support_xy(math.cos(a), math.sin(a)) for a in t])


def polyline_origin_distance(ring: np.ndarray) -> float:
    """Exact distance from the origin to a closed convex point loop, 0 if enclosed."""
    a = ring
    b = np.roll(ring, -1, axis=0)
    e = b - a
    ee = np.einsum("ij,ij->i", e, e)
    t = np.where(ee > 0, -np.einsum("ij,ij->i", a, e) / np.where(ee > 0, ee, 1.0), 0.0)
    q = a + np.clip(t, 0.0, 1.0)[:, None] * e
    d = float(np.min(np.linalg.norm(q, axis=1)))
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    if np.all(cross >= -1e-15):
        return 0.0
    return d


def oracle_distance(shape, n: int = 10_000) -> float:
    """Distance from the origin to ``shape`` by dense boundary sampling and projection."""
    return polyline_origin_distance(sample_boundary(shape, n))


def signed_distance(a, b) -> float:
    """Signed distance between two convex sets; negative means penetration.

    Disjoint pairs use GJK directly. Touching or overlapping pairs maximise
    the separation ``min_b <n, b> - max_a <n, a>`` over unit directions ``n``.
    """
    res = gjk_distance(a, b)
    if not res.contains_origin and res.distance > 1e-7:
        return res.distance

    def sep(t):
        c, s = math.cos(t), math.sin(t)
        ax, ay = a.support_xy(c, s)
        bx, by = b.support_xy(-c, -s)
        return (bx * c + by * s) - (ax * c + ay * s)

    grid = np.linspace(0.0, 2 * np.pi, 3600, endpoint=False)
    vals = np.array([sep(t) for t in grid])
    i = int(np.argmax(vals))
    step = grid[1] - grid[0]
    # refine in offset coordinates so the solver's relative tolerance stays tiny
    t0 = grid[i]
    r = minimize_scalar(lambda d: -sep(t0 + d), bounds=(-step, step), method="bounded",
                        options={"xatol": 1e-14})
    return max(float(vals[i]), -float(r.fun))


def random_polygon(rng, center=(0.0, 0.0), radius=1.0, n=None) -> Polygon:
    n = n or int(rng.integers(3, 9))
    while True:
        ang = np.sort(rng.uniform(0, 2 * np.pi, n))
        if np.min(np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))) < 0.15:
            continue
        r = radius * rng.uniform(0.5, 1.0, n)
        pts = np.column_stack([np.cos(ang) * r, np.sin(ang) * r]) + np.asarray(center)
        hull = _convex_hull(pts)
        if len(hull) >= 3:
            try:
                return Polygon(hull)
            except ValueError:
                continue


def _convex_hull(pts: np.ndarray) -> np.ndarray:
    """Monotone chain, counter-clockwise, collinear points dropped."""
    pts = sorted(map(tuple, pts))

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 1e-9:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 1e-9:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def random_shape(rng, center=(0.0, 0.0), size=1.0):
    kind = rng.integers(3)
    if kind == 0:
        return random_polygon(rng, center, size)
    if kind == 1:
        return Disk(center, size * rng.uniform(0.2, 1.0))
    return EllipseShape.from_axes(center, size * rng.uniform(0.2, 1.0, 2), rng.uniform(0, np.pi))


def random_buffered(rng, center=(0.0, 0.0), size=1.0) -> BufferedObstacle:
    return BufferedObstacle(random_shape(rng, center, size), float(rng.uniform(0.0, 0.5)))


def fista_box(H, g, lo, hi, iters: int = 200_000, tol: float = 1e-13) -> np.ndarray:
    """Accelerated projected gradient for ``min 0.5 x'Hx + g'x`` over a box, with restarts."""
    L = float(np.linalg.eigvalsh(H)[-1])
    x = np.clip(np.zeros(len(g)), lo, hi)
    y, t = x.copy(), 1.0
    for _ in range(iters):
        x_new = np.clip(y - (H @ y + g) / L, lo, hi)
        if np.max(np.abs(x_new - x)) < tol:
            return x_new
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        if (H @ x_new + g) @ (x_new - x) > 0:  # objective went up: restart momentum
            y, t = x_new.copy(), 1.0
        else:
            y = x_new + (t - 1) / t_new * (x_new - x)
            t = t_new
        x = x_new
    return x


def dual_oracle(H, g, A, l, u, iters: int = 200_000) -> tuple[np.ndarray, float]:
    """Solve a strictly convex QP with ``l <= Ax <= u`` through its box-constrained dual.

    The dual variable ``y`` has bounds ``y_i >= 0`` when only the upper side is
    finite, ``<= 0`` for lower only, free for equalities; two-sided rows are
    split into a pair. Returns the primal minimiser and the optimal value.
    """
    Hi = np.linalg.inv(H)
    rows, lo, hi, rhs = [], [], [], []
    for i in range(len(l)):
        if l[i] == u[i]:
            rows.append(A[i]); lo.append(-np.inf); hi.append(np.inf); rhs.append(u[i])
            continue
        if np.isfinite(u[i]):
            rows.append(A[i]); lo.append(0.0); hi.append(np.inf); rhs.append(u[i])
        if np.isfinite(l[i]):
            rows.append(-A[i]); lo.append(0.0); hi.append(np.inf); rhs.append(-l[i])
    G, rhs = np.array(rows), np.array(rhs)
    # dual: max_y -0.5 (g + G'y)' Hi (g + G'y) - rhs'y, i.e. min 0.5 y'Qy + c'y
    Q = G @ Hi @ G.T
    c = G @ Hi @ g + rhs
    y = fista_box(Q, c, np.array(lo), np.array(hi), iters)
    x = -Hi @ (g + G.T @ y)
    return x, -(0.5 * y @ Q @ y + c @ y) - 0.5 * g @ Hi @ g


def random_spd(rng, n, cond=100.0):
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return q @ np.diag(np.geomspace(1.0, cond, n)) @ q.T


# --- scenario runs shared across modules -----------------------------------------------

class ScenarioRun:
    def __init__(self, name: str):
        self.name = name
        self.scenario = scenario_io.builtin_scenario(name)
        self.obstacles = self.scenario.buffered_obstacles()
        t0 = time.perf_counter()
        self.seed = plan_seed_path(self.scenario.start, self.scenario.goal, self.obstacles,
                                   self.scenario.vehicle, self.scenario.planner, self.scenario.params.kappa_max)
        self.planner_time = time.perf_counter() - t0
        self.results = {}
        self.wall = {}
        for mode in (STO, BASELINE):
            t0 = time.perf_counter()
            self.results[mode] = optimize(self.seed, self.obstacles, self.scenario.vehicle, self.scenario.params,
                                          mode=mode, start=self.scenario.start, goal=self.scenario.goal,
                                          keep_corridors=True)
            self.wall[mode] = time.perf_counter() - t0


_RUNS: dict[str, ScenarioRun] = {}


def scenario_run(name: str) -> ScenarioRun:
    if name not in _RUNS:
        _RUNS[name] = ScenarioRun(name)
    return _RUNS[name]


@pytest.fixture(scope="session")
def perpendicular_run() -> ScenarioRun:
    return scenario_run("perpendicular")


@pytest.fixture(scope="session")
def reverse_run() -> ScenarioRun:
    return scenario_run("reverse_angled")


# --- acceptance summary ----------------------------------------------------------------

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when not in ("setup", "call"):
        return
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, {"title": title, "passed": True, "seen": False, "notes": []})
    if rep.failed:
        entry["passed"] = False
    if rep.when == "call":
        entry["seen"] = True
        entry["notes"].extend(f"{k}={v}" for k, v in item.user_properties)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        verdict = "PASS" if e["passed"] and e["seen"] else "FAIL"
        notes = f"  [{'; '.join(e['notes'])}]" if e["notes"] else ""
        terminalreporter.write_line(f"criterion {number:2d} {verdict}: {e['title']}{notes}")

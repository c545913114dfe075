"""Scenario files, run reports and trajectory CSV.

A scenario is one JSON document::

    {
      "name": "demo",
      "vehicle": {"L_f": 3.89, "L_r": 1.043, "W": 1.87},
      "start": [0, 0, 0],
      "goal": [-3.7, -3.7, -1.6],
      "obstacles": [
        {"polygon": [[0, 0], [1, 0], [1, 1]], "buffer": 0.2},
        {"disk": {"c": [4, 4], "r": 0.5}, "buffer": 0.2},
        {"ellipse": {"center": [0, 5], "semi_axes": [2, 1], "rotation": 0.3}, "buffer": 0.2}
      ],
      "params": {"timestep": 0.1},
      "planner": {"step": 0.3},
      "seed_path": [{"direction": "backward", "poses": [[0, 0, 0], [-0.1, 0, 0]]}]
    }

Angles are radians and lengths meters. ``params`` and ``planner`` accept any
field of :class:`StoParams` and :class:`GridSpec`; omitted fields keep their
defaults. Every error carries the line and column of the offending entry.
"""
from __future__ import annotations

import csv
import io
import json
import json.decoder
import json.scanner
import math
import re
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from typing import Any

import numpy as np

from .geom2d import BufferedObstacle, Disk, EllipseShape, Polygon
from .seed_planner import GridSpec
from .sto import BACKWARD, FORWARD, LabeledPath, PathSegment, SegmentedTrajectory, StoParams, StoResult
from .sto import curvature_jumps, path_length
from .vehicle import VehicleGeometry

BUILTIN_SCENARIOS = ("perpendicular", "reverse_angled")
CSV_COLUMNS = ("segment", "k", "t", "x", "y", "theta", "v", "kappa", "a", "psi", "sigma")
SHAPES = ("polygon", "disk", "ellipse")


class ScenarioError(ValueError):
    """Invalid scenario document; ``kind`` is ``parse``, ``missing``, ``unknown`` or ``semantic``."""

    def __init__(self, message: str, kind: str = "semantic", line: int | None = None,
                 column: int | None = None, where: str = ""):
        loc = f" at line {line}, column {column}" if line is not None else ""
        ctx = f" ({where})" if where else ""
        super().__init__(f"{message}{ctx}{loc}")
        self.kind = kind
        self.line = line
        self.column = column
        self.where = where


# --- position-aware JSON ----------------------------------------------------------------

class _Obj(dict):
    """Dict that remembers where it and each of its keys start in the source text."""

    start: int = 0
    keys_at: dict

    def __init__(self, pairs):
        super().__init__()
        self.keys_at = {}
        self._dup = None
        for k, v in pairs:
            if k in self and self._dup is None:
                self._dup = k
            self[k] = v


class _Arr(list):
    start: int = 0


class _Decoder(json.JSONDecoder):
    def __init__(self):
        super().__init__(object_pairs_hook=_Obj)

        def parse_object(s_and_end, *args, **kw):
            obj, end = json.decoder.JSONObject(s_and_end, *args, **kw)
            obj.start = s_and_end[1] - 1
            obj.keys_at = _key_offsets(s_and_end[0], obj.start, end)
            return obj, end

        def parse_array(s_and_end, scan_once, **kw):
            arr, end = json.decoder.JSONArray(s_and_end, scan_once, **kw)
            out = _Arr(arr)
            out.start = s_and_end[1] - 1
            return out, end

        self.parse_object = parse_object
        self.parse_array = parse_array
        self.scan_once = json.scanner.py_make_scanner(self)


def _key_offsets(text: str, start: int, end: int) -> dict:
    """Offsets of the top-level keys of the object spanning ``text[start:end]``."""
    out = {}
    depth = 0
    i = start
    expect_key = False
    while i < end:
        ch = text[i]
        if ch == '"':
            j = i + 1
            while text[j] != '"':
                j += 2 if text[j] == "\\" else 1
            if depth == 1 and expect_key:
                out.setdefault(json.loads(text[i:j + 1]), i)
                expect_key = False
            i = j + 1
            continue
        if ch in "{[":
            depth += 1
            expect_key = ch == "{" and depth == 1
        elif ch in "}]":
            depth -= 1
        elif ch == "," and depth == 1:
            expect_key = True
        i += 1
    return out


class _Ctx:
    """Reads typed values out of the decoded document and reports positions on failure."""

    def __init__(self, text: str):
        self.text = text

    def pos(self, offset: int) -> tuple[int, int]:
        line = self.text.count("\n", 0, offset) + 1
        col = offset - (self.text.rfind("\n", 0, offset) + 1) + 1
        return line, col

    def fail(self, message, node, where, kind="semantic", key=None):
        off = getattr(node, "start", 0)
        if key is not None and isinstance(node, _Obj):
            off = node.keys_at.get(key, off)
        line, col = self.pos(off)
        raise ScenarioError(message, kind, line, col, where)

    def obj(self, node, where, required=(), optional=()):
        if not isinstance(node, _Obj):
            self.fail("expected an object", node, where)
        if node._dup is not None:
            self.fail(f"duplicate field {node._dup!r}", node, where, key=node._dup)
        allowed = set(required) | set(optional)
        for k in node:
            if k not in allowed:
                self.fail(f"unknown field {k!r}", node, where, "unknown", key=k)
        for k in required:
            if k not in node:
                self.fail(f"missing required field {k!r}", node, where, "missing")
        return node

    def number(self, parent, key, where, lo=-math.inf, hi=math.inf, strict_lo=False, allow_none=False):
        v = parent[key]
        w = f"{where}.{key}" if where else key
        if v is None and allow_none:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.fail("expected a finite number", parent, w, key=key)
        if v < lo or (strict_lo and v <= lo) or v > hi:
            bound = f"> {lo}" if strict_lo else f">= {lo}"
            self.fail(f"value {v} out of range ({bound}, <= {hi})", parent, w, key=key)
        return float(v)

    def vector(self, parent, key, where, n=None, min_len=0):
        v = parent[key]
        w = f"{where}.{key}" if where else key
        if not isinstance(v, list):
            self.fail("expected a list of numbers", parent, w, key=key)
        if (n is not None and len(v) != n) or len(v) < min_len:
            want = n if n is not None else f"at least {min_len}"
            self.fail(f"expected {want} numbers, got {len(v)}", parent, w, key=key)
        for x in v:
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                self.fail("expected finite numbers", parent, w, key=key)
        return tuple(float(x) for x in v)

    def points(self, parent, key, where, dim, min_count=1):
        v = parent[key]
        w = f"{where}.{key}" if where else key
        if not isinstance(v, list) or len(v) < min_count:
            self.fail(f"expected a list of at least {min_count} points", parent, w, key=key)
        out = []
        for i, p in enumerate(v):
            if not isinstance(p, list) or len(p) != dim or any(
                    isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x) for x in p):
                self.fail(f"point {i} must be {dim} finite numbers", p if isinstance(p, _Arr) else parent,
                          f"{w}[{i}]", key=None if isinstance(p, _Arr) else key)
            out.append(tuple(float(x) for x in p))
        return tuple(out)


# --- scenario model ---------------------------------------------------------------------

@dataclass(frozen=True)
class ObstacleSpec:
    """One obstacle; ``data`` holds the shape parameters as plain tuples."""

    shape: str
    data: tuple
    buffer: float = 0.0
    name: str | None = None

    def build(self) -> BufferedObstacle:
        if self.shape == "polygon":
            base = Polygon(np.array(self.data))
        elif self.shape == "disk":
            (c, r) = self.data
            base = Disk(c, r)
        elif self.shape == "ellipse":
            center, axes, rot = self.data
            base = EllipseShape.from_axes(center, axes, rot)
        else:
            raise ValueError(f"unknown obstacle shape {self.shape!r}")
        return BufferedObstacle(base, self.buffer)

    def to_json(self) -> dict:
        out: dict[str, Any] = {}
        if self.name is not None:
            out["name"] = self.name
        if self.shape == "polygon":
            out["polygon"] = [list(p) for p in self.data]
        elif self.shape == "disk":
            out["disk"] = {"c": list(self.data[0]), "r": self.data[1]}
        else:
            out["ellipse"] = {"center": list(self.data[0]), "semi_axes": list(self.data[1]),
                              "rotation": self.data[2]}
        out["buffer"] = self.buffer
        return out


@dataclass(frozen=True)
class SeedSegment:
    direction: str
    poses: tuple


@dataclass
class Scenario:
    name: str = "scenario"
    vehicle: VehicleGeometry = field(default_factory=VehicleGeometry)
    obstacles: list[ObstacleSpec] = field(default_factory=list)
    start: tuple = (0.0, 0.0, 0.0)
    goal: tuple = (0.0, 0.0, 0.0)
    params: StoParams = field(default_factory=StoParams)
    planner: GridSpec = field(default_factory=GridSpec)
    seed_path: tuple[SeedSegment, ...] | None = None
    description: str = ""

    def buffered_obstacles(self) -> list[BufferedObstacle]:
        return [o.build() for o in self.obstacles]

    def labeled_seed_path(self) -> LabeledPath | None:
        if self.seed_path is None:
            return None
        return LabeledPath([PathSegment(np.array(s.poses), s.direction) for s in self.seed_path])


_PARAM_FIELDS = {f.name for f in fields(StoParams)}
_GRID_FIELDS = {f.name for f in fields(GridSpec)}
_VEC_PARAMS = {"weights": 8, "dp_max": 2, "e_f": 5}


def _parse_obstacle(ctx: _Ctx, node, where) -> ObstacleSpec:
    ctx.obj(node, where, optional=("name", "buffer") + SHAPES)
    present = [s for s in SHAPES if s in node]
    if len(present) != 1:
        ctx.fail("obstacle needs exactly one of polygon, disk, ellipse", node, where,
                 "missing" if not present else "semantic")
    shape = present[0]
    buffer = ctx.number(node, "buffer", where, lo=0.0) if "buffer" in node else 0.0
    name = node.get("name")
    if name is not None and not isinstance(name, str):
        ctx.fail("name must be a string", node, f"{where}.name", key="name")
    w = f"{where}.{shape}"
    if shape == "polygon":
        pts = ctx.points(node, "polygon", where, 2, min_count=3)
        try:
            Polygon(np.array(pts))
        except ValueError as exc:
            ctx.fail(f"invalid polygon: {exc}", node, w, key="polygon")
        data = pts
    elif shape == "disk":
        d = ctx.obj(node["disk"], w, required=("c", "r"))
        data = (ctx.vector(d, "c", w, 2), ctx.number(d, "r", w, lo=0.0, strict_lo=True))
    else:
        e = ctx.obj(node["ellipse"], w, required=("center", "semi_axes"), optional=("rotation",))
        axes = ctx.vector(e, "semi_axes", w, 2)
        if min(axes) <= 0:
            ctx.fail("semi_axes must be positive", e, f"{w}.semi_axes", key="semi_axes")
        rot = ctx.number(e, "rotation", w) if "rotation" in e else 0.0
        data = (ctx.vector(e, "center", w, 2), axes, rot)
    return ObstacleSpec(shape, data, buffer, name)


def _parse_params(ctx: _Ctx, node) -> StoParams:
    ctx.obj(node, "params", optional=tuple(_PARAM_FIELDS))
    kw = {}
    for k in node:
        if k in _VEC_PARAMS:
            kw[k] = ctx.vector(node, k, "params", _VEC_PARAMS[k])
        elif k == "max_iter":
            v = node[k]
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                ctx.fail("max_iter must be a positive integer", node, "params.max_iter", key=k)
            kw[k] = v
        else:
            kw[k] = ctx.number(node, k, "params", allow_none=k in ("plan_accel", "plan_speed"))
    try:
        return StoParams(**kw)
    except ValueError as exc:
        ctx.fail(str(exc), node, "params")


def _parse_planner(ctx: _Ctx, node) -> GridSpec:
    ctx.obj(node, "planner", optional=tuple(_GRID_FIELDS))
    kw = {}
    for k in node:
        if k == "max_nodes":
            v = node[k]
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                ctx.fail("max_nodes must be a positive integer", node, "planner.max_nodes", key=k)
            kw[k] = v
        else:
            kw[k] = ctx.number(node, k, "planner")
    try:
        return GridSpec(**kw)
    except ValueError as exc:
        ctx.fail(str(exc), node, "planner")


def load_scenario(text: str) -> Scenario:
    """Parse a scenario document.

    Raises:
        ScenarioError: with ``line``/``column`` of the problem.
    """
    try:
        root = _Decoder().decode(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(exc.msg, "parse", exc.lineno, exc.colno) from None
    ctx = _Ctx(text)
    ctx.obj(root, "", required=("start", "goal"),
            optional=("name", "description", "vehicle", "obstacles", "params", "planner", "seed_path"))
    sc = Scenario()
    for key in ("name", "description"):
        if key in root:
            if not isinstance(root[key], str):
                ctx.fail(f"{key} must be a string", root, key, key=key)
            setattr(sc, key, root[key])
    if "vehicle" in root:
        v = ctx.obj(root["vehicle"], "vehicle", optional=("L_f", "L_r", "W"))
        kw = {k: ctx.number(v, k, "vehicle", lo=0.0, strict_lo=True) for k in v}
        try:
            sc.vehicle = VehicleGeometry(**kw)
        except ValueError as exc:
            ctx.fail(str(exc), v, "vehicle")
    sc.start = ctx.vector(root, "start", "", 3)
    sc.goal = ctx.vector(root, "goal", "", 3)
    if "obstacles" in root:
        obs = root["obstacles"]
        if not isinstance(obs, list):
            ctx.fail("obstacles must be a list", root, "obstacles", key="obstacles")
        sc.obstacles = [_parse_obstacle(ctx, o, f"obstacles[{i}]") for i, o in enumerate(obs)]
    if "params" in root:
        sc.params = _parse_params(ctx, root["params"])
    if "planner" in root:
        sc.planner = _parse_planner(ctx, root["planner"])
    if "seed_path" in root and root["seed_path"] is not None:
        sp = root["seed_path"]
        if not isinstance(sp, list) or not sp:
            ctx.fail("seed_path must be a non-empty list of segments", root, "seed_path", key="seed_path")
        segs = []
        for i, s in enumerate(sp):
            w = f"seed_path[{i}]"
            ctx.obj(s, w, required=("direction", "poses"))
            if s["direction"] not in (FORWARD, BACKWARD):
                ctx.fail("direction must be 'forward' or 'backward'", s, f"{w}.direction", key="direction")
            segs.append(SeedSegment(s["direction"], ctx.points(s, "poses", w, 3)))
        sc.seed_path = tuple(segs)
    return sc


def _params_json(p: StoParams) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(p).items()}


_NUM_LIST = re.compile(r"\[\s*([-+0-9.eE]+(?:,\s*[-+0-9.eE]+)*)\s*\]")


def _dumps(doc) -> str:
    """Indented JSON with innermost numeric lists kept on one line."""
    text = json.dumps(doc, indent=2)
    return _NUM_LIST.sub(lambda m: "[" + ", ".join(x.strip() for x in m.group(1).split(",")) + "]", text) + "\n"


def save_scenario(sc: Scenario) -> str:
    doc: dict[str, Any] = {"name": sc.name}
    if sc.description:
        doc["description"] = sc.description
    doc["vehicle"] = asdict(sc.vehicle)
    doc["start"] = list(sc.start)
    doc["goal"] = list(sc.goal)
    doc["obstacles"] = [o.to_json() for o in sc.obstacles]
    doc["params"] = _params_json(sc.params)
    doc["planner"] = asdict(sc.planner)
    if sc.seed_path is not None:
        doc["seed_path"] = [{"direction": s.direction, "poses": [list(p) for p in s.poses]}
                            for s in sc.seed_path]
    return _dumps(doc)


def load_scenario_file(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return load_scenario(fh.read())


def builtin_scenario(name: str) -> Scenario:
    if name not in BUILTIN_SCENARIOS:
        raise KeyError(f"unknown built-in scenario {name!r}; choose from {', '.join(BUILTIN_SCENARIOS)}")
    text = resources.files("sto_parking").joinpath("fixtures", f"{name}.json").read_text(encoding="utf-8")
    return load_scenario(text)


def resolve_scenario(ref: str) -> Scenario:
    """A built-in name or a path to a scenario file."""
    if ref in BUILTIN_SCENARIOS:
        return builtin_scenario(ref)
    return load_scenario_file(ref)


# --- results ----------------------------------------------------------------------------

def _r(x, nd=9):
    return float(round(float(x), nd))


def result_summary(result: StoResult, timings: bool = True) -> dict:
    traj = result.trajectory
    out = {
        "status": result.status,
        "iterations": result.iterations,
        "failed_iteration": result.failed_iteration,
        "message": result.message,
        "feasibility_errors": [[_r(e, 12) for e in err] for err in result.errors],
        "path_length": _r(path_length(traj)),
        "reference_length": _r(path_length(result.reference)) if result.reference is not None else None,
        "segments": len(traj.segments),
        "directions": traj.directions,
        "points": traj.n_points,
        "timestep": traj.timestep,
        "curvature_jumps": [_r(j) for j in curvature_jumps(traj)],
        "max_slack": _r(result.max_slack, 12),
        "qp_iterations": list(result.qp_iterations),
    }
    if timings:
        out["timings"] = {"corridor_s": _r(result.corridor_time, 6), "qp_s": _r(result.qp_time, 6),
                          "total_s": _r(result.total_time, 6)}
    return out


def save_result(result: StoResult, timings: bool = True) -> str:
    """JSON run report."""
    return _dumps(result_summary(result, timings))


def trajectory_csv(traj: SegmentedTrajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    t0 = 0.0
    T = traj.timestep
    for i, seg in enumerate(traj.segments):
        slack = seg.slack if seg.slack is not None else np.zeros(seg.n)
        for k in range(seg.n):
            u = seg.controls[k] if k < seg.n - 1 else (0.0, 0.0)
            x, y, th, v, kap = seg.states[k]
            row = [i, k, t0 + k * T, x, y, th, v, kap, u[0], u[1], slack[k]]
            w.writerow([row[0], row[1]] + [f"{float(val):.9g}" for val in row[2:]])
        t0 += (seg.n - 1) * T
    return buf.getvalue()


def read_trajectory_csv(text: str, timestep: float | None = None,
                        directions: list[str] | None = None) -> SegmentedTrajectory:
    """Rebuild a trajectory from :func:`trajectory_csv` output (values at 9 significant digits)."""
    from .sto import Segment

    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty trajectory CSV")
    by_seg: dict[int, list] = {}
    for r in rows:
        by_seg.setdefault(int(r["segment"]), []).append(r)
    segs = []
    for i in sorted(by_seg):
        rs = by_seg[i]
        st = np.array([[float(r[c]) for c in ("x", "y", "theta", "v", "kappa")] for r in rs])
        u = np.array([[float(r["a"]), float(r["psi"])] for r in rs[:-1]])
        if directions is not None:
            d = directions[i]
        else:
            d = BACKWARD if np.sum(st[:, 3]) < 0 else FORWARD
        segs.append(Segment(st, u, d, np.array([float(r["sigma"]) for r in rs])))
    if timestep is None:
        ts = [float(r["t"]) for r in by_seg[min(by_seg)]]
        timestep = ts[1] - ts[0] if len(ts) > 1 else 0.1
    return SegmentedTrajectory(segs, timestep)


def corridor_json(corridors) -> str:
    """Dump of the per-iteration corridors (half-spaces and polygon vertices)."""
    doc = {"iterations": [c.to_dict() for c in corridors]}
    return json.dumps(doc, indent=1) + "\n"

"""Static SVG plots: scene with trajectory and corridor, and curvature profiles."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .geom2d import BufferedObstacle
from .sto import LabeledPath, SegmentedTrajectory
from .vehicle import VehicleGeometry

COLORS = {"forward": "#1f77b4", "backward": "#d62728"}


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


class _Canvas:
    def __init__(self, width: int, height: int):
        self.width, self.height = width, height
        self.items: list[str] = []

    def polyline(self, pts, stroke="#000", width=1.0, fill="none", dash=None, close=False, opacity=1.0):
        if len(pts) < 2:
            return
        d = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        tag = "polygon" if close else "polyline"
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(f'<{tag} points="{d}" fill="{fill}" stroke="{stroke}" stroke-width="{width}"'
                          f' fill-opacity="{opacity}"{extra}/>')

    def text(self, x, y, s, size=12, anchor="start"):
        self.items.append(f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" font-family="sans-serif"'
                          f' text-anchor="{anchor}">{s}</text>')

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}"'
                f' viewBox="0 0 {self.width} {self.height}">')
        return "\n".join([head, f'<rect width="{self.width}" height="{self.height}" fill="#fff"/>',
                          *self.items, "</svg>"]) + "\n"


def _outline(obs: BufferedObstacle, n: int = 72) -> np.ndarray:
    t = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    return np.array([obs.support_xy(np.cos(a), np.sin(a)) for a in t])


def scene_svg(obstacles: Sequence[BufferedObstacle], veh: VehicleGeometry, traj: SegmentedTrajectory | None = None,
              seed: LabeledPath | None = None, corridor=None, footprint_every: int = 10,
              size: int = 800, margin: float = 1.0) -> str:
    """Obstacles (base and buffered outline), seed path, corridor polygons and the trajectory."""
    outlines = [_outline(o) for o in obstacles]
    pts = [o for o in outlines]
    if traj is not None:
        pts.append(traj.all_states()[:, :2])
    if seed is not None:
        pts.extend(s.poses[:, :2] for s in seed.segments)
    allp = np.vstack(pts) if pts else np.zeros((1, 2))
    lo = allp.min(axis=0) - margin - veh.reach
    hi = allp.max(axis=0) + margin + veh.reach
    scale = size / float(max(hi - lo))
    w = int(round((hi[0] - lo[0]) * scale))
    h = int(round((hi[1] - lo[1]) * scale))
    cv = _Canvas(w, h)

    def px(p):
        p = np.atleast_2d(p)
        return np.column_stack([(p[:, 0] - lo[0]) * scale, (hi[1] - p[:, 1]) * scale])

    if corridor is not None:
        for seg in corridor.regions:
            for reg in seg:
                v = reg.vertices()
                if len(v) >= 3:
                    cv.polyline(px(v), stroke="#2ca02c", width=0.4, fill="#2ca02c", close=True, opacity=0.03)
    for o, ring in zip(obstacles, outlines):
        cv.polyline(px(ring), stroke="#555", width=1.0, fill="#bbb", close=True, opacity=0.4, dash="4,3")
        base = getattr(o.base, "vertices", None)
        if base is not None:
            cv.polyline(px(base), stroke="#333", width=1.2, fill="#777", close=True, opacity=0.8)
        else:
            cv.polyline(px(_outline(BufferedObstacle(o.base, 0.0))), stroke="#333", width=1.2, fill="#777",
                        close=True, opacity=0.8)
    if seed is not None:
        for s in seed.segments:
            cv.polyline(px(s.poses[:, :2]), stroke="#888", width=1.2, dash="6,4")
    if traj is not None:
        for seg in traj.segments:
            color = COLORS[seg.direction]
            cv.polyline(px(seg.states[:, :2]), stroke=color, width=2.0)
            idx = list(range(0, seg.n, max(1, footprint_every)))
            if idx[-1] != seg.n - 1:
                idx.append(seg.n - 1)
            for k in idx:
                cv.polyline(px(veh.footprint(seg.states[k]).vertices), stroke=color, width=0.6, close=True,
                            fill="none")
    cv.text(8, 16, "forward", 12)
    cv.polyline([(64, 12), (90, 12)], stroke=COLORS["forward"], width=2)
    cv.text(100, 16, "backward", 12)
    cv.polyline([(162, 12), (188, 12)], stroke=COLORS["backward"], width=2)
    return cv.render()


def profiles_svg(traj: SegmentedTrajectory, kappa_max: float, psi_max: float,
                 width: int = 800, height: int = 480) -> str:
    """Curvature and curvature rate against time, with bounds and gear shifts marked."""
    cv = _Canvas(width, height)
    T = traj.timestep
    left, right, gap = 60, 20, 40
    panel_h = (height - 3 * gap) / 2
    t_end = sum((s.n - 1) * T for s in traj.segments) or 1.0

    def panel(top, label, series, bound):
        lim = 1.2 * max(bound, max((np.max(np.abs(v)) for _, v, _ in series if len(v)), default=0.0), 1e-9)

        def xy(t, v):
            x = left + (np.asarray(t) / t_end) * (width - left - right)
            y = top + panel_h / 2 - np.asarray(v) / lim * (panel_h / 2)
            return np.column_stack([x, y])

        cv.polyline(xy([0, t_end, t_end, 0], [lim, lim, -lim, -lim]), stroke="#000", width=0.8, close=True)
        for b in (bound, -bound):
            cv.polyline(xy([0, t_end], [b, b]), stroke="#999", width=0.8, dash="5,4")
        cv.polyline(xy([0, t_end], [0, 0]), stroke="#ccc", width=0.6)
        for t, v, d in series:
            cv.polyline(xy(t, v), stroke=COLORS[d], width=1.6)
        cv.text(8, top + 12, label, 12)
        cv.text(left - 4, top + 10, _fmt(lim), 10, "end")
        cv.text(left - 4, top + panel_h, _fmt(-lim), 10, "end")
        return xy

    kap, psi = [], []
    t0 = 0.0
    shifts = []
    for seg in traj.segments:
        t = t0 + T * np.arange(seg.n)
        kap.append((t, seg.states[:, 4], seg.direction))
        # piecewise-constant control drawn as steps
        tt = np.repeat(t, 2)[1:-1]
        psi.append((tt, np.repeat(seg.controls[:, 1], 2), seg.direction))
        t0 = t[-1]
        shifts.append(t0)
    xy1 = panel(gap, "curvature [1/m]", kap, kappa_max)
    xy2 = panel(2 * gap + panel_h, "curvature rate [1/(m s)]", psi, psi_max)
    for t in shifts[:-1]:
        for xy, top in ((xy1, gap), (xy2, 2 * gap + panel_h)):
            x = xy([t], [0])[0, 0]
            cv.polyline([(x, top), (x, top + panel_h)], stroke="#2ca02c", width=0.8, dash="2,3")
    cv.text(width - right, height - 8, f"t [s], end {_fmt(t_end)}", 11, "end")
    return cv.render()

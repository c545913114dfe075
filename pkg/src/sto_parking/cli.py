"""Command-line front end.

``sto-park run`` optimizes one scenario in one or both modes and writes a
trajectory CSV per mode, a JSON report and optional SVG plots.
``sto-park compare`` runs both modes on the same seed path and adds a
comparison block to the report.

Exit codes: 0 converged, 2 usage, 3 scenario load failure, 4 seed planner
failure, 5 optimizer did not converge, 6 output directory not writable.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

from . import scenario_io, svg
from .scenario_io import Scenario, ScenarioError
from .seed_planner import PlannerFailure, plan_seed_path
from .sto import BASELINE, CONVERGED, STO, LabeledPath, StoResult, curvature_jumps, optimize, path_length

log = logging.getLogger("sto_parking")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_LOAD = 3
EXIT_PLANNER = 4
EXIT_OPTIMIZER = 5
EXIT_OUTPUT = 6


@dataclass
class RunConfig:
    scenario: str
    mode: str = STO
    out: str | None = None
    plot: bool = False
    use_seed_planner: bool = True
    timestep: float | None = None
    seed: int = 0
    timings: bool = True
    dump_corridors: bool = False

    def modes(self) -> list[str]:
        return [STO, BASELINE] if self.mode == "both" else [self.mode]


class RunError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def load(config: RunConfig) -> Scenario:
    try:
        sc = scenario_io.resolve_scenario(config.scenario)
    except (ScenarioError, KeyError) as exc:
        raise RunError(f"cannot load scenario {config.scenario!r}: {exc}", EXIT_LOAD) from exc
    except OSError as exc:
        raise RunError(f"cannot read scenario {config.scenario!r}: {exc.strerror or exc}", EXIT_LOAD) from exc
    if config.timestep is not None:
        try:
            sc.params = replace(sc.params, timestep=config.timestep)
        except ValueError as exc:
            raise RunError(f"invalid timestep: {exc}", EXIT_LOAD) from exc
    if not config.use_seed_planner and sc.seed_path is None:
        raise RunError("--no-seed-planner needs a scenario with a seed_path", EXIT_LOAD)
    return sc


def seed_path(sc: Scenario, use_planner: bool = True) -> tuple[LabeledPath, float]:
    """The initial path and the time spent finding it."""
    if not use_planner:
        return sc.labeled_seed_path(), 0.0
    t0 = time.perf_counter()
    try:
        path = plan_seed_path(sc.start, sc.goal, sc.buffered_obstacles(), sc.vehicle, sc.planner,
                              sc.params.kappa_max)
    except PlannerFailure as exc:
        raise RunError(f"seed planner failed: {exc}; supply a seed_path and use --no-seed-planner",
                       EXIT_PLANNER) from exc
    return path, time.perf_counter() - t0


def optimize_mode(sc: Scenario, path: LabeledPath, mode: str, keep_corridors: bool = False) -> StoResult:
    return optimize(path, sc.buffered_obstacles(), sc.vehicle, sc.params, mode=mode, start=sc.start,
                    goal=sc.goal, keep_corridors=keep_corridors)


def _comparison(results: dict[str, StoResult]) -> dict:
    ls = path_length(results[STO].trajectory)
    lb = path_length(results[BASELINE].trajectory)
    return {
        "sto_length": round(ls, 9),
        "baseline_length": round(lb, 9),
        "length_reduction_percent": round(100.0 * (lb - ls) / lb, 6) if lb > 0 else 0.0,
        "sto_iterations": results[STO].iterations,
        "baseline_iterations": results[BASELINE].iterations,
        "sto_curvature_jumps": [round(j, 9) for j in curvature_jumps(results[STO].trajectory)],
        "baseline_curvature_jumps": [round(j, 9) for j in curvature_jumps(results[BASELINE].trajectory)],
    }


def execute(config: RunConfig, compare_modes: bool = False) -> tuple[int, dict]:
    """Run the pipeline, write artifacts, and return ``(exit code, report)``."""
    sc = load(config)
    out = Path(config.out) if config.out else None
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise RunError(f"cannot create output directory {out}: {exc.strerror or exc}", EXIT_OUTPUT) from exc
        if not os.access(out, os.W_OK):
            raise RunError(f"output directory {out} is not writable", EXIT_OUTPUT)
    path, t_plan = seed_path(sc, config.use_seed_planner)
    modes = [STO, BASELINE] if compare_modes else config.modes()
    report = {
        "scenario": sc.name,
        "seed": config.seed,
        "timestep": sc.params.timestep,
        "seed_path": {"segments": len(path.segments), "directions": path.directions,
                      "length": round(path.length, 9), "source": "planner" if config.use_seed_planner else "scenario"},
        "modes": {},
    }
    if config.timings:
        report["seed_path"]["planner_s"] = round(t_plan, 6)
    results = {}
    for mode in modes:
        res = optimize_mode(sc, path, mode, keep_corridors=config.dump_corridors or config.plot)
        results[mode] = res
        report["modes"][mode] = scenario_io.result_summary(res, config.timings)
        log.info("%s: %s after %d iterations, length %.3f m", mode, res.status, res.iterations,
                 path_length(res.trajectory))
        if out is not None:
            (out / f"trajectory_{mode}.csv").write_text(scenario_io.trajectory_csv(res.trajectory))
            if config.dump_corridors:
                (out / f"corridor_{mode}.json").write_text(scenario_io.corridor_json(res.corridors))
            if config.plot:
                obstacles = sc.buffered_obstacles()
                corridor = res.corridors[-1] if res.corridors else None
                (out / f"scene_{mode}.svg").write_text(
                    svg.scene_svg(obstacles, sc.vehicle, res.trajectory, path, corridor))
                (out / f"profiles_{mode}.svg").write_text(
                    svg.profiles_svg(res.trajectory, sc.params.kappa_max, sc.params.psi_max))
    if STO in results and BASELINE in results:
        report["comparison"] = _comparison(results)
    if out is not None:
        (out / "report.json").write_text(scenario_io._dumps(report))
    ok = all(r.status == CONVERGED for r in results.values())
    return (EXIT_OK if ok else EXIT_OPTIMIZER), report


def run(config: RunConfig) -> tuple[int, dict]:
    return execute(config)


def compare(config: RunConfig) -> tuple[int, dict]:
    return execute(config, compare_modes=True)


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sto-park", description="Segmented trajectory optimization for parking.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "optimize a scenario"), ("compare", "run sto and baseline on one seed path")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--scenario", required=True,
                       help=f"scenario file or built-in name ({', '.join(scenario_io.BUILTIN_SCENARIOS)})")
        if name == "run":
            p.add_argument("--mode", choices=(STO, BASELINE, "both"), default=STO)
        p.add_argument("--out", help="output directory for CSV, report and plots")
        p.add_argument("--plot", action="store_true", help="write SVG plots")
        p.add_argument("--no-seed-planner", action="store_true", help="use the scenario's seed_path")
        p.add_argument("--timestep", type=_positive_float, help="override the scenario timestep [s]")
        p.add_argument("--seed", type=int, default=0, help="recorded in the report for reproducibility")
        p.add_argument("--dump-corridors", action="store_true", help="write per-iteration corridors")
        p.add_argument("--no-timings", action="store_true", help="omit wall-clock timings from the report")
    return parser


def main(argv=None) -> int:
    level = os.environ.get("STO_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    config = RunConfig(scenario=args.scenario, mode=getattr(args, "mode", "both"), out=args.out, plot=args.plot,
                       use_seed_planner=not args.no_seed_planner, timestep=args.timestep, seed=args.seed,
                       timings=not args.no_timings, dump_corridors=args.dump_corridors)
    try:
        code, report = execute(config, compare_modes=args.command == "compare")
    except RunError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    for mode, r in report["modes"].items():
        print(f"{mode}: {r['status']} in {r['iterations']} iterations, length {r['path_length']:.3f} m")
    if "comparison" in report:
        c = report["comparison"]
        print(f"sto is {c['length_reduction_percent']:.1f}% shorter than baseline")
    return code


if __name__ == "__main__":
    sys.exit(main())

"""``obstacle-mcf`` command line: run scenarios, compare the two flows, measure hulls, self-test."""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis as an
from . import scenarios
from .atw import SchemeConfig
from .config import ConfigError, ScenarioConfig, parse_config
from .geometry import extract_contour, mean_radius, sublevel_area
from .grid import GridError, write_contours
from .levelset import SolverConfig, SolverError, evolve, export_trajectory
from .output import OutputDir, write_pgm

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_SELFTEST = 0, 1, 2, 3


class Console:
    def __init__(self, quiet: bool):
        self.quiet = quiet

    def __call__(self, msg: str) -> None:
        if not self.quiet:
            print(msg, file=sys.stderr, flush=True)


def solver_config(cfg: ScenarioConfig) -> SolverConfig:
    s = cfg.values["solver"]
    return SolverConfig.uniform(s["t_end"], s["records"], eps=s["eps"], cfl=s["cfl"])


def scheme_config(cfg: ScenarioConfig) -> SchemeConfig:
    s = cfg.values["scheme"]
    return SchemeConfig(h=s["h"], gap_tol=s["gap_tol"], max_iters=s["max_iters"])


def _metrics_rows(scn: scenarios.Scenario, traj):
    center = scn.meta.get("center", (0.0, 0.0))
    exact = scn.name == "circle" and not np.any(scn.k.values)
    r0 = scn.meta.get("radius")
    lo, up = scn.lower.values, scn.upper.values
    header = ["t", "area", "contour_length", "mean_radius", "min_u_minus_lower", "min_upper_minus_u"]
    if exact:
        header += ["exact_radius", "radius_error_cells"]
    rows = []
    for t, f in traj:
        c = extract_contour(f, 0.0)
        mr = mean_radius(c, center)
        row = [f"{t:.6f}", sublevel_area(f, 0.0), c.length(), mr,
               float((f.values - lo).min()), float((up - f.values).min())]
        if exact:
            rr = r0 * r0 - 2 * t
            ex = math.sqrt(rr) if rr > 0 else 0.0
            err = abs(mr - ex) / scn.grid.hx if not math.isnan(mr) else float("nan")
            row += [ex, err]
        rows.append(row)
    return header, rows


def _emit_trajectory(out: OutputDir, scn, traj, previews: bool) -> None:
    out.add(export_trajectory(traj, out.path("trajectory")))
    scale = float(np.abs(traj.fields[0].values).max()) or 1.0
    for t, f in traj:
        out.add(write_contours(out.path(f"contours/c_t{t:.6f}.txt"), extract_contour(f, 0.0)))
        if previews:
            out.add(write_pgm(out.path(f"previews/u_t{t:.6f}.pgm"), f, scale))


def run_scenario(cfg: ScenarioConfig, say=print) -> int:
    try:
        scn = scenarios.build(cfg)
    except (ConfigError, GridError, ValueError) as exc:
        say(f"config error: {exc}")
        return EXIT_CONFIG
    out = OutputDir(cfg.out_dir)
    try:
        scfg = solver_config(cfg)
        say(f"{scn.name}: {scn.grid.nx}x{scn.grid.ny} nodes, t_end={scfg.t_end}, dt={scfg.dt(scn.grid):.3g}")
        traj = evolve(scn.u0, scn.obs, scn.k, scfg, progress=lambda t, T: say(f"  t = {t:.4f} / {T}"))
        _emit_trajectory(out, scn, traj, cfg.get("output", "previews"))
        header, rows = _metrics_rows(scn, traj)
        out.write_csv("metrics.csv", header, rows)
        if scn.name == "triangle_fattening":
            _fattening(out, cfg, scn, traj, scfg, say)
        if cfg.get("analysis", "order_check"):
            _order(out, cfg, scn, traj, scfg, say)
    except (SolverError, GridError, ValueError, RuntimeError) as exc:
        say(f"solver error: {exc}")
        out.fail(f"{type(exc).__name__}: {exc}")
        out.finish()
        return EXIT_SOLVER
    out.finish()
    return EXIT_OK


def _fattening(out, cfg, scn, traj, scfg, say) -> None:
    band = cfg.get("analysis", "band_cells") * scn.grid.hx
    free = scenarios.twin(scn)
    say("  obstacle-free twin run")
    free_traj = evolve(free.u0, free.obs, free.k, scfg)
    fat = an.fattening_metrics(traj, band)
    ref = an.fattening_metrics(free_traj, band)
    rows = [(f"{t:.6f}", a, s, b) for (t, a, s), (_, b, _) in zip(fat, ref)]
    out.write_csv("fattening_series.csv", ["t", "band_area", "sublevel_area", "free_band_area"], rows)
    tri = scn.meta["triangle_area"]
    thr = cfg.get("analysis", "fattening_threshold") * tri
    final, final_free = fat[-1][1], ref[-1][1]
    out.write_report("fattening_report.txt", [
        ("band", band),
        ("triangle_area", tri),
        ("threshold", thr),
        ("final_band_area", final),
        ("final_free_band_area", final_free),
        ("above_threshold", final >= thr),
        ("contrast_at_least_10", final >= 10 * final_free),
    ])


def _order(out, cfg, scn, traj, scfg, say) -> None:
    gap = cfg.get("analysis", "order_gap")
    say(f"  order check against u0 + {gap}")
    v0 = scn.u0.like(np.minimum(scn.u0.values + gap, scn.upper.values))
    other = evolve(v0, scn.obs, scn.k, scfg)
    rep = an.check_order(traj, other)
    init = float((v0.values - scn.u0.values).max())
    out.write_report("order_report.txt", [
        ("max_violation", rep.max_violation),
        ("worst_time", f"{rep.worst_time:.6f}"),
        ("worst_node", f"{rep.worst_node[0]} {rep.worst_node[1]}"),
        ("initial_gap", init),
        ("relative_violation", max(rep.max_violation, 0.0) / init if init > 0 else 0.0),
    ])


def compare_cmd(cfg: ScenarioConfig, h_list, say=print) -> int:
    h_list = list(h_list) if h_list is not None else list(cfg.get("scheme", "h_list"))
    if len(h_list) < 2:
        say("config error: compare needs at least two values of h")
        return EXIT_CONFIG
    if any(b >= a for a, b in zip(h_list, h_list[1:])):
        say("config error: h values must be strictly decreasing")
        return EXIT_CONFIG
    try:
        scn = scenarios.build(cfg)
    except (ConfigError, GridError, ValueError) as exc:
        say(f"config error: {exc}")
        return EXIT_CONFIG
    out = OutputDir(cfg.out_dir)
    try:
        table = an.scheme_consistency(
            scn.u0, scn.upper, h_list, solver_config(cfg), scheme_config(cfg), cfg.level_list(),
            lower_bound=float(scn.lower.values.min()),
            progress=lambda h, d: say(f"  h = {h}: sup distance {d:.4g} ({d / scn.grid.hx:.2f} cells)"),
        )
        out.write_text("consistency_table.csv", table.to_csv())
    except (SolverError, GridError, ValueError, RuntimeError) as exc:
        say(f"solver error: {exc}")
        out.fail(f"{type(exc).__name__}: {exc}")
        out.finish()
        return EXIT_SOLVER
    out.finish()
    return EXIT_OK


def hull_cmd(cfg: ScenarioConfig, say=print) -> int:
    if cfg.name != "disks_hull":
        say("config error: hull needs scenario disks_hull")
        return EXIT_CONFIG
    try:
        scn = scenarios.build(cfg)
    except (ConfigError, GridError, ValueError) as exc:
        say(f"config error: {exc}")
        return EXIT_CONFIG
    out = OutputDir(cfg.out_dir)
    geo = cfg.values["geometry"]
    try:
        rep = an.hull_compare(
            geo["disks"], scn.grid, solver_config(cfg), cfg.get("analysis", "steady_tol"), geo["margin"], geo["cap"]
        )
    except an.HullError as exc:
        out.write_text("hull_report.txt", exc.report.to_text())
        out.fail(str(exc))
        out.finish()
        say(f"solver error: {exc}")
        return EXIT_SOLVER
    except (SolverError, GridError, ValueError, RuntimeError) as exc:
        out.fail(f"{type(exc).__name__}: {exc}")
        out.finish()
        say(f"solver error: {exc}")
        return EXIT_SOLVER
    out.write_text("hull_report.txt", rep.to_text())
    say(f"  hausdorff {rep.hausdorff / rep.hx:.2f} cells, convexity defect {rep.convexity_defect:.3g}")
    out.finish()
    return EXIT_OK


def _h_list(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="obstacle-mcf", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, help="output directory (overrides [output] dir)")
    common.add_argument("--quiet", action="store_true", help="suppress progress lines")
    for name, text in (("run", "evolve a scenario and write its artifacts"),
                       ("compare", "compare the level-set and minimizing-movement flows"),
                       ("hull", "long-time limit against the convex hull of the disks")):
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.add_argument("config", type=Path)
        if name == "compare":
            sp.add_argument("--h", type=_h_list, dest="h_list", help="time steps, e.g. 0.02,0.01,0.005")
    sub.add_parser("selftest", parents=[common], help="run the built-in quick checks")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    say = Console(args.quiet)
    if args.command == "selftest":
        from .selftest import run_all

        failures = run_all(print)
        return EXIT_SELFTEST if failures else EXIT_OK
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out is not None:
        cfg.set_out_dir(args.out)
    loud = Console(False)
    report = lambda msg: (loud if msg.startswith(("config error", "solver error")) else say)(msg)  # noqa: E731
    if args.command == "run":
        return run_scenario(cfg, report)
    if args.command == "compare":
        return compare_cmd(cfg, args.h_list, report)
    return hull_cmd(cfg, report)


if __name__ == "__main__":
    sys.exit(main())

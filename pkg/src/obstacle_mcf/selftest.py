"""Quick structural checks run by ``obstacle-mcf selftest``.

Each check is a small closed-form example; all of them together take a few seconds.
"""

from __future__ import annotations

import tempfile
import traceback
from pathlib import Path
from typing import Callable

import numpy as np

from . import analysis as an
from . import atw
from .config import ConfigError, parse_text
from .geometry import (
    extract_contour,
    hausdorff,
    signed_distance_disks,
    signed_distance_to_set,
    sublevel_area,
)
from .grid import BinarySet, ContourSet, GridError, Polyline, ScalarField, make_grid
from .levelset import (
    ObstacleSet,
    SolverConfig,
    Trajectory,
    barrier_residual,
    curvature_rhs,
    evolve,
    forcing_rhs,
    obstacles_at,
    step,
)

CHECKS: list[tuple[str, Callable[[], None]]] = []


def check(fn):
    CHECKS.append((fn.__name__, fn))
    return fn


def _raises(exc, fn, *args, **kw) -> bool:
    try:
        fn(*args, **kw)
    except exc:
        return True
    return False


UNIT = (0.0, 1.0, 0.0, 1.0)
BOX = (-1.0, 1.0, -1.0, 1.0)


@check
def grid_spacing():
    g = make_grid(5, 5, UNIT)
    assert g.hx == g.hy == 0.25
    g = make_grid(3, 3, (0, 2, 0, 1))
    assert (g.hx, g.hy) == (1.0, 0.5)
    assert _raises(GridError, make_grid, 2, 5, UNIT)


@check
def disk_distance_values():
    g = make_grid(41, 41, BOX)
    d = signed_distance_disks(g, [((0.0, 0.0), 0.25)])
    assert d.values[20, 20] == -0.25
    assert abs(d.values[20, 30] - 0.25) < 1e-15
    two = signed_distance_disks(g, [((-0.5, 0.0), 0.2), ((0.5, 0.0), 0.2)])
    a = signed_distance_disks(g, [((-0.5, 0.0), 0.2)])
    b = signed_distance_disks(g, [((0.5, 0.0), 0.2)])
    assert np.array_equal(two.values, np.minimum(a.values, b.values))


@check
def set_distance_adjacency():
    g = make_grid(33, 33, BOX)
    E = signed_distance_disks(g, [((0.1, 0.0), 0.4)]).sublevel()
    d = signed_distance_to_set(E).values
    ins = E.inside
    edge = ins & ~(np.roll(ins, 1, 0) & np.roll(ins, -1, 0) & np.roll(ins, 1, 1) & np.roll(ins, -1, 1))
    assert np.abs(d[edge]).max() <= g.hx + g.hy


@check
def contour_of_constant_is_empty():
    g = make_grid(9, 9, BOX)
    assert extract_contour(ScalarField.constant(g, 1.0), 0.0).is_empty()


@check
def hausdorff_basics():
    a = ContourSet((Polyline(np.array([[0.0, 0.0], [1.0, 0.0]]), False),))
    b = ContourSet((Polyline(np.array([[0.0, 0.3], [1.0, 0.3]]), False),))
    assert hausdorff(a, a) == 0.0
    assert abs(hausdorff(a, b) - 0.3) < 1e-15


@check
def area_of_constants():
    g = make_grid(11, 11, UNIT)
    assert sublevel_area(ScalarField.constant(g, 1.0), 0.0) == 0.0
    assert abs(sublevel_area(ScalarField.constant(g, -1.0), 0.0) - 1.0) < 1e-12


@check
def obstacle_interpolation():
    g = make_grid(5, 5, UNIT)
    c = ScalarField.constant(g, -2.0)
    top = ScalarField.constant(g, 5.0)
    single = ObstacleSet.static(c, top)
    assert obstacles_at(single, 3.0)[0] is c
    two = ObstacleSet(((0.0, c, top), (1.0, c + 1.0, top)))
    assert np.allclose(obstacles_at(two, 0.5)[0].values, -1.5)
    assert np.array_equal(obstacles_at(two, 7.0)[0].values, (c + 1.0).values)


@check
def affine_fields_have_no_curvature():
    g = make_grid(17, 17, BOX)
    u = ScalarField.from_function(g, lambda x, y: 0.3 * x - 0.7 * y + 0.1)
    assert np.abs(curvature_rhs(u, 1e-6).values).max() < 1e-9


@check
def forcing_trivial_cases():
    g = make_grid(17, 17, BOX)
    u = ScalarField.from_function(g, lambda x, y: x)
    assert np.array_equal(forcing_rhs(u, ScalarField.constant(g, 0.0)).values, np.zeros(g.shape))
    f = forcing_rhs(u, ScalarField.constant(g, 1.0)).values
    assert np.allclose(f[1:-1, 1:-1], -1.0)


@check
def pinched_and_constant_steps():
    g = make_grid(17, 17, BOX)
    u = signed_distance_disks(g, [((0.0, 0.0), 0.5)])
    dt = 0.5 * g.h**2 / 4
    pinched = ObstacleSet.static(u, u)
    assert np.array_equal(step(u, pinched, ScalarField.constant(g, 0.0), 0.0, dt).values, u.values)
    c = ScalarField.constant(g, 0.25)
    wide = ObstacleSet.wide(g)
    assert np.array_equal(step(c, wide, ScalarField.constant(g, 0.0), 0.0, dt).values, c.values)
    traj = evolve(u, pinched, None, SolverConfig.uniform(0.01, 3))
    assert all(np.array_equal(f.values, u.values) for f in traj.fields)


@check
def barrier_translation_and_single_time():
    g = make_grid(33, 33, BOX)
    r0 = barrier_residual(g, (0.0, 0.0), [0.0, 0.05])
    r1 = barrier_residual(g, (0.3, 0.2), [0.0, 0.05])
    assert r0 <= 1e-2 and r1 <= 1e-2
    assert barrier_residual(g, (0.0, 0.0), [0.0]) <= 1e-2


@check
def relaxed_solver_trivial_cases():
    g = make_grid(33, 33, BOX)
    cfg = atw.SchemeConfig(h=0.01)
    sol = atw.tv_solve(ScalarField.constant(g, 0.5), BinarySet.empty(g), cfg)
    assert np.array_equal(sol.v.values, np.zeros(g.shape)) and sol.gap == 0.0
    disk = signed_distance_disks(g, [((0.0, 0.0), 0.4)]).sublevel()
    sol = atw.tv_solve(ScalarField.constant(g, 1.0), disk, cfg)
    assert np.all(sol.v.values[disk.inside] == 1.0)
    assert disk.issubset(sol.threshold(0.5))


@check
def flow_trivial_cases():
    g = make_grid(33, 33, BOX)
    cfg = atw.SchemeConfig(h=0.01)
    E = signed_distance_disks(g, [((0.0, 0.0), 0.5)]).sublevel()
    out = atw.flow(E, BinarySet.empty(g), cfg, 0.005)
    assert len(out) == 1 and out[0][0] == 0.0 and out[0][1] == E
    out = atw.flow(E, E, cfg, 0.03)
    assert all(F == E for _, F in out)
    assert atw.h_monotonicity_check(E, E, 0.02, 0.01, cfg) == 0
    assert _raises(ValueError, atw.h_monotonicity_check, E, E, 0.01, 0.01, cfg)


@check
def ball_formula_endpoints():
    assert atw.ball_step_radius(0.7, 0.0, 2) == 0.7
    assert abs(atw.ball_step_radius(0.8, 0.8**2 / 8, 2) - 0.4) < 1e-15
    assert abs(atw.ball_step_radius(1.0, 0.01, 2) - 0.979583) < 1e-6


@check
def stack_of_single_phase_is_constant():
    g = make_grid(17, 17, BOX)
    u0 = ScalarField.constant(g, 0.3)
    traj = atw.stack_evolution(u0, ScalarField.constant(g, 5.0), atw.SchemeConfig(h=0.01), 0.03, [-0.5, 0.0, 0.5])
    assert all(np.array_equal(f.values, traj.fields[0].values) for f in traj.fields)


@check
def order_report_basics():
    g = make_grid(9, 9, BOX)
    u = ScalarField.from_function(g, lambda x, y: x * y)
    a = Trajectory(((0.0, u), (0.1, u)))
    b = a.map(lambda v: v + 0.1)
    assert an.check_order(a, a).max_violation == 0.0
    assert abs(an.check_order(a, b).max_violation + 0.1) < 1e-12


@check
def fattening_of_constant():
    g = make_grid(9, 9, BOX)
    traj = Trajectory(((0.0, ScalarField.constant(g, 1.0)),))
    assert an.fattening_metrics(traj, 0.5)[0][1] == 0.0


@check
def steady_state_of_constant():
    g = make_grid(9, 9, BOX)
    f = ScalarField.constant(g, 1.0)
    assert an.steady_state(Trajectory(((0.0, f), (0.1, f), (0.2, f))), 1e-9)[0] == 0.0


@check
def consistency_preconditions():
    g = make_grid(17, 17, BOX)
    u0 = ScalarField.constant(g, 0.3)
    cfgs = (SolverConfig.uniform(0.02, 2), atw.SchemeConfig())
    assert _raises(ValueError, an.scheme_consistency, u0, u0, [0.01, 0.02], *cfgs, [-0.5, 0.0, 0.5])
    table = an.scheme_consistency(u0, ScalarField.constant(g, 5.0), [0.02, 0.01], *cfgs, [-0.5, 0.0, 0.5])
    assert table.distances == [0.0, 0.0]


@check
def hull_needs_two_disks():
    g = make_grid(17, 17, BOX)
    assert _raises(ValueError, an.hull_compare, [((0.0, 0.0), 0.2)], g, SolverConfig.uniform(0.01, 1))


@check
def lipschitz_ratio_trivial_cases():
    g = make_grid(17, 17, BOX)
    u = ScalarField.from_function(g, lambda x, y: 0.5 * x + 0.25 * y)
    traj = Trajectory(((0.0, u), (0.1, u)))
    L0 = 0.5
    assert abs(an.lipschitz_growth(traj, 0.0, L0) - 1.0) < 1e-12
    moved = evolve(u, ObstacleSet.wide(g), None, SolverConfig.uniform(0.02, 2))
    assert an.lipschitz_growth(moved, 0.0, L0) <= 1 + 1e-6


@check
def identity_relabel_is_exact():
    g = make_grid(33, 33, BOX)
    u = signed_distance_disks(g, [((0.0, 0.0), 0.5)])
    d = an.zero_set_invariance(u, an.MonotoneMap.identity(), ObstacleSet.wide(g), SolverConfig.uniform(0.01, 2))
    assert all(v == 0.0 for _, v in d)


@check
def config_validation():
    cfg = parse_text("[scenario]\nname = circle\n[grid]\nnx = 64\n[solver]\nt_end = 0.1\n")
    assert cfg.get("solver", "eps") == 1e-6 and cfg.get("solver", "cfl") == 0.5 and cfg.seed == 42
    try:
        parse_text("[scenario]\nname = circle\n[grid]\nnx = 64\n[solver]\nt_end = 0.1\ncfl = 1.5\n")
        raise AssertionError("cfl = 1.5 accepted")
    except ConfigError as exc:
        assert exc.key == "cfl"
    try:
        parse_text("[scenario]\nname = circle\n[grid]\nnx = 64\nflux = 2\n[solver]\nt_end = 0.1\n")
        raise AssertionError("unknown key accepted")
    except ConfigError as exc:
        assert exc.key == "flux" and exc.line == 5
    with tempfile.TemporaryDirectory() as tmp:
        missing = Path(tmp) / "nope.dat"
        try:
            parse_text(f"[scenario]\nname = custom\n[grid]\nnx = 8\n[solver]\nt_end = 0.1\n[custom]\nu0_file = {missing}\n")
            raise AssertionError("missing file accepted")
        except ConfigError as exc:
            assert str(missing) in str(exc)


def run_all(out=print) -> int:
    """Run every check, print one line each, return the number of failures."""
    failures = 0
    for name, fn in CHECKS:
        try:
            fn()
        except Exception as exc:  # noqa: BLE001 - report anything a check raises
            failures += 1
            detail = str(exc) or type(exc).__name__
            out(f"FAIL {name}: {detail}")
            if not isinstance(exc, AssertionError):
                out(traceback.format_exc().rstrip())
        else:
            out(f"PASS {name}")
    out(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed")
    return failures


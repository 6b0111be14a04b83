import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obstacle_mcf.atw import (
    SchemeConfig,
    ball_step_radius,
    default_levels,
    disk_step_radius,
    export_flow,
    flow,
    h_monotonicity_check,
    set_energy,
    stack_evolution,
    stack_zero_level,
    step_weight,
    th_relaxed,
    th_step,
    tv_solve,
)
from obstacle_mcf.geometry import signed_distance_disks
from obstacle_mcf.grid import BinarySet, ScalarField, make_grid, read_field
from oracles import radial_step_radius


@pytest.fixture(scope="module")
def g128():
    return make_grid(128, 128, (-1, 1, -1, 1))


def disk(g, r, c=(0.0, 0.0)):
    return signed_distance_disks(g, [(c, r)]).sublevel(0.0)


def equiv_radius(S: BinarySet) -> float:
    return math.sqrt(S.count * S.grid.hx * S.grid.hy / math.pi)


# -- closed forms ----------------------------------------------------------


def test_ball_formula():
    assert ball_step_radius(1.0, 0.01, 2) == pytest.approx(0.979583, abs=1e-6)
    assert ball_step_radius(1.0, 0.0, 3) == 1.0
    assert ball_step_radius(2.0, 0.25, 4) == pytest.approx(1.0)
    for args in ((0.0, 0.1, 2), (1.0, -0.1, 2), (1.0, 0.1, 0), (1.0, 0.2, 2)):
        with pytest.raises(ValueError):
            ball_step_radius(*args)


@pytest.mark.parametrize("R,h", [(0.6, 0.005), (1.0, 0.01), (0.3, 0.002), (0.8, 0.05)])
def test_disk_step_radius_matches_radial_scan(R, h):
    assert disk_step_radius(R, h) == pytest.approx(radial_step_radius(R, h), abs=1e-5)
    # the planar minimiser uses the two-dimensional constant 4 (n - 1) h with n = 2
    assert disk_step_radius(R, h) == pytest.approx(0.5 * (R + math.sqrt(R * R - 4 * h)), abs=1e-6)


def test_disk_step_radius_obstacle_and_extinction():
    free = disk_step_radius(0.6, 0.005)
    assert disk_step_radius(0.6, 0.005, inner=0.595) == pytest.approx(0.595, abs=1e-9)
    assert disk_step_radius(0.6, 0.005, inner=0.3) == pytest.approx(free, abs=1e-7)
    assert disk_step_radius(0.1, 0.01) == 0.0
    assert radial_step_radius(0.1, 0.01) == 0.0


# -- relaxed problem -------------------------------------------------------


def test_tv_solve_trivial_signs(box_grid):
    cfg = SchemeConfig()
    none = BinarySet(box_grid, np.zeros(box_grid.shape, bool))
    pos = tv_solve(ScalarField.constant(box_grid, 1.0), none, cfg)
    neg = tv_solve(ScalarField.constant(box_grid, -1.0), none, cfg)
    assert pos.converged and neg.converged
    np.testing.assert_allclose(pos.v.values, 0.0, atol=1e-6)
    np.testing.assert_allclose(neg.v.values, 1.0, atol=1e-6)
    full = BinarySet(box_grid, np.ones(box_grid.shape, bool))
    masked = tv_solve(ScalarField.constant(box_grid, 5.0), full, cfg)
    np.testing.assert_array_equal(masked.v.values, 1.0)


def test_tv_solve_box_constraints_and_mask(g128):
    cfg = SchemeConfig()
    E = disk(g128, 0.5)
    omega = disk(g128, 0.2, (0.1, 0.0))
    sol = th_relaxed(E, omega, cfg)
    v = sol.v.values
    assert sol.converged and sol.gap <= cfg.gap_tol
    assert v.min() >= 0.0 and v.max() <= 1.0
    assert np.all(v[omega.inside] == 1.0)


def test_band_matches_full_solve(g128):
    cfg = SchemeConfig()
    E = disk(g128, 0.45, (0.05, -0.1))
    omega = BinarySet(g128, np.zeros(g128.shape, bool))
    w = step_weight(E, cfg)
    full = tv_solve(w, omega, cfg)
    band = tv_solve(w, omega, cfg, band=np.abs(w.values) * cfg.h <= 3 * g128.hx, init=E.inside)
    assert full.converged and band.converged
    assert np.abs(full.v.values - band.v.values).max() < 1e-2
    assert full.threshold(0.5) == band.threshold(0.5)


def test_set_energy_of_a_strip():
    g = make_grid(41, 21, (0, 2, 0, 1))
    S = np.zeros(g.shape, bool)
    S[:, :10] = True
    w = np.zeros(g.shape)
    # node sums without the cell-area factor: one jump of 1/hx in each of the ny rows
    assert set_energy(S, w, g.hx, g.hy) == pytest.approx(g.ny / g.hx)
    assert set_energy(np.zeros(g.shape, bool), w, g.hx, g.hy) == 0.0
    assert set_energy(S, np.ones(g.shape), g.hx, g.hy) == pytest.approx(g.ny / g.hx + S.sum())


# -- one step --------------------------------------------------------------


def test_step_on_a_disk_matches_radial_oracle(g128):
    cfg = SchemeConfig(h=0.01)
    F = th_step(disk(g128, 0.6), BinarySet(g128, np.zeros(g128.shape, bool)), cfg)
    assert abs(equiv_radius(F) - radial_step_radius(0.6, 0.01)) <= 2 * g128.hx


def test_step_fixed_points(g128):
    cfg = SchemeConfig()
    empty = BinarySet(g128, np.zeros(g128.shape, bool))
    full = BinarySet(g128, np.ones(g128.shape, bool))
    assert th_step(empty, empty, cfg) is empty
    assert th_step(full, empty, cfg) is full
    E = disk(g128, 0.4)
    assert th_step(E, E, cfg) == E


def test_step_keeps_the_obstacle(g128):
    cfg = SchemeConfig(h=0.08)
    E = disk(g128, 0.6)
    omega = disk(g128, 0.5)
    F = th_step(E, omega, cfg)
    assert omega.issubset(F) and F.issubset(E)
    # unconstrained the disk would shrink to 0.4; the obstacle stops it at 0.5
    assert radial_step_radius(0.6, 0.08, inner=0.5) == pytest.approx(0.5, abs=1e-6)
    assert abs(equiv_radius(F) - 0.5) <= 2 * g128.hx


def test_step_rejects_bad_inputs(g128, box_grid):
    cfg = SchemeConfig()
    E = disk(g128, 0.3)
    with pytest.raises(ValueError):
        th_step(E, disk(g128, 0.5), cfg)
    with pytest.raises(ValueError):
        th_step(E, E, cfg, threshold="best")
    with pytest.raises(Exception):
        th_step(E, disk(box_grid, 0.1), cfg)


def test_max_threshold_contains_generic(g128):
    cfg = SchemeConfig(h=0.01)
    E = disk(g128, 0.5, (0.1, 0.0)) | disk(g128, 0.3, (-0.4, 0.2))
    omega = BinarySet(g128, np.zeros(g128.shape, bool))
    assert th_step(E, omega, cfg, "generic").issubset(th_step(E, omega, cfg, "max"))


@settings(max_examples=6, deadline=None)
@given(
    r1=st.floats(0.2, 0.45),
    dr=st.floats(0.05, 0.3),
    cx=st.floats(-0.1, 0.1),
)
def test_step_is_monotone_under_inclusion(r1, dr, cx):
    g = make_grid(64, 64, (-1, 1, -1, 1))
    cfg = SchemeConfig(h=0.01)
    small = disk(g, r1, (cx, 0.0))
    big = disk(g, r1 + dr, (0.0, 0.0)) | small
    omega = BinarySet(g, np.zeros(g.shape, bool))
    a, b = th_step(small, omega, cfg), th_step(big, omega, cfg)
    assert a.issubset(b)


# -- flow ------------------------------------------------------------------


def test_flow_of_a_disk_is_nested_and_shrinks(g128):
    cfg = SchemeConfig(h=0.01)
    sets = flow(disk(g128, 0.5), BinarySet(g128, np.zeros(g128.shape, bool)), cfg, 0.05)
    assert [round(t, 9) for t, _ in sets] == [0.0, 0.01, 0.02, 0.03, 0.04, 0.05]
    for (_, a), (_, b) in zip(sets, sets[1:]):
        assert b.issubset(a)
    assert abs(equiv_radius(sets[-1][1]) - math.sqrt(0.25 - 0.1)) <= 3 * g128.hx


def test_flow_stops_at_the_obstacle(g128):
    cfg = SchemeConfig(h=0.02)
    omega = disk(g128, 0.45)
    sets = flow(disk(g128, 0.55), omega, cfg, 0.2)
    assert sets[-1][1] == sets[-2][1]
    assert omega.issubset(sets[-1][1])


def test_export_flow(tmp_path, box_grid):
    E = disk(box_grid, 0.5)
    sets = [(0.0, E), (0.01, E)]
    paths = export_flow(sets, tmp_path)
    assert [p.name for p in paths] == ["E_00000.dat", "E_00001.dat", "E_index.txt"]
    assert (tmp_path / "E_index.txt").read_text().splitlines()[1] == f"1 0.010000 E_00001.dat {E.count}"
    np.testing.assert_array_equal(read_field(paths[0]).values, E.inside.astype(float))


# -- level stacking --------------------------------------------------------


def test_stack_zero_level():
    assert stack_zero_level([-0.2, -0.1, 0.0, 0.1]) == pytest.approx(0.05)
    assert stack_zero_level([0.3, -0.5, 0.1]) == pytest.approx(-0.2)
    with pytest.raises(ValueError):
        stack_zero_level([0.1, 0.2, 0.3])
    assert default_levels(5) == [-1.0, -0.5, 0.0, 0.5, 1.0]


def test_stack_validates_levels(box_grid):
    u = ScalarField.constant(box_grid, 0.0)
    with pytest.raises(ValueError):
        stack_evolution(u, u, SchemeConfig(), 0.01, [0.0, 1.0])
    with pytest.raises(ValueError):
        stack_evolution(u, u, SchemeConfig(), 0.01, [0.0, 0.0, 1.0])


def test_stack_evolution_nested_levels(box_grid):
    cfg = SchemeConfig(h=0.01)
    u0 = signed_distance_disks(box_grid, [((0.0, 0.0), 0.5)])
    upper = ScalarField.constant(box_grid, 10.0)
    levels = [-0.2, -0.1, 0.0, 0.1]
    seen = []
    traj = stack_evolution(u0, upper, cfg, 0.03, levels, progress=seen.append)
    assert seen == levels and len(traj) == 4
    for f in traj.fields:
        assert set(np.unique(f.values)) <= set(levels)
    first = traj.fields[0].values
    for s in levels[:-1]:
        np.testing.assert_array_equal(first <= s, (u0.values <= s))
    # sublevel sets only shrink under the free flow
    for a, b in zip(traj.fields, traj.fields[1:]):
        assert np.all(b.values >= a.values)


def test_stack_per_level_obstacle(box_grid):
    cfg = SchemeConfig(h=0.02)
    u0 = signed_distance_disks(box_grid, [((0.0, 0.0), 0.6)])
    upper = signed_distance_disks(box_grid, [((0.0, 0.0), 0.4)])
    levels = [-0.1, 0.0, 0.1]
    traj = stack_evolution(u0, upper, cfg, 0.2, levels)
    for s in levels:
        assert np.all(traj.final.values[upper.values <= s] <= s)


# -- h monotonicity --------------------------------------------------------


def test_h_monotonicity_nested_disks(g128):
    cfg = SchemeConfig()
    E = disk(g128, 0.6)
    omega = disk(g128, 0.3, (0.1, 0.0))
    assert h_monotonicity_check(E, omega, 0.02, 0.01, cfg, band=1) == 0
    with pytest.raises(ValueError):
        h_monotonicity_check(E, omega, 0.01, 0.02, cfg)


def test_h_monotonicity_trivial_when_obstacle_fills_the_set(g128):
    E = disk(g128, 0.4)
    assert h_monotonicity_check(E, E, 0.02, 0.01, SchemeConfig()) == 0


# -- structural properties -------------------------------------------------


def test_obstacle_step_contains_free_step(g128):
    from obstacle_mcf.geometry import dilate

    cfg = SchemeConfig(h=0.01)
    E = disk(g128, 0.5) | disk(g128, 0.3, (0.45, 0.3))
    omega = disk(g128, 0.2, (0.2, 0.1)) | disk(g128, 0.1, (0.5, 0.35))
    empty = BinarySet(g128, np.zeros(g128.shape, bool))
    free = th_step(E, empty, cfg)
    held = th_step(E, omega, cfg)
    assert ((free | omega) - dilate(held, 1)).count == 0


def _relaxed_case(g):
    cfg = SchemeConfig(h=0.01)
    E = disk(g, 0.5, (0.05, 0.0))
    omega = disk(g, 0.15)
    sol = th_relaxed(E, omega, cfg)
    w = step_weight(E, cfg).values
    # the relaxed objective itself, with the same TV as set_energy
    v = sol.v.values
    dx, dy = np.diff(v, axis=1) / g.hx, np.diff(v, axis=0) / g.hy
    fwd = np.hypot(np.pad(dx, ((0, 0), (0, 1))), np.pad(dy, ((0, 1), (0, 0)))).sum()
    bwd = np.hypot(np.pad(dx, ((0, 0), (1, 0))), np.pad(dy, ((1, 0), (0, 0)))).sum()
    relaxed = 0.5 * (fwd + bwd) + (w * v).sum()
    energies = [set_energy(v >= t, w, g.hx, g.hy) for t in (0.25, 0.5, 0.75)]
    return cfg, sol, relaxed, energies


def test_thresholds_are_bounded_by_the_relaxed_minimum(g128):
    cfg, sol, relaxed, energies = _relaxed_case(g128)
    assert sol.converged
    # binary sets are feasible for the relaxed problem
    assert min(energies) >= relaxed - 2 * cfg.gap_tol * abs(relaxed)


@pytest.mark.xfail(strict=True, reason="isotropic TV obeys the coarea formula only as an inequality")
def test_thresholds_agree_to_the_gap_tolerance(g128):
    cfg, _, relaxed, energies = _relaxed_case(g128)
    assert max(energies) - min(energies) <= 2 * cfg.gap_tol * abs(relaxed)


def test_single_phase_stack_is_constant(box_grid):
    u0 = ScalarField.constant(box_grid, 0.5)
    traj = stack_evolution(u0, ScalarField.constant(box_grid, 10.0), SchemeConfig(h=0.01), 0.03, [-0.5, 0.0, 0.5])
    for f in traj.fields:
        np.testing.assert_array_equal(f.values, 0.5)


def test_stack_modulus_stays_bounded():
    from obstacle_mcf.geometry import discrete_lipschitz

    g = make_grid(64, 64, (-1, 1, -1, 1))
    cfg = SchemeConfig(h=0.01)
    u0 = signed_distance_disks(g, [((0.0, 0.0), 0.5)])
    levels = [-0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3]
    traj = stack_evolution(u0, ScalarField.constant(g, 10.0), cfg, 0.04, levels)
    bound = discrete_lipschitz(u0) + (0.1 + 1.0) / g.hx
    for f in traj.fields:
        assert discrete_lipschitz(f) <= bound

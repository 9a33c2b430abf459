import math

import numpy as np
import pytest

from oracles.fd import oracle_fd_directional, oracle_fd_gradient
from oracles.precision import oracle_difference_norm, oracle_dot
from taloskit.astro import TimeGrid
from taloskit.cli import data_path
from taloskit.spec import assemble, load_mission
from taloskit.trajopt import (
    ARCSEC,
    SolverOptions,
    TelescopeConstraints,
    TelescopeGeometry,
    TrajOptProblem,
    ZeroSeparationError,
    propellant_objective,
    report_convergence,
    restore_feasibility,
    solve,
    telescope_constraints,
    window_mask,
    write_formation_csv,
    write_thrust_csv,
)

G0 = 9.80665
L_KM = 0.040
TOL_KM = 0.15e-6
S_HAT = np.array([0.0, 0.6, 0.8])


def visors(**update):
    return load_mission(data_path("visors_like.json")).model_copy(update=update)


def problem(**update):
    return TrajOptProblem(assemble(visors(**update)))


def evaluator(n=10, windows=((0.0, 100.0),), **kw):
    grid = TimeGrid(0.0, 10.0, n)
    args = dict(length_km=L_KM, tol_km=TOL_KM, halfangle_rad=90 * ARCSEC, max_sep_km=5.0)
    args.update(kw)
    return TelescopeConstraints(grid, S_HAT, window_mask(grid, windows), **args)


def formation_states(d, n=10, base=(0.02, 0.001, -0.003)):
    x = np.zeros((n + 1, 12))
    x[:, 0:3] = base
    x[:, 6:9] = np.asarray(base) + np.asarray(d)
    return x


# --- objective ----------------------------------------------------------------


def test_zero_thrust_objective_is_exactly_zero():
    grid = TimeGrid(0.0, 11.6, 500)
    J, g = propellant_objective(np.zeros((500, 6)), np.full(6, 47.0), grid)
    assert J == 0.0
    assert np.all(g == 0.0)


def test_constant_thrust_objective_matches_mass_flow():
    grid = TimeGrid(0.0, 10.0, 100)
    T = np.zeros((100, 6))
    T[:, 2] = 1e-3
    J, _ = propellant_objective(T, np.full(6, 47.0), grid)
    assert J == pytest.approx(grid.n * grid.dt * 1e-3 / (G0 * 47.0), rel=1e-3)


def test_objective_gradient_matches_finite_differences(rng):
    grid = TimeGrid(0.0, 10.0, 8)
    isp = np.array([47.0, 47.0, 47.0, 60.0, 60.0, 60.0])
    T = rng.normal(size=(8, 6)) * 1e-5
    _, g = propellant_objective(T, isp, grid)
    fd = oracle_fd_gradient(lambda t: propellant_objective(t, isp, grid)[0], T, h=1e-9)
    np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-14)


def test_objective_rejects_bad_epsilon():
    with pytest.raises(ValueError):
        propellant_objective(np.zeros((2, 6)), np.full(6, 47.0), TimeGrid(0.0, 1.0, 2), epsilon=0.0)


# --- geometry and constraints -----------------------------------------------------


def test_nominal_formation_has_no_violation():
    ev = evaluator()
    states = formation_states(L_KM * S_HAT)
    fam = ev.pointwise(states)
    assert np.max(fam["length"][0]) <= -1.0 + 1e-6
    assert np.max(fam["pointing"][0]) == pytest.approx(-1.0)
    margins = ev.raw_margins(states)
    assert np.all(margins["length_km"] <= 0) and np.all(margins["pointing_rad"] <= 0)


def test_perpendicular_separation_violates_pointing_by_quarter_turn():
    ev = evaluator()
    perp = np.cross(S_HAT, [1.0, 0.0, 0.0])
    perp /= np.linalg.norm(perp)
    margins = ev.raw_margins(formation_states(L_KM * perp))
    np.testing.assert_allclose(margins["pointing_rad"], math.pi / 2 - 90 * ARCSEC, rtol=1e-12)
    assert ev.max_pointwise(formation_states(L_KM * perp)) > 1e6


def test_geometry_quantities():
    geom = TelescopeGeometry(np.zeros(3), L_KM * S_HAT + [0.0, 0.0, 0.0], S_HAT)
    assert geom.length_along_sun == pytest.approx(L_KM)
    assert geom.pointing_error == pytest.approx(0.0, abs=1e-12)
    assert geom.view_plane_error == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        TelescopeGeometry(np.zeros(3), np.ones(3), [1.0, 1.0, 0.0])


def test_zero_separation_inside_window_raises():
    with pytest.raises(ZeroSeparationError):
        evaluator().evaluate(formation_states(np.zeros(3)))
    # outside any window it is harmless
    evaluator(windows=()).evaluate(formation_states(np.zeros(3)))


def test_no_windows_gives_inactive_families():
    c = evaluator(windows=()).evaluate(formation_states(L_KM * S_HAT), with_grad=False)
    assert c[0] == -1.0 and c[1] == -1.0 and c[2] < 0


def test_window_outside_grid_is_rejected():
    with pytest.raises(ValueError, match="outside grid span"):
        window_mask(TimeGrid(0.0, 10.0, 10), [(50.0, 150.0)])


def test_ks_bounds_pointwise_max(rng):
    ev = evaluator()
    states = formation_states(L_KM * S_HAT) + rng.normal(size=(11, 12)) * 1e-7
    c = ev.evaluate(states, with_grad=False)
    fam = ev.pointwise(states)
    for i, name in enumerate(("length", "pointing", "separation")):
        g = fam[name][0]
        assert g.max() <= c[i] <= g.max() + math.log(g.size) / ev.rho + 1e-12


def test_constraint_state_gradient_matches_finite_differences(rng):
    # rho = 1 keeps the KS curvature small enough for steps well above state round-off
    ev = evaluator(rho=1.0)
    states = formation_states(L_KM * S_HAT) + rng.normal(size=(11, 12)) * 1e-7
    _, dc = ev.evaluate(states)
    for _ in range(5):
        d = rng.normal(size=states.shape)
        # window families resolve 0.15 mm, separation is scaled by 5 km: one step each
        fd_fine = oracle_fd_directional(lambda s: ev.evaluate(s, with_grad=False), states, d, 1e-9, order=4)
        fd_coarse = oracle_fd_directional(lambda s: ev.evaluate(s, with_grad=False), states, d, 1e-6, order=4)
        fd = np.array([fd_fine[0], fd_fine[1], fd_coarse[2]])
        ad = np.tensordot(dc, d, axes=2)
        np.testing.assert_allclose(ad, fd, rtol=1e-5, atol=1e-10)


def test_length_residual_scale_audit(rng):
    # |d.s| - L at the 0.15 mm scale, computed from km-sized positions, against 50-digit arithmetic
    for _ in range(50):
        u1 = rng.uniform(-5, 5, size=3) * 1e-2
        u2 = u1 + L_KM * S_HAT + rng.normal(size=3) * 1e-7
        ours = float(TelescopeGeometry(u1, u2, S_HAT).length_along_sun) - L_KM
        d = [float(b) - float(a) for a, b in zip(u1, u2)]
        exact = abs(oracle_dot([repr(float(b)) for b in u2], S_HAT) - oracle_dot([repr(float(a)) for a in u1], S_HAT)) - L_KM
        assert abs(ours - float(exact)) < 1e-3 * TOL_KM
        assert float(oracle_difference_norm(u2, u1)) == pytest.approx(np.linalg.norm(d), rel=1e-14)


# --- adjoint gradients through the full pipeline -------------------------------------------


@pytest.fixture(scope="module")
def p200():
    return problem(num_steps=200)


def test_constraint_adjoint_matches_finite_differences(p200):
    rng = np.random.default_rng(7)
    T = rng.normal(size=p200.shape) * 2e-5
    _, jac = p200.constraints(T)
    for _ in range(10):
        d = rng.normal(size=p200.shape)
        d /= np.linalg.norm(d)
        ad = np.tensordot(jac, d, axes=2)
        fd = oracle_fd_directional(lambda t: p200.constraints(t, with_grad=False), T, d, 3e-7, order=4)
        assert np.all(np.abs(fd - ad) <= 1e-5 * np.maximum(np.abs(ad), 1e-10))


def test_objective_adjoint_through_problem(p200):
    rng = np.random.default_rng(8)
    T = rng.normal(size=p200.shape) * 2e-5
    _, g = p200.objective(T)
    d = rng.normal(size=p200.shape)
    fd = oracle_fd_directional(lambda t: p200.objective(t)[0], T, d, 1e-9)
    assert abs(fd - np.sum(g * d)) <= 1e-6 * abs(fd)


def test_telescope_constraints_per_spacecraft(p200):
    rng = np.random.default_rng(9)
    T = rng.normal(size=p200.shape) * 1e-5
    traj = p200.propagate(T)
    optics, detector = p200.split(traj)
    sys1 = assemble(visors(num_steps=200)).orbit_systems["optics"]
    sys2 = assemble(visors(num_steps=200)).orbit_systems["detector"]
    c, (g1, g2) = telescope_constraints(optics, detector, p200.constraints_evaluator, sys1, sys2)
    c_ref, jac = p200.constraints(T)
    np.testing.assert_allclose(c, c_ref, rtol=1e-12)
    np.testing.assert_allclose(np.concatenate([g1, g2], axis=2), jac, rtol=1e-9, atol=1e-6 * np.abs(jac).max())


# --- solver -------------------------------------------------------------------------


def test_no_windows_converges_immediately():
    p = problem(observation_windows=[], duration_s=600.0, num_steps=30)
    result = solve(p)
    assert result.report.converged and result.report.termination == "converged"
    assert len(result.report.history) == 1
    assert result.report.final.objective == 0.0
    assert np.all(result.thrusts == 0.0)


def test_already_feasible_short_horizon_keeps_thrust_off():
    base = visors()
    s = base.sun_unit
    detector = base.detector_cubesat.model_copy(
        update={"initial_orbit_state": tuple(np.concatenate([np.array(base.optics_cubesat.initial_orbit_state[:3]) + L_KM * s, [0, 0, 0]]))}
    )
    p = problem(
        detector_cubesat=detector,
        observation_windows=[(0.0, 60.0)],
        duration_s=60.0,
        num_steps=6,
        telescope_length_tol_mm=500.0,
        telescope_view_halfangle_tol_arcsec=3600.0,
    )
    assert max(p.constraints(p.zero_thrust(), with_grad=False)) < 0
    result = solve(p)
    assert result.report.converged
    assert result.report.final.objective < p.epsilon * p.grid.n * p.grid.dt / (G0 * 47.0)


def test_restoration_reaches_pointwise_feasibility(p200):
    T, gmax = restore_feasibility(p200, p200.zero_thrust())
    ev = p200.constraints_evaluator
    assert gmax <= -ev.ks_gap()
    assert np.all(ev.evaluate(p200.propagate(T).states, with_grad=False) <= 0)
    assert np.all(np.abs(T) <= p200.max_thrust)


def test_merit_traces_decrease_without_restoration():
    p = problem(num_steps=100)
    result = solve(p, SolverOptions(max_outer=2, inner_maxiter=15, restoration=False, rho_start=0.01))
    assert len(result.report.merit_trace) == len(result.report.history)
    for trace in result.report.merit_trace:
        assert all(b <= a * (1 + 1e-12) for a, b in zip(trace, trace[1:]))
    assert not result.report.converged
    assert result.report.termination in ("iteration cap reached", "line-search failure")


def test_solver_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(max_outer=0)
    with pytest.raises(ValueError):
        SolverOptions(mu_growth=1.0)
    with pytest.raises(ValueError):
        SolverOptions(rho_start=0.01, rho_growth=0.5)


def test_report_and_csv_writers(tmp_path):
    p = problem(observation_windows=[], duration_s=600.0, num_steps=30)
    result = solve(p)
    report_convergence(result.report, tmp_path / "conv.csv")
    lines = (tmp_path / "conv.csv").read_text().splitlines()
    assert lines[0] == "iter,objective,feasibility,optimality" and lines[1].startswith("1,0.0,")
    write_thrust_csv(p.grid, result.thrusts, tmp_path / "thrust.csv")
    assert len((tmp_path / "thrust.csv").read_text().splitlines()) == p.grid.n + 1
    write_formation_csv(p.formation_metrics(result.trajectory), tmp_path / "formation.csv")
    header = (tmp_path / "formation.csv").read_text().splitlines()[0]
    assert header == "t,separation_km,length_along_sun_m,pointing_error_arcsec,view_plane_error_m,in_window"

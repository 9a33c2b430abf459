import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles.fd import oracle_fd_gradient
from taloskit.astro import TimeGrid
from taloskit.ode import (
    EXACT,
    DivergenceError,
    OdeSystem,
    adjoint_gradient,
    adjoint_jacobian,
    check_jacobians,
    richardson_order_check,
    rk4_propagate,
    stack_systems,
)


def linear_system(a=1.0):
    return OdeSystem(
        1, 0, lambda t, x, u: a * x, lambda t, x, u: np.array([[a]]), lambda t, x, u: np.zeros((1, 0)), "exp"
    )


def forced_system():
    # xdot = cos t, independent of x
    return OdeSystem(
        1, 0, lambda t, x, u: np.array([math.cos(t)]), lambda t, x, u: np.zeros((1, 1)), lambda t, x, u: np.zeros((1, 0))
    )


def controlled_oscillator():
    # x'' = -x - 0.1 x^3 + u
    def rhs(t, x, u):
        return np.array([x[1], -x[0] - 0.1 * x[0] ** 3 + u[0]])

    def jx(t, x, u):
        return np.array([[0.0, 1.0], [-1.0 - 0.3 * x[0] ** 2, 0.0]])

    return OdeSystem(2, 1, rhs, jx, lambda t, x, u: np.array([[0.0], [1.0]]), "duffing")


def test_rk4_order_exponential():
    order = richardson_order_check(linear_system(), [1.0], None, TimeGrid(0.0, 0.1, 10), exact=lambda t: [math.exp(t)])
    assert 3.7 <= order <= 4.3


def test_rk4_order_forced():
    order = richardson_order_check(forced_system(), [0.0], None, TimeGrid(0.0, 0.5, 8), exact=lambda t: [math.sin(t)])
    assert 3.7 <= order <= 4.3


def test_rk4_exact_for_constant_rate():
    sys_ = OdeSystem(1, 0, lambda t, x, u: np.array([2.0]), lambda t, x, u: np.zeros((1, 1)), lambda t, x, u: np.zeros((1, 0)))
    assert richardson_order_check(sys_, [0.0], None, TimeGrid(0.0, 0.1, 5), exact=lambda t: [2.0 * t]) == EXACT


def test_zero_rhs_keeps_state():
    sys_ = OdeSystem(3, 0, lambda t, x, u: np.zeros(3), lambda t, x, u: np.zeros((3, 3)), lambda t, x, u: np.zeros((3, 0)))
    traj = rk4_propagate(sys_, [1.0, -2.0, 3.0], None, TimeGrid(0.0, 1.0, 7))
    assert np.all(traj.states == np.array([1.0, -2.0, 3.0]))


def test_divergence_reports_step():
    blow = OdeSystem(1, 0, lambda t, x, u: x**2, lambda t, x, u: 2 * x[None, :], lambda t, x, u: np.zeros((1, 0)))
    with pytest.raises(DivergenceError) as info:
        rk4_propagate(blow, [1.0], None, TimeGrid(0.0, 0.5, 50))
    assert 0 <= info.value.step < 50


def test_controls_shape_checked():
    with pytest.raises(ValueError):
        rk4_propagate(controlled_oscillator(), [0.0, 0.0], np.zeros((3, 1)), TimeGrid(0.0, 0.1, 4))


def test_trajectory_is_read_only():
    traj = rk4_propagate(linear_system(), [1.0], None, TimeGrid(0.0, 0.1, 3))
    with pytest.raises(ValueError):
        traj.states[0, 0] = 5.0


def test_adjoint_matches_finite_differences(rng):
    sys_ = controlled_oscillator()
    grid = TimeGrid(0.0, 0.05, 60)
    u = rng.normal(size=(grid.n, 1))
    x0 = np.array([0.3, -0.1])
    w = rng.normal(size=(grid.n + 1, 2))

    def cost(x0_, u_):
        traj = rk4_propagate(sys_, x0_, u_, grid)
        return float(np.sum(w * traj.states**2) + 0.5 * np.sum(u_**2))

    traj = rk4_propagate(sys_, x0, u, grid)
    gx0, gu = adjoint_gradient(sys_, traj, 2 * w * traj.states, u)
    fd_u = oracle_fd_gradient(lambda v: cost(x0, v), u)
    fd_x0 = oracle_fd_gradient(lambda v: cost(v, u), x0)
    np.testing.assert_allclose(gu, fd_u, rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(gx0, fd_x0, rtol=1e-6, atol=1e-9)


def test_multi_seed_adjoint_matches_single_sweeps(rng):
    sys_ = controlled_oscillator()
    grid = TimeGrid(0.0, 0.05, 40)
    traj = rk4_propagate(sys_, [0.3, -0.1], rng.normal(size=(grid.n, 1)), grid)
    seeds = rng.normal(size=(4, grid.n + 1, 2))
    rows = adjoint_jacobian(sys_, traj, seeds)
    for seed, row in zip(seeds, rows):
        np.testing.assert_allclose(row, adjoint_gradient(sys_, traj, seed)[1], rtol=1e-13, atol=1e-15)
    with pytest.raises(ValueError):
        adjoint_jacobian(sys_, traj, seeds[0])


def test_adjoint_of_zero_cost_is_zero():
    sys_ = controlled_oscillator()
    grid = TimeGrid(0.0, 0.1, 10)
    traj = rk4_propagate(sys_, [1.0, 0.0], np.zeros((10, 1)), grid)
    gx0, gu = adjoint_gradient(sys_, traj, np.zeros((11, 2)))
    assert not gx0.any() and not gu.any()


def test_check_jacobians():
    ex, eu = check_jacobians(controlled_oscillator(), 0.0, np.array([0.4, 0.2]), np.array([0.1]))
    assert ex < 1e-8 and eu < 1e-8


def test_stack_systems_block_structure():
    a, b = controlled_oscillator(), linear_system(-0.5)
    s = stack_systems(a, b)
    assert (s.n_x, s.n_u) == (3, 1)
    x, u = np.array([0.1, 0.2, 0.3]), np.array([0.4])
    np.testing.assert_array_equal(s.rhs(0.0, x, u), np.concatenate([a.rhs(0, x[:2], u), b.rhs(0, x[2:], u[:0])]))
    J = s.jac_x(0.0, x, u)
    assert J[0:2, 2].tolist() == [0.0, 0.0] and J[2, 0:2].tolist() == [0.0, 0.0]


@given(st.floats(-2, 2), st.floats(0.01, 0.2))
def test_rk4_linear_growth_factor(a, h):
    # one RK4 step on x' = a x multiplies by the degree-4 Taylor polynomial of exp(a h)
    traj = rk4_propagate(linear_system(a), [1.0], None, TimeGrid(0.0, h, 1))
    z = a * h
    assert traj.final_state[0] == pytest.approx(1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24, rel=1e-13)

"""Fixed-step RK4 propagation and its discrete adjoint.

Controls are held constant over each step. The adjoint differentiates the
exact RK4 step map, so gradients are consistent with the propagated values to
round-off rather than to truncation error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .astro import TimeGrid

Rhs = Callable[[float, np.ndarray, np.ndarray], np.ndarray]
Jac = Callable[[float, np.ndarray, np.ndarray], np.ndarray]

EXACT = "exact"


class DivergenceError(RuntimeError):
    """Raised when propagation produces a non-finite state."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"non-finite state encountered at step {step}")


@dataclass(frozen=True)
class OdeSystem:
    """First-order system ``xdot = rhs(t, x, u)`` with analytic Jacobians."""

    n_x: int
    n_u: int
    rhs: Rhs
    jac_x: Jac
    jac_u: Jac
    name: str = "ode"


@dataclass(frozen=True)
class Trajectory:
    grid: TimeGrid
    states: np.ndarray
    controls: np.ndarray

    def __post_init__(self) -> None:
        self.states.setflags(write=False)
        self.controls.setflags(write=False)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def _as_controls(sys: OdeSystem, controls, n: int) -> np.ndarray:
    if controls is None:
        if sys.n_u:
            raise ValueError("controls required for a system with inputs")
        return np.zeros((n, 0))
    u = np.asarray(controls, dtype=float)
    if sys.n_u == 0 and u.size == 0:
        return np.zeros((n, 0))
    u = u.reshape(u.shape[0], -1) if u.ndim else u
    if u.shape != (n, sys.n_u):
        raise ValueError(f"controls must have shape ({n}, {sys.n_u}), got {u.shape}")
    return u


def rk4_step(sys: OdeSystem, t: float, x: np.ndarray, u: np.ndarray, h: float) -> np.ndarray:
    k1 = sys.rhs(t, x, u)
    k2 = sys.rhs(t + 0.5 * h, x + 0.5 * h * k1, u)
    k3 = sys.rhs(t + 0.5 * h, x + 0.5 * h * k2, u)
    k4 = sys.rhs(t + h, x + h * k3, u)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_propagate(sys: OdeSystem, x0, controls, grid: TimeGrid) -> Trajectory:
    """Propagate ``x0`` over ``grid`` with classic RK4 and zero-order-hold controls.

    Raises:
        ValueError: if ``controls`` does not have ``grid.n`` rows or ``x0`` is not finite.
        DivergenceError: when a step yields a non-finite state (``err.step`` is the step index).
    """
    x = np.array(x0, dtype=float).reshape(-1)
    if x.shape != (sys.n_x,):
        raise ValueError(f"x0 must have {sys.n_x} components, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    u = _as_controls(sys, controls, grid.n)
    states = np.empty((grid.n + 1, sys.n_x))
    states[0] = x
    h = grid.dt
    for k in range(grid.n):
        t = grid.t0 + k * h
        try:
            with np.errstate(all="ignore"):
                x = rk4_step(sys, t, x, u[k], h)
        except FloatingPointError as exc:
            raise DivergenceError(k, f"step {k}: {exc}") from exc
        if not np.all(np.isfinite(x)):
            raise DivergenceError(k)
        states[k + 1] = x
    return Trajectory(grid, states, u.copy())


def adjoint_gradient(sys: OdeSystem, traj: Trajectory, dJ_dx, dJ_du=None) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of ``J = sum_k cost_k(x_k, u_k)`` through the RK4 step map.

    Parameters
    ----------
    sys : OdeSystem
        The system ``traj`` was propagated with.
    traj : Trajectory
        Output of :func:`rk4_propagate`.
    dJ_dx : array (n+1, n_x)
        Partial derivative of the cost with respect to each stored state.
    dJ_du : array (n, n_u), optional
        Explicit partial derivative with respect to each step's control.

    Returns
    -------
    grad_x0 : array (n_x,)
    grad_u : array (n, n_u)
    """
    grid = traj.grid
    n, h = grid.n, grid.dt
    gx = np.asarray(dJ_dx, dtype=float)
    if gx.shape != (n + 1, sys.n_x):
        raise ValueError(f"dJ_dx must have shape ({n + 1}, {sys.n_x}), got {gx.shape}")
    if dJ_du is None:
        gu_direct = np.zeros((n, sys.n_u))
    else:
        gu_direct = np.asarray(dJ_du, dtype=float)
        if gu_direct.shape != (n, sys.n_u):
            raise ValueError(f"dJ_du must have shape ({n}, {sys.n_u}), got {gu_direct.shape}")

    grad_u = gu_direct.copy()
    lam = gx[n].copy()
    for k in range(n - 1, -1, -1):
        t = grid.t0 + k * h
        x = traj.states[k]
        u = traj.controls[k]
        # Recompute stage states of the forward step.
        k1 = sys.rhs(t, x, u)
        x2 = x + 0.5 * h * k1
        k2 = sys.rhs(t + 0.5 * h, x2, u)
        x3 = x + 0.5 * h * k2
        k3 = sys.rhs(t + 0.5 * h, x3, u)
        x4 = x + h * k3

        m4 = (h / 6.0) * lam
        m3 = (h / 3.0) * lam
        m2 = (h / 3.0) * lam
        m1 = (h / 6.0) * lam

        s4 = sys.jac_x(t + h, x4, u).T @ m4
        gu = sys.jac_u(t + h, x4, u).T @ m4
        m3 = m3 + h * s4
        s3 = sys.jac_x(t + 0.5 * h, x3, u).T @ m3
        gu = gu + sys.jac_u(t + 0.5 * h, x3, u).T @ m3
        m2 = m2 + 0.5 * h * s3
        s2 = sys.jac_x(t + 0.5 * h, x2, u).T @ m2
        gu = gu + sys.jac_u(t + 0.5 * h, x2, u).T @ m2
        m1 = m1 + 0.5 * h * s2
        s1 = sys.jac_x(t, x, u).T @ m1
        gu = gu + sys.jac_u(t, x, u).T @ m1

        grad_u[k] += gu
        lam = gx[k] + lam + s1 + s2 + s3 + s4
    return lam, grad_u


def check_jacobians(sys: OdeSystem, t: float, x, u, h: float = 1e-6) -> tuple[float, float]:
    """Worst relative mismatch of ``jac_x`` and ``jac_u`` against central differences.

    Step sizes are scaled per component by ``max(1, |x_i|)``.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)

    def fd(vec, which):
        cols = []
        for i in range(vec.size):
            step = h * max(1.0, abs(vec[i]))
            e = np.zeros_like(vec)
            e[i] = step
            if which == "x":
                fp, fm = sys.rhs(t, x + e, u), sys.rhs(t, x - e, u)
            else:
                fp, fm = sys.rhs(t, x, u + e), sys.rhs(t, x, u - e)
            cols.append((fp - fm) / (2 * step))
        return np.array(cols).T if cols else np.zeros((sys.n_x, 0))

    def mismatch(a, b):
        if a.size == 0:
            return 0.0
        scale = max(np.max(np.abs(b)), 1e-300)
        return float(np.max(np.abs(a - b)) / scale)

    return mismatch(sys.jac_x(t, x, u), fd(x, "x")), mismatch(sys.jac_u(t, x, u), fd(u, "u"))


def stack_systems(*systems: OdeSystem, name: str = "stacked") -> OdeSystem:
    """Block-diagonal combination of independent systems sharing one time axis."""
    xs = np.cumsum([0] + [s.n_x for s in systems])
    us = np.cumsum([0] + [s.n_u for s in systems])

    def rhs(t, x, u):
        return np.concatenate([s.rhs(t, x[xs[i] : xs[i + 1]], u[us[i] : us[i + 1]]) for i, s in enumerate(systems)])

    def jac(attr, cols):
        def f(t, x, u):
            out = np.zeros((xs[-1], cols[-1]))
            for i, s in enumerate(systems):
                block = getattr(s, attr)(t, x[xs[i] : xs[i + 1]], u[us[i] : us[i + 1]])
                out[xs[i] : xs[i + 1], cols[i] : cols[i + 1]] = block
            return out

        return f

    return OdeSystem(int(xs[-1]), int(us[-1]), rhs, jac("jac_x", xs), jac("jac_u", us), name)


def richardson_order_check(sys: OdeSystem, x0, controls, grid: TimeGrid, exact: Callable[[float], np.ndarray] | None = None):
    """Observed convergence order ``log2(err(dt) / err(dt/2))``.

    Errors are terminal-state errors against ``exact(t_final)`` when given,
    otherwise against an RK4 run at ``dt/8``. ``controls`` are held per coarse
    step and repeated on the refined grids. Returns :data:`EXACT` when both
    errors are at round-off level.
    """
    u = _as_controls(sys, controls, grid.n)

    def terminal(factor: int) -> np.ndarray:
        g = grid.refine(factor)
        return rk4_propagate(sys, x0, np.repeat(u, factor, axis=0), g).final_state

    ref = np.asarray(exact(grid.t_final), dtype=float) if exact is not None else terminal(8)
    e1 = float(np.max(np.abs(terminal(1) - ref)))
    e2 = float(np.max(np.abs(terminal(2) - ref)))
    roundoff = 64.0 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(ref))))
    if e1 <= roundoff and e2 <= roundoff:
        return EXACT
    if e2 == 0.0:
        return math.inf
    return math.log2(e1 / e2)


def adjoint_jacobian(sys: OdeSystem, traj: Trajectory, seeds) -> np.ndarray:
    """Control gradients of several functionals in one backward sweep.

    ``seeds`` has shape (m, n+1, n_x): row ``i`` is ``dJ_i/dx`` at each stored
    state. Returns (m, n, n_u); row ``i`` equals
    ``adjoint_gradient(sys, traj, seeds[i])[1]``.
    """
    grid = traj.grid
    n, h = grid.n, grid.dt
    s = np.asarray(seeds, dtype=float)
    if s.ndim != 3 or s.shape[1:] != (n + 1, sys.n_x):
        raise ValueError(f"seeds must have shape (m, {n + 1}, {sys.n_x}), got {s.shape}")
    m = s.shape[0]
    grad_u = np.zeros((m, n, sys.n_u))
    lam = s[:, n, :].T.copy()
    for k in range(n - 1, -1, -1):
        t = grid.t0 + k * h
        x = traj.states[k]
        u = traj.controls[k]
        k1 = sys.rhs(t, x, u)
        x2 = x + 0.5 * h * k1
        k2 = sys.rhs(t + 0.5 * h, x2, u)
        x3 = x + 0.5 * h * k2
        x4 = x + h * sys.rhs(t + 0.5 * h, x3, u)

        m4 = (h / 6.0) * lam
        s4 = sys.jac_x(t + h, x4, u).T @ m4
        gu = sys.jac_u(t + h, x4, u).T @ m4
        m3 = (h / 3.0) * lam + h * s4
        s3 = sys.jac_x(t + 0.5 * h, x3, u).T @ m3
        gu = gu + sys.jac_u(t + 0.5 * h, x3, u).T @ m3
        m2 = (h / 3.0) * lam + 0.5 * h * s3
        s2 = sys.jac_x(t + 0.5 * h, x2, u).T @ m2
        gu = gu + sys.jac_u(t + 0.5 * h, x2, u).T @ m2
        m1 = (h / 6.0) * lam + 0.5 * h * s2
        s1 = sys.jac_x(t, x, u).T @ m1
        gu = gu + sys.jac_u(t, x, u).T @ m1

        grad_u[:, k, :] = gu.T
        lam = s[:, k, :].T + lam + s1 + s2 + s3 + s4
    return grad_u

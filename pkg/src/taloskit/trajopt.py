"""Virtual-telescope trajectory optimization.

Minimizes propellant use of the optics/detector pair subject to a telescope
length band and a pointing cone inside observation windows and a separation
cap at all times. Pointwise constraints are normalized (0 on the boundary,
negative when satisfied, one unit per tolerance width) and aggregated per
family with KS, giving three scalar constraints. The solver is a PHR
augmented Lagrangian around scipy's L-BFGS-B, with one adjoint sweep per
merit gradient.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .astro import TimeGrid
from .comms import ks_max_grad
from .ode import OdeSystem, Trajectory, adjoint_gradient, adjoint_jacobian, rk4_propagate

log = logging.getLogger(__name__)

ARCSEC = math.pi / (180.0 * 3600.0)
DEFAULT_EPSILON_N = 1e-6
DEFAULT_RHO = 100.0
CONSTRAINT_NAMES = ("length", "pointing", "separation")


class ZeroSeparationError(ValueError):
    """Optics and detector coincide inside an observation window (pointing undefined)."""


@dataclass(frozen=True)
class TelescopeGeometry:
    """Formation geometry from relative positions ``u1``, ``u2`` (km) and sun direction."""

    u1: np.ndarray
    u2: np.ndarray
    s_hat: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.s_hat, dtype=float)
        if abs(np.linalg.norm(s) - 1.0) > 1e-12:
            raise ValueError("s_hat must be a unit vector")
        object.__setattr__(self, "u1", np.asarray(self.u1, dtype=float))
        object.__setattr__(self, "u2", np.asarray(self.u2, dtype=float))
        object.__setattr__(self, "s_hat", s)

    @property
    def d(self) -> np.ndarray:
        return self.u2 - self.u1

    @property
    def separation(self) -> np.ndarray:
        return np.linalg.norm(self.d, axis=-1)

    @property
    def length_along_sun(self) -> np.ndarray:
        return np.abs(self.d @ self.s_hat)

    @property
    def pointing_error(self) -> np.ndarray:
        """Angle between ``d`` and the sun direction (rad), in [0, pi]."""
        d = self.d
        return np.arctan2(np.linalg.norm(np.cross(d, self.s_hat), axis=-1), d @ self.s_hat)

    @property
    def view_plane_error(self) -> np.ndarray:
        """|component of d orthogonal to s_hat| in km (diagnostic only)."""
        d = self.d
        return np.linalg.norm(d - np.multiply.outer(d @ self.s_hat, self.s_hat), axis=-1)


def window_mask(grid: TimeGrid, windows) -> np.ndarray:
    """Boolean mask of grid points that lie inside any closed window."""
    t = grid.times
    mask = np.zeros(t.size, dtype=bool)
    eps = 1e-9 * max(1.0, abs(grid.t_final))
    for a, b in windows:
        if a < grid.t0 - eps or b > grid.t_final + eps:
            raise ValueError(f"observation window ({a}, {b}) outside grid span [{grid.t0}, {grid.t_final}]")
        mask |= (t >= a - eps) & (t <= b + eps)
    return mask


@dataclass(frozen=True)
class TelescopeConstraints:
    """Normalized, KS-aggregated telescope constraints on a formation trajectory.

    States are the stacked 12-vector ``[u1, v1, u2, v2]`` at every grid point.
    """

    grid: TimeGrid
    s_hat: np.ndarray
    in_window: np.ndarray
    length_km: float
    tol_km: float
    halfangle_rad: float
    max_sep_km: float
    rho: float = DEFAULT_RHO

    def __post_init__(self) -> None:
        s = np.asarray(self.s_hat, dtype=float)
        object.__setattr__(self, "s_hat", s / np.linalg.norm(s))
        mask = np.asarray(self.in_window, dtype=bool)
        if mask.shape != (self.grid.n + 1,):
            raise ValueError("in_window must have one flag per grid point")
        for name in ("length_km", "tol_km", "halfangle_rad", "max_sep_km", "rho"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.tol_km >= self.length_km:
            raise ValueError("length tolerance must be smaller than the length")
        object.__setattr__(self, "in_window", mask)
        object.__setattr__(self, "_window_idx", np.flatnonzero(mask))
        # 1 - cos(halfangle) without cancellation
        object.__setattr__(self, "_p_max", 2.0 * math.sin(0.5 * self.halfangle_rad) ** 2)

    @classmethod
    def from_spec(cls, spec, grid: TimeGrid, rho: float = DEFAULT_RHO) -> TelescopeConstraints:
        return cls(
            grid,
            spec.sun_unit,
            window_mask(grid, spec.observation_windows),
            spec.telescope_length_m / 1000.0,
            spec.telescope_length_tol_mm / 1.0e6,
            spec.telescope_view_halfangle_tol_arcsec * ARCSEC,
            spec.max_separation_all_phases_km,
            rho,
        )

    def with_rho(self, rho: float) -> TelescopeConstraints:
        return TelescopeConstraints(
            self.grid, self.s_hat, self.in_window, self.length_km, self.tol_km, self.halfangle_rad, self.max_sep_km, rho
        )

    def _separation_vectors(self, states) -> np.ndarray:
        x = np.asarray(states, dtype=float)
        if x.shape != (self.grid.n + 1, 12):
            raise ValueError(f"expected formation states of shape ({self.grid.n + 1}, 12), got {x.shape}")
        return x[:, 6:9] - x[:, 0:3]

    def _check_window_separation(self, d: np.ndarray) -> None:
        idx = self._window_idx
        if idx.size and np.any(np.linalg.norm(d[idx], axis=1) == 0.0):
            k = int(idx[np.flatnonzero(np.linalg.norm(d[idx], axis=1) == 0.0)[0]])
            raise ZeroSeparationError(f"zero separation inside an observation window at t = {self.grid.times[k]}")

    def pointwise(self, states) -> dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """Per family: ``(g, dg_dd, point_index)`` with normalized values ``g``.

        ``g <= 0`` means satisfied. ``dg_dd`` is the derivative with respect to
        the separation vector ``d = u2 - u1`` at grid point ``point_index``.
        """
        d = self._separation_vectors(states)
        self._check_window_separation(d)
        s = self.s_hat
        out = {}

        idx = self._window_idx
        dw = d[idx]
        ls = dw @ s
        ell = np.abs(ls)
        dl = np.outer(np.sign(ls), s)
        L, tol = self.length_km, self.tol_km
        out["length"] = (
            np.concatenate([(ell - L - tol) / tol, (L - tol - ell) / tol]),
            np.concatenate([dl / tol, -dl / tol]),
            np.concatenate([idx, idx]),
        )

        norm = np.linalg.norm(dw, axis=1)
        q = dw / norm[:, None] if idx.size else np.zeros((0, 3))
        e = q - s
        p = 0.5 * np.einsum("ij,ij->i", e, e)
        cos_t = q @ s
        dp = -(s[None, :] - cos_t[:, None] * q) / norm[:, None] if idx.size else np.zeros((0, 3))
        out["pointing"] = (p / self._p_max - 1.0, dp / self._p_max, idx)

        all_idx = np.arange(d.shape[0])
        sep = np.linalg.norm(d, axis=1)
        safe = np.where(sep > 0, sep, 1.0)
        dsep = np.where(sep[:, None] > 0, d / safe[:, None], 0.0)
        out["separation"] = (sep / self.max_sep_km - 1.0, dsep / self.max_sep_km, all_idx)
        return out

    def evaluate(self, states, with_grad: bool = True, lower: bool = False):
        """KS values ``c`` (3,) and, optionally, ``dc/dstates`` (3, n+1, 12).

        A family with no points (no windows) evaluates to -1 with zero gradient.
        ``lower=True`` subtracts ``ln(n)/rho`` per family, giving a smooth
        under-estimate of the max (used only for solver continuation).
        """
        fam = self.pointwise(states)
        n1 = self.grid.n + 1
        c = np.empty(3)
        grads = np.zeros((3, n1, 12)) if with_grad else None
        for i, name in enumerate(CONSTRAINT_NAMES):
            g, dg, idx = fam[name]
            if g.size == 0:
                c[i] = -1.0
                continue
            c[i], w = ks_max_grad(g, self.rho)
            if lower:
                c[i] -= math.log(g.size) / self.rho
            if with_grad:
                gd = np.zeros((n1, 3))
                np.add.at(gd, idx, w[:, None] * dg)
                grads[i, :, 6:9] = gd
                grads[i, :, 0:3] = -gd
        return (c, grads) if with_grad else c

    def max_pointwise(self, states) -> float:
        """Largest normalized pointwise violation over all families (not aggregated)."""
        fam = self.pointwise(states)
        return max(float(np.max(g)) for g, _, _ in fam.values() if g.size)

    def ks_gap(self) -> float:
        """Upper bound of KS minus hard max over the largest family."""
        n = max(2 * self._window_idx.size, self.grid.n + 1)
        return math.log(n) / self.rho

    def raw_margins(self, states) -> dict[str, np.ndarray]:
        """Signed margins in natural units (positive means violated).

        ``length_km``: |(|d.s| - L)| - tol at window points; ``pointing_rad``:
        angle - halfangle at window points; ``separation_km``: |d| - cap at all points.
        """
        d = self._separation_vectors(states)
        self._check_window_separation(d)
        idx = self._window_idx
        geom = TelescopeGeometry(np.zeros_like(d[idx]), d[idx], self.s_hat)
        return {
            "length_km": np.abs(geom.length_along_sun - self.length_km) - self.tol_km,
            "pointing_rad": geom.pointing_error - self.halfangle_rad,
            "separation_km": np.linalg.norm(d, axis=1) - self.max_sep_km,
        }


def telescope_constraints(traj1: Trajectory, traj2: Trajectory, evaluator: TelescopeConstraints, sys1=None, sys2=None):
    """Aggregated constraint values for two spacecraft trajectories.

    With ``sys1``/``sys2`` given, also returns the gradient of each constraint
    with respect to each spacecraft's controls, ``(grad_u1, grad_u2)`` each of
    shape (3, n, 3), computed by adjoint sweeps.
    """
    if traj1.grid != traj2.grid:
        raise ValueError("trajectories must share a grid")
    states = np.hstack([traj1.states, traj2.states])
    if sys1 is None or sys2 is None:
        return evaluator.evaluate(states, with_grad=False)
    c, dc = evaluator.evaluate(states)
    g1 = np.stack([adjoint_gradient(sys1, traj1, dc[i, :, :6])[1] for i in range(3)])
    g2 = np.stack([adjoint_gradient(sys2, traj2, dc[i, :, 6:])[1] for i in range(3)])
    return c, (g1, g2)


def propellant_objective(thrusts, isp, grid: TimeGrid, epsilon: float = DEFAULT_EPSILON_N, g0: float = 9.80665):
    """Propellant mass (kg) and its gradient with respect to ``thrusts`` (N).

    ``thrusts`` has one row per step; ``isp`` is a scalar or one value per column.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    T = np.asarray(thrusts, dtype=float)
    isp = np.broadcast_to(np.asarray(isp, dtype=float), T.shape[-1:])
    scale = grid.dt / (g0 * isp)
    root = np.sqrt(T * T + epsilon * epsilon)
    J = float(np.sum((root - epsilon) * scale))
    return J, T / root * scale


@dataclass
class TrajOptProblem:
    """Design vector: thrust (N) of both spacecraft, shape (N, 6), columns T1x..T2z."""

    mission: object
    epsilon: float = DEFAULT_EPSILON_N
    rho: float = DEFAULT_RHO
    max_thrust: float | None = None

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        spec = self.mission.spec
        if self.max_thrust is None:
            self.max_thrust = spec.max_thrust_n
        if not self.max_thrust > 0:
            raise ValueError("max_thrust must be positive")
        self.grid: TimeGrid = self.mission.grid
        self.system: OdeSystem = self.mission.formation_system
        self.x0 = np.concatenate([spec.optics_cubesat.initial_state, spec.detector_cubesat.initial_state])
        self.isp = np.repeat([spec.optics_cubesat.specific_impulse, spec.detector_cubesat.specific_impulse], 3)
        self.g0 = self.mission.constants.g0
        tel = self.mission.telescope
        self.constraints_evaluator: TelescopeConstraints = tel if tel.rho == self.rho else tel.with_rho(self.rho)
        # Largest possible propellant use; scales the objective to [0, 1].
        self.objective_scale = float(np.sum(self.grid.n * self.grid.dt * self.max_thrust / (self.g0 * self.isp)))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.grid.n, 6)

    def zero_thrust(self) -> np.ndarray:
        return np.zeros(self.shape)

    def propagate(self, thrusts) -> Trajectory:
        return rk4_propagate(self.system, self.x0, np.asarray(thrusts, dtype=float).reshape(self.shape), self.grid)

    @staticmethod
    def split(traj: Trajectory) -> tuple[Trajectory, Trajectory]:
        return (
            Trajectory(traj.grid, traj.states[:, :6], traj.controls[:, :3]),
            Trajectory(traj.grid, traj.states[:, 6:], traj.controls[:, 3:]),
        )

    def objective(self, thrusts) -> tuple[float, np.ndarray]:
        return propellant_objective(np.asarray(thrusts).reshape(self.shape), self.isp, self.grid, self.epsilon, self.g0)

    def constraints(self, thrusts, with_grad: bool = True):
        """KS constraint values (3,) and their thrust gradients (3, N, 6)."""
        traj = self.propagate(thrusts)
        if not with_grad:
            return self.constraints_evaluator.evaluate(traj.states, with_grad=False)
        c, dc = self.constraints_evaluator.evaluate(traj.states)
        jac = np.stack([adjoint_gradient(self.system, traj, dc[i])[1] for i in range(3)])
        return c, jac

    def formation_metrics(self, traj: Trajectory) -> dict[str, np.ndarray]:
        s = self.constraints_evaluator.s_hat
        geom = TelescopeGeometry(traj.states[:, 0:3], traj.states[:, 6:9], s)
        return {
            "t": traj.times,
            "separation_km": geom.separation,
            "length_along_sun_m": 1000.0 * geom.length_along_sun,
            "pointing_error_arcsec": geom.pointing_error / ARCSEC,
            "view_plane_error_m": 1000.0 * geom.view_plane_error,
            "in_window": self.constraints_evaluator.in_window.astype(int),
        }


def restore_feasibility(problem: TrajOptProblem, thrusts, margin: float = 0.5, max_iter: int = 30):
    """Gauss-Newton projection of ``thrusts`` onto the pointwise-feasible set.

    Every pointwise constraint with ``g > -margin`` is linearized through a
    multi-seed adjoint sweep and the minimum-norm step (in ``T / T_max``)
    driving those rows to ``-margin`` is taken, clipped to the thrust bounds.
    Stops once the largest pointwise value is below ``-ks_gap``, so all three
    KS aggregates are nonpositive. Returns ``(thrusts, max_pointwise)`` for
    the best iterate seen.
    """
    if not 0.0 < margin < 1.0:
        raise ValueError("margin must lie in (0, 1)")
    ev = problem.constraints_evaluator
    Tmax = problem.max_thrust
    n1 = problem.grid.n + 1
    x = np.clip(np.asarray(thrusts, dtype=float).reshape(problem.shape) / Tmax, -1.0, 1.0)
    target = -ev.ks_gap()
    best = None
    for _ in range(max_iter + 1):
        traj = problem.propagate(x * Tmax)
        fam = ev.pointwise(traj.states)
        gmax = max(float(np.max(g)) for g, _, _ in fam.values() if g.size)
        if best is None or gmax < best[1]:
            best = (x.copy(), gmax)
        if gmax <= target:
            break
        seeds, rhs = [], []
        for g, dg, idx in fam.values():
            for a in np.flatnonzero(g > -margin):
                seed = np.zeros((n1, 12))
                seed[idx[a], 6:9] = dg[a]
                seed[idx[a], 0:3] = -dg[a]
                seeds.append(seed)
                rhs.append(-(g[a] + margin))
        A = adjoint_jacobian(problem.system, traj, np.array(seeds)).reshape(len(seeds), -1) * Tmax
        dx = np.linalg.lstsq(A, np.array(rhs), rcond=1e-12)[0]
        x = np.clip(x + dx.reshape(problem.shape), -1.0, 1.0)
    return best[0] * Tmax, best[1]


@dataclass(frozen=True)
class SolverOptions:
    """Augmented-Lagrangian settings.

    ``rho_start`` starts a KS-sharpness continuation: the first inner solves
    use a smooth lower KS estimate with ``rho_start``, growing by
    ``rho_growth`` each outer iteration until it reaches the problem's rho.
    ``None`` disables the continuation.

    With ``restoration`` on, an infeasible start and every infeasible inner
    result are projected back onto the feasible set by
    :func:`restore_feasibility` before being scored.
    """

    max_outer: int = 30
    feas_tol: float = 1e-3
    opt_tol: float = 1e-6
    inner_maxiter: int = 300
    mu0: float = 10.0
    mu_growth: float = 10.0
    mu_max: float = 1e8
    lbfgs_memory: int = 30
    rho_start: float | None = None
    rho_growth: float = 10.0
    restoration: bool = True
    restoration_margin: float = 0.5

    def __post_init__(self) -> None:
        if self.max_outer < 1 or self.inner_maxiter < 1:
            raise ValueError("iteration caps must be at least 1")
        if not (self.feas_tol > 0 and self.opt_tol > 0 and self.mu0 > 0 and self.mu_growth > 1 and self.mu_max >= self.mu0):
            raise ValueError("invalid solver tolerances or penalty settings")
        if self.rho_start is not None and not (self.rho_start > 0 and self.rho_growth > 1):
            raise ValueError("invalid KS continuation settings")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    objective: float
    feasibility: float
    optimality: float


@dataclass(frozen=True)
class SolverReport:
    history: tuple[IterationRecord, ...]
    termination: str
    converged: bool
    merit_trace: tuple[tuple[float, ...], ...] = field(default=(), repr=False)
    wall_time_s: float = 0.0

    @property
    def final(self) -> IterationRecord:
        return self.history[-1]


@dataclass(frozen=True)
class SolveResult:
    thrusts: np.ndarray
    trajectory: Trajectory
    optics: Trajectory
    detector: Trajectory
    report: SolverReport
    constraint_values: np.ndarray
    multipliers: np.ndarray


def _phr(c: np.ndarray, lam: np.ndarray, mu: float) -> tuple[float, np.ndarray]:
    """PHR penalty for inequalities ``c <= 0``: value and derivative with respect to ``c``."""
    shifted = np.maximum(0.0, lam + mu * c)
    return float(np.sum(shifted**2 - lam**2) / (2.0 * mu)), shifted


def solve(problem: TrajOptProblem, options: SolverOptions | None = None, initial_guess=None) -> SolveResult:
    """Augmented-Lagrangian solve from zero thrust (or ``initial_guess``).

    Design variables are scaled to ``T / T_max`` in [-1, 1]; the objective is
    divided by ``problem.objective_scale``. After every inner solve the
    iterate is scored with the problem's own KS constraints: feasibility is
    ``max(0, max c)`` and optimality is the infinity norm of the projected
    augmented-Lagrangian gradient in scaled variables.
    """
    opts = options or SolverOptions()
    start = time.perf_counter()
    Tmax = problem.max_thrust
    shape = problem.shape
    x = np.zeros(shape).ravel() if initial_guess is None else np.asarray(initial_guess, dtype=float).ravel() / Tmax
    if x.size != shape[0] * shape[1]:
        raise ValueError(f"initial guess must have {shape[0] * shape[1]} values")
    x = np.clip(x, -1.0, 1.0)

    def restore(xs):
        T, _ = restore_feasibility(problem, xs.reshape(shape) * Tmax, opts.restoration_margin)
        return T.ravel() / Tmax

    if opts.restoration:
        x = restore(x)
    lam = np.zeros(3)
    mu = opts.mu0
    sys = problem.system
    final_eval = problem.constraints_evaluator
    rho = final_eval.rho if opts.rho_start is None else min(final_eval.rho, opts.rho_start)

    def merit(xs: np.ndarray, lam: np.ndarray, mu: float, ev: TelescopeConstraints):
        T = (xs * Tmax).reshape(shape)
        J, dJ = problem.objective(T)
        traj = problem.propagate(T)
        c, dc = ev.evaluate(traj.states, lower=ev is not final_eval)
        pen, w = _phr(c, lam, mu)
        _, gu = adjoint_gradient(sys, traj, np.tensordot(w, dc, axes=1))
        value = J / problem.objective_scale + pen
        grad = (dJ / problem.objective_scale + gu).ravel() * Tmax
        return value, grad, J, c

    def projected_norm(xs, g) -> float:
        return float(np.max(np.abs(xs - np.clip(xs - g, -1.0, 1.0)))) if xs.size else 0.0

    history: list[IterationRecord] = []
    traces: list[tuple[float, ...]] = []
    termination = "iteration cap reached"
    converged = False
    best = None
    inner_viol: list[float] = []
    for it in range(1, opts.max_outer + 1):
        ev = final_eval if rho >= final_eval.rho else final_eval.with_rho(rho)
        cache: dict[bytes, tuple] = {}
        accepted: list[float] = []

        def fun(xs, lam=lam, mu=mu, ev=ev, cache=cache):
            key = xs.tobytes()
            if key not in cache:
                cache.clear()
                cache[key] = merit(xs, lam, mu, ev)
            v, g, _, _ = cache[key]
            return v, g

        def callback(xs, cache=cache, accepted=accepted):
            hit = cache.get(xs.tobytes())
            if hit is not None:
                accepted.append(hit[0])

        accepted.append(fun(x)[0])
        res = minimize(
            fun,
            x,
            jac=True,
            method="L-BFGS-B",
            bounds=[(-1.0, 1.0)] * x.size,
            callback=callback,
            options={
                "maxiter": opts.inner_maxiter,
                "maxcor": opts.lbfgs_memory,
                "gtol": 0.1 * opts.opt_tol,
                "ftol": 1e-15,
                "maxls": 40,
            },
        )
        x = np.asarray(res.x, dtype=float)
        traces.append(tuple(accepted))
        fun(x)
        c_inner = cache[x.tobytes()][3]
        # PHR multiplier update from the inner solution
        lam_next = np.maximum(0.0, lam + mu * c_inner)
        if opts.restoration and final_eval.max_pointwise(problem.propagate((x * Tmax).reshape(shape)).states) > 0.0:
            x = restore(x)
        _, grad, J, c = merit(x, lam, mu, final_eval)
        feas = max(0.0, float(np.max(c)))
        opt = projected_norm(x, grad)
        history.append(IterationRecord(it, J, feas, opt))
        log.info("outer %d: J=%.6e feas=%.3e opt=%.3e mu=%.1e rho=%.3g (%s)", it, J, feas, opt, mu, rho, res.message)
        if best is None or (feas, J) < (best[1], best[2]):
            best = (x.copy(), feas, J)
        if feas < opts.feas_tol and opt < opts.opt_tol:
            termination = "converged"
            converged = True
            break
        if "ABNORMAL" in str(res.message).upper():
            termination = "line-search failure"
            break
        # grow the penalty when the inner solves keep violating
        lam = lam_next
        inner_viol.append(max(0.0, float(np.max(c_inner))))
        if len(inner_viol) > 1 and inner_viol[-1] > 0.25 * inner_viol[-2]:
            mu = min(mu * opts.mu_growth, opts.mu_max)
        rho = min(final_eval.rho, rho * opts.rho_growth)

    x_final = x if converged else best[0]
    T = (x_final * Tmax).reshape(shape)
    traj = problem.propagate(T)
    c_final = final_eval.evaluate(traj.states, with_grad=False)
    report = SolverReport(tuple(history), termination, converged, tuple(traces), time.perf_counter() - start)
    optics, detector = problem.split(traj)
    return SolveResult(T, traj, optics, detector, report, c_final, lam)


def report_convergence(report: SolverReport, path) -> None:
    """Write ``iter, objective, feasibility, optimality`` rows with a header."""
    if not report.history:
        raise ValueError("report has no iterations")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "objective", "feasibility", "optimality"])
        for r in report.history:
            w.writerow([r.iteration, repr(float(r.objective)), repr(float(r.feasibility)), repr(float(r.optimality))])


def write_thrust_csv(grid: TimeGrid, thrusts, path) -> None:
    T = np.asarray(thrusts, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "T1x", "T1y", "T1z", "T2x", "T2y", "T2z"])
        for k in range(grid.n):
            w.writerow([repr(float(grid.t0 + k * grid.dt))] + [repr(float(v)) for v in T[k]])


def write_formation_csv(metrics: dict[str, np.ndarray], path) -> None:
    cols = ["t", "separation_km", "length_along_sun_m", "pointing_error_arcsec", "view_plane_error_m", "in_window"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for i in range(metrics["t"].size):
            w.writerow([repr(float(metrics[c][i])) if c != "in_window" else str(int(metrics[c][i])) for c in cols])

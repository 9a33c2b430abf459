"""Zonal (J2/J3/J4) gravity, absolute orbit dynamics and relative motion about a reference orbit."""

from __future__ import annotations

import hashlib
import logging
import math
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .astro import PhysicalConstants, TimeGrid, standard_earth_constants
from .ode import OdeSystem, rk4_propagate

log = logging.getLogger(__name__)

CACHE_FORMAT_VERSION = 1
_HEADER = struct.Struct("<I32sQdd")


class GuardRadiusError(ValueError):
    """Position inside the guard radius (Re/2) where the zonal model is meaningless."""


def _check_guard(r: np.ndarray, k: PhysicalConstants) -> np.ndarray:
    s = np.einsum("...i,...i->...", r, r)
    if np.any(~(s > (0.5 * k.Re) ** 2)):
        raise GuardRadiusError(f"|r| must exceed Re/2 = {0.5 * k.Re} km")
    return s


def zonal_gravity_accel(r, constants: PhysicalConstants | None = None) -> np.ndarray:
    """Point-mass plus J2, J3, J4 acceleration in km/s^2.

    ``r`` may be a single ECI position (km) or a stack of them with shape ``(..., 3)``.
    """
    k = constants or standard_earth_constants()
    r = np.asarray(r, dtype=float)
    if r.shape == (3,):
        return _accel_single(float(r[0]), float(r[1]), float(r[2]), k)
    s = _check_guard(r, k)
    rn = np.sqrt(s)
    rz = r[..., 2]
    mu, Re = k.mu, k.Re

    point = -mu / rn**3
    j2 = -3.0 * mu * k.J2 * Re**2 / (2.0 * rn**5)
    j3 = -5.0 * mu * k.J3 * Re**3 / (2.0 * rn**7)
    j4 = 15.0 * mu * k.J4 * Re**4 / (8.0 * rn**7)

    along_r = (
        point
        + j2 * (1.0 - 5.0 * rz**2 / s)
        + j3 * (3.0 * rz - 7.0 * rz**3 / s)
        + j4 * (1.0 - 14.0 * rz**2 / s + 21.0 * rz**4 / s**2)
    )
    # J3 z-bracket (3 rz - 3 r^2 / (5 rz)) rz, multiplied out so rz = 0 stays finite.
    along_z = j2 * 2.0 * rz + j3 * (3.0 * rz**2 - 0.6 * s) + j4 * (4.0 - 28.0 * rz**2 / (3.0 * s)) * rz

    a = along_r[..., None] * r
    a[..., 2] += along_z
    return a


def _accel_single(x: float, y: float, z: float, k: PhysicalConstants) -> np.ndarray:
    return np.array(_accel_tuple(x, y, z, k))


def _accel_tuple(x: float, y: float, z: float, k: PhysicalConstants) -> tuple[float, float, float]:
    # Scalar path of zonal_gravity_accel; same terms, no array overhead.
    s = x * x + y * y + z * z
    if not s > (0.5 * k.Re) ** 2:
        raise GuardRadiusError(f"|r| must exceed Re/2 = {0.5 * k.Re} km")
    rn = math.sqrt(s)
    mu, Re = k.mu, k.Re
    r5 = rn * rn * rn * rn * rn
    r7 = r5 * s
    point = -mu / (rn * s)
    j2 = -3.0 * mu * k.J2 * Re**2 / (2.0 * r5)
    j3 = -5.0 * mu * k.J3 * Re**3 / (2.0 * r7)
    j4 = 15.0 * mu * k.J4 * Re**4 / (8.0 * r7)
    zz = z * z
    along_r = (
        point
        + j2 * (1.0 - 5.0 * zz / s)
        + j3 * (3.0 * z - 7.0 * z * zz / s)
        + j4 * (1.0 - 14.0 * zz / s + 21.0 * zz * zz / (s * s))
    )
    along_z = j2 * 2.0 * z + j3 * (3.0 * zz - 0.6 * s) + j4 * (4.0 - 28.0 * zz / (3.0 * s)) * z
    return (along_r * x, along_r * y, along_r * z + along_z)


def zonal_gravity_jacobian(r, constants: PhysicalConstants | None = None) -> np.ndarray:
    """d(accel)/dr in 1/s^2 for a single position.

    Writing the field as ``A(s, z) r + B(s, z) z_hat`` with ``s = |r|^2``, the
    Jacobian is ``A I + r (2 A_s r + A_z z_hat)^T + z_hat (2 B_s r + B_z z_hat)^T``.
    """
    k = constants or standard_earth_constants()
    x, y, z = (float(c) for c in np.asarray(r, dtype=float).reshape(3))
    return np.array(_jacobian_rows(x, y, z, k))


def _jacobian_rows(x: float, y: float, z: float, k: PhysicalConstants) -> list[list[float]]:
    s = x * x + y * y + z * z
    if not s > (0.5 * k.Re) ** 2:
        raise GuardRadiusError(f"|r| must exceed Re/2 = {0.5 * k.Re} km")
    mu, Re = k.mu, k.Re
    k2 = -1.5 * mu * k.J2 * Re**2
    k3 = -2.5 * mu * k.J3 * Re**3
    k4 = 1.875 * mu * k.J4 * Re**4
    p3 = s ** -1.5
    p5 = p3 / s
    p7 = p5 / s
    p9 = p7 / s
    p11 = p9 / s
    p13 = p11 / s
    z2, z3, z4 = z * z, z * z * z, z * z * z * z

    A = -mu * p3 + k2 * (p5 - 5 * z2 * p7) + k3 * (3 * z * p7 - 7 * z3 * p9) + k4 * (p7 - 14 * z2 * p9 + 21 * z4 * p11)
    A_s = (
        1.5 * mu * p5
        + k2 * (-2.5 * p7 + 17.5 * z2 * p9)
        + k3 * (-10.5 * z * p9 + 31.5 * z3 * p11)
        + k4 * (-3.5 * p9 + 63 * z2 * p11 - 115.5 * z4 * p13)
    )
    A_z = k2 * (-10 * z * p7) + k3 * (3 * p7 - 21 * z2 * p9) + k4 * (-28 * z * p9 + 84 * z3 * p11)
    B_s = k2 * (-5 * z * p7) + k3 * (-10.5 * z2 * p9 + 1.5 * p7) + k4 * (-14 * z * p9 + 42 * z3 * p11)
    B_z = k2 * 2 * p5 + k3 * 6 * z * p7 + k4 * (4 * p7 - 28 * z2 * p9)

    gx, gy, gz = 2 * A_s * x, 2 * A_s * y, 2 * A_s * z + A_z
    hx, hy, hz = 2 * B_s * x, 2 * B_s * y, 2 * B_s * z + B_z
    return [
        [A + x * gx, x * gy, x * gz],
        [y * gx, A + y * gy, y * gz],
        [z * gx + hx, z * gy + hy, A + z * gz + hz],
    ]


def make_absolute_system(constants: PhysicalConstants | None = None, mass: float = 1.0, isp: float = 1.0) -> OdeSystem:
    """ECI dynamics ``(r, v)`` with thrust ``T`` in N entering as ``T / (1000 m)`` km/s^2."""
    if not mass > 0:
        raise ValueError(f"mass must be positive, got {mass!r}")
    if not isp > 0:
        raise ValueError(f"isp must be positive, got {isp!r}")
    k = constants or standard_earth_constants()
    inv_m = 1.0 / (1000.0 * mass)
    B = np.zeros((6, 3))
    B[3:] = inv_m * np.eye(3)

    def rhs(t, x, u):
        a = zonal_gravity_accel(x[:3], k)
        if u.size:
            a = a + inv_m * u
        return np.concatenate([x[3:], a])

    def jac_x(t, x, u):
        J = np.zeros((6, 6))
        J[:3, 3:] = np.eye(3)
        J[3:, :3] = zonal_gravity_jacobian(x[:3], k)
        return J

    return OdeSystem(6, 3, rhs, jac_x, lambda t, x, u: B, "absolute-orbit")


def provenance_hash(constants: PhysicalConstants, initial_state, grid: TimeGrid) -> str:
    """SHA-256 over the packed float64 values that determine a reference orbit."""
    c = constants.as_dict()
    payload = struct.pack(f"<{len(c)}d", *c.values())
    payload += struct.pack("<6d", *np.asarray(initial_state, dtype=float))
    payload += struct.pack("<ddQ", grid.t0, grid.dt, grid.n)
    return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class ReferenceOrbit:
    """Zero-thrust absolute trajectory sampled on ``grid``."""

    grid: TimeGrid
    states: np.ndarray
    provenance: str
    constants: PhysicalConstants = field(default_factory=standard_earth_constants)
    from_cache: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        self.states.setflags(write=False)
        if self.states.shape != (self.grid.n + 1, 6):
            raise ValueError(f"reference states must have shape ({self.grid.n + 1}, 6)")
        accel = zonal_gravity_accel(self.states[:, :3], self.constants)
        accel.setflags(write=False)
        object.__setattr__(self, "_accel", accel)

    def _locate(self, t: float) -> tuple[int, float]:
        g = self.grid
        x = (t - g.t0) / g.dt
        tol = 1e-9 * max(1.0, abs(x))
        if x < -tol or x > g.n + tol:
            raise ValueError(f"t = {t} outside reference coverage [{g.t0}, {g.t_final}]")
        i = int(round(x))
        if abs(x - i) <= tol:
            return min(max(i, 0), g.n), 0.0
        i = int(np.floor(x))
        return i, x - i

    def position(self, t: float) -> np.ndarray:
        i, w = self._locate(t)
        if w == 0.0:
            return self.states[i, :3]
        return (1.0 - w) * self.states[i, :3] + w * self.states[i + 1, :3]

    def accel(self, t: float) -> np.ndarray:
        """Gravity at the reference position, exact lookup on samples."""
        i, w = self._locate(t)
        if w == 0.0:
            return self._accel[i]
        return zonal_gravity_accel(self.position(t), self.constants)

    def covers(self, grid: TimeGrid) -> bool:
        eps = 1e-9 * max(1.0, abs(grid.t_final))
        return grid.t0 >= self.grid.t0 - eps and grid.t_final <= self.grid.t_final + eps


def _cache_path(cache_dir, digest: str) -> Path:
    return Path(cache_dir) / f"reference-{digest}.bin"


def write_reference_cache(path, ref: ReferenceOrbit) -> None:
    """Write ``ref`` atomically (temp file then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = _HEADER.pack(CACHE_FORMAT_VERSION, bytes.fromhex(ref.provenance), ref.grid.n, ref.grid.dt, ref.grid.t0)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".reference-", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(ref.states, dtype="<f8").tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_reference_cache(path) -> tuple[str, TimeGrid, np.ndarray]:
    """Return ``(provenance, grid, states)`` from a cache file; raises ``ValueError`` on bad data."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError("truncated reference cache header")
    version, digest, n, dt, t0 = _HEADER.unpack_from(data)
    if version != CACHE_FORMAT_VERSION:
        raise ValueError(f"unsupported cache format version {version}")
    body = data[_HEADER.size :]
    if len(body) != (n + 1) * 6 * 8:
        raise ValueError("reference cache body size does not match header")
    states = np.frombuffer(body, dtype="<f8").reshape(n + 1, 6).astype(float)
    return digest.hex(), TimeGrid(t0, dt, n), states


def precompute_reference(
    constants: PhysicalConstants | None,
    initial_state,
    grid: TimeGrid,
    cache_dir=None,
) -> ReferenceOrbit:
    """Propagate the zero-thrust reference orbit, reading/writing a cache when ``cache_dir`` is set.

    Cache problems are logged and the orbit is recomputed.
    """
    k = constants or standard_earth_constants()
    x0 = np.asarray(initial_state, dtype=float)
    if x0.shape != (6,) or not np.all(np.isfinite(x0)):
        raise ValueError("reference initial state must be 6 finite values")
    digest = provenance_hash(k, x0, grid)
    path = _cache_path(cache_dir, digest) if cache_dir is not None else None

    if path is not None and path.exists():
        try:
            cached_digest, cached_grid, states = read_reference_cache(path)
            if cached_digest == digest and cached_grid == grid:
                return ReferenceOrbit(grid, states, digest, k, from_cache=True)
            log.warning("reference cache %s does not match its key; recomputing", path)
        except (OSError, ValueError) as exc:
            log.warning("unreadable reference cache %s (%s); recomputing", path, exc)

    sys = make_absolute_system(k)
    traj = rk4_propagate(sys, x0, np.zeros((grid.n, 3)), grid)
    ref = ReferenceOrbit(grid, np.array(traj.states), digest, k)
    if path is not None:
        try:
            write_reference_cache(path, ref)
        except OSError as exc:
            log.warning("could not write reference cache %s (%s)", path, exc)
    return ref


def make_relative_system(
    reference: ReferenceOrbit,
    constants: PhysicalConstants | None = None,
    mass: float = 1.0,
    isp: float = 1.0,
) -> OdeSystem:
    """Offset dynamics ``u'' = g(r0 + u) - g(r0) + T / (1000 m)`` about ``reference``.

    The reference position is looked up exactly at sample times and linearly
    interpolated between them. RK4 evaluates at half steps, so a reference
    sampled at ``dt/2`` keeps every evaluation on a sample.
    """
    if not mass > 0:
        raise ValueError(f"mass must be positive, got {mass!r}")
    if not isp > 0:
        raise ValueError(f"isp must be positive, got {isp!r}")
    k = constants or reference.constants
    inv_m = 1.0 / (1000.0 * mass)
    B = np.zeros((6, 3))
    B[3:] = inv_m * np.eye(3)

    same_field = k == reference.constants

    def rhs(t, x, u):
        r0 = reference.position(t)
        g0 = reference.accel(t) if same_field else zonal_gravity_accel(r0, k)
        a = zonal_gravity_accel(r0 + x[:3], k) - g0
        if u.size:
            a = a + inv_m * u
        return np.concatenate([x[3:], a])

    def jac_x(t, x, u):
        J = np.zeros((6, 6))
        J[:3, 3:] = np.eye(3)
        J[3:, :3] = zonal_gravity_jacobian(reference.position(t) + x[:3], k)
        return J

    return OdeSystem(6, 3, rhs, jac_x, lambda t, x, u: B, "relative-orbit")


def reference_grid_for(grid: TimeGrid) -> TimeGrid:
    """Half-step grid covering ``grid`` so that every RK4 stage time is a sample."""
    return TimeGrid(grid.t0, grid.dt / 2.0, 2 * grid.n)


def make_formation_system(
    reference: ReferenceOrbit,
    constants: PhysicalConstants | None = None,
    masses=(1.0, 1.0),
    isps=(1.0, 1.0),
) -> OdeSystem:
    """Several spacecraft in relative motion about one reference, as one system.

    Numerically the same as stacking :func:`make_relative_system` instances;
    the reference lookup is shared and memoized per stage time, which is
    what the optimizer's repeated propagations spend most of their time on.
    """
    masses = tuple(float(m) for m in masses)
    if len(masses) != len(tuple(isps)) or not masses:
        raise ValueError("masses and isps must have the same nonzero length")
    if min(masses) <= 0 or min(float(v) for v in isps) <= 0:
        raise ValueError("masses and isps must be positive")
    k = constants or reference.constants
    same_field = k == reference.constants
    m = len(masses)
    inv_m = [1.0 / (1000.0 * mass) for mass in masses]
    B = np.zeros((6 * m, 3 * m))
    for i, c in enumerate(inv_m):
        B[6 * i + 3 : 6 * i + 6, 3 * i : 3 * i + 3] = c * np.eye(3)
    samples: dict[float, tuple] = {}

    def lookup(t):
        hit = samples.get(t)
        if hit is None:
            r0 = reference.position(t)
            g0 = reference.accel(t) if same_field else zonal_gravity_accel(r0, k)
            hit = (float(r0[0]), float(r0[1]), float(r0[2]), float(g0[0]), float(g0[1]), float(g0[2]))
            if len(samples) > 200_000:
                samples.clear()
            samples[t] = hit
        return hit

    def rhs(t, x, u):
        X, Y, Z, gx, gy, gz = lookup(t)
        xl = x.tolist()
        ul = u.tolist()
        out = []
        for i in range(m):
            o = 6 * i
            ax, ay, az = _accel_tuple(X + xl[o], Y + xl[o + 1], Z + xl[o + 2], k)
            c = inv_m[i]
            out += [xl[o + 3], xl[o + 4], xl[o + 5]]
            out += [ax - gx + c * ul[3 * i], ay - gy + c * ul[3 * i + 1], az - gz + c * ul[3 * i + 2]]
        return np.array(out)

    def jac_x(t, x, u):
        X, Y, Z = lookup(t)[:3]
        xl = x.tolist()
        J = np.zeros((6 * m, 6 * m))
        for i in range(m):
            o = 6 * i
            J[o : o + 3, o + 3 : o + 6] = np.eye(3)
            J[o + 3 : o + 6, o : o + 3] = _jacobian_rows(X + xl[o], Y + xl[o + 1], Z + xl[o + 2], k)
        return J

    return OdeSystem(6 * m, 3 * m, rhs, jac_x, lambda t, x, u: B, "formation")

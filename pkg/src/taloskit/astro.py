"""Physical constants, time grids and Earth-frame helpers shared by every discipline."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PhysicalConstants:
    """Earth and physics constants.

    Distances are in km so that orbit states stay in km and km/s; ``g0`` and
    ``c`` keep SI units because they only appear in mass-flow and link-budget
    formulas.
    """

    mu: float  # km^3/s^2
    Re: float  # km
    J2: float
    J3: float
    J4: float
    g0: float = 9.80665  # m/s^2
    c: float = 299792458.0  # m/s
    k_B: float = 1.380649e-23  # J/K
    omega_E: float = 7.2921159e-5  # rad/s

    def __post_init__(self) -> None:
        for name in ("mu", "Re", "g0", "c", "k_B", "omega_E"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"PhysicalConstants.{name} must be positive and finite, got {value!r}")
        for name in ("J2", "J3", "J4"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"PhysicalConstants.{name} must be finite")

    def as_dict(self) -> dict[str, float]:
        return {
            "mu": self.mu,
            "Re": self.Re,
            "J2": self.J2,
            "J3": self.J3,
            "J4": self.J4,
            "g0": self.g0,
            "c": self.c,
            "k_B": self.k_B,
            "omega_E": self.omega_E,
        }


def standard_earth_constants() -> PhysicalConstants:
    """EGM/WGS84 reference values."""
    return PhysicalConstants(
        mu=3.986004418e5,
        Re=6378.137,
        J2=1.08262668e-3,
        J3=-2.53265648e-6,
        J4=-1.61962159e-6,
    )


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t0 + i*dt`` for ``i`` in ``0..n`` (``n`` steps, ``n + 1`` points)."""

    t0: float
    dt: float
    n: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"TimeGrid.dt must be positive, got {self.dt!r}")
        if int(self.n) != self.n or self.n < 0:
            raise ValueError(f"TimeGrid.n must be a nonnegative integer, got {self.n!r}")
        if not math.isfinite(self.t0):
            raise ValueError("TimeGrid.t0 must be finite")
        object.__setattr__(self, "n", int(self.n))

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n + 1)

    @property
    def t_final(self) -> float:
        return self.t0 + self.dt * self.n

    def refine(self, factor: int) -> TimeGrid:
        """Same span with ``factor`` times as many steps."""
        return TimeGrid(self.t0, self.dt / factor, self.n * factor)


def gmst_rotation(t: float, omega_E: float = 7.2921159e-5) -> np.ndarray:
    """ECI -> ECEF rotation for an Earth angle ``omega_E * t`` (zero at epoch)."""
    theta = omega_E * t
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def geodetic_to_eci(
    lon: float,
    lat: float,
    alt: float,
    t: float,
    constants: PhysicalConstants | None = None,
) -> np.ndarray:
    """Place a site on a spherical Earth and rotate it into ECI at time ``t``.

    Args:
        lon: East longitude in degrees, within [-180, 180].
        lat: Latitude in degrees, within [-90, 90].
        alt: Altitude above the sphere in km.
        t: Seconds since epoch.
        constants: Defaults to :func:`standard_earth_constants`.

    Returns:
        ECI position in km with norm ``Re + alt``.
    """
    if not -90.0 <= lat <= 90.0:
        raise ValueError(f"latitude {lat!r} outside [-90, 90]")
    if not -180.0 <= lon <= 180.0:
        raise ValueError(f"longitude {lon!r} outside [-180, 180]")
    if not alt >= 0.0:
        raise ValueError(f"altitude {alt!r} must be nonnegative")
    k = constants or standard_earth_constants()
    radius = k.Re + alt
    phi, lam = math.radians(lat), math.radians(lon)
    r_ecef = radius * np.array([math.cos(phi) * math.cos(lam), math.cos(phi) * math.sin(lam), math.sin(phi)])
    return gmst_rotation(t, k.omega_E).T @ r_ecef


def circular_orbit_state(altitude_km: float, inclination_deg: float, constants: PhysicalConstants | None = None) -> np.ndarray:
    """Circular orbit state starting at the ascending node on the +x axis."""
    k = constants or standard_earth_constants()
    r = k.Re + altitude_km
    v = math.sqrt(k.mu / r)
    inc = math.radians(inclination_deg)
    return np.array([r, 0.0, 0.0, 0.0, v * math.cos(inc), v * math.sin(inc)])


def default_reference_state(constants: PhysicalConstants | None = None) -> np.ndarray:
    """Toolkit default sun-synchronous-like state: 600 km altitude, 97.8 deg inclination."""
    return circular_orbit_state(600.0, 97.8, constants)


def orbital_period(state: np.ndarray, constants: PhysicalConstants | None = None) -> float:
    """Two-body period of ``state`` (from its vis-viva semi-major axis)."""
    k = constants or standard_earth_constants()
    r = float(np.linalg.norm(state[:3]))
    v2 = float(np.dot(state[3:], state[3:]))
    a = 1.0 / (2.0 / r - v2 / k.mu)
    return 2.0 * math.pi * math.sqrt(a**3 / k.mu)

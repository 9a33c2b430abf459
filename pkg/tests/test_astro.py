import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from taloskit.astro import (
    PhysicalConstants,
    TimeGrid,
    circular_orbit_state,
    default_reference_state,
    geodetic_to_eci,
    gmst_rotation,
    orbital_period,
    standard_earth_constants,
)


def test_time_grid_layout():
    g = TimeGrid(10.0, 0.5, 4)
    np.testing.assert_array_equal(g.times, [10.0, 10.5, 11.0, 11.5, 12.0])
    assert g.t_final == 12.0
    fine = g.refine(2)
    assert fine.n == 8 and fine.dt == 0.25 and fine.t_final == g.t_final


@pytest.mark.parametrize("dt", [0.0, -1.0, math.inf, math.nan])
def test_time_grid_rejects_bad_step(dt):
    with pytest.raises(ValueError):
        TimeGrid(0.0, dt, 3)


def test_time_grid_rejects_fractional_count():
    with pytest.raises(ValueError):
        TimeGrid(0.0, 1.0, 2.5)


def test_constants_validation():
    with pytest.raises(ValueError):
        PhysicalConstants(mu=-1.0, Re=6378.0, J2=0.0, J3=0.0, J4=0.0)
    with pytest.raises(ValueError):
        PhysicalConstants(mu=1.0, Re=6378.0, J2=math.nan, J3=0.0, J4=0.0)


def test_station_on_sphere_and_rotates_with_earth(constants):
    r0 = geodetic_to_eci(-117.234, 32.8801, 0.4849, 0.0, constants)
    assert np.linalg.norm(r0) == pytest.approx(constants.Re + 0.4849, rel=1e-15)
    # after one sidereal rotation the site returns to the same inertial point
    r1 = geodetic_to_eci(-117.234, 32.8801, 0.4849, 2 * math.pi / constants.omega_E, constants)
    np.testing.assert_allclose(r1, r0, atol=1e-9)
    # a quarter turn later the site has moved east by 90 degrees
    r2 = geodetic_to_eci(0.0, 0.0, 0.0, 0.5 * math.pi / constants.omega_E, constants)
    np.testing.assert_allclose(r2, [0.0, constants.Re, 0.0], atol=1e-9)


@pytest.mark.parametrize("lon,lat,alt", [(0, 95, 0), (181, 0, 0), (0, 0, -1)])
def test_station_ranges(lon, lat, alt):
    with pytest.raises(ValueError):
        geodetic_to_eci(lon, lat, alt, 0.0)


@given(st.floats(0, 1e6))
def test_gmst_rotation_orthonormal(t):
    R = gmst_rotation(t)
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-14)
    assert np.linalg.det(R) == pytest.approx(1.0)


def test_circular_orbit_state(constants):
    x = circular_orbit_state(600.0, 97.8, constants)
    assert np.linalg.norm(x[:3]) == pytest.approx(constants.Re + 600.0)
    assert np.linalg.norm(x[3:]) == pytest.approx(math.sqrt(constants.mu / (constants.Re + 600.0)))
    h = np.cross(x[:3], x[3:])
    assert math.degrees(math.acos(h[2] / np.linalg.norm(h))) == pytest.approx(97.8)
    np.testing.assert_array_equal(default_reference_state(constants), x)


def test_orbital_period_circular(constants):
    x = circular_orbit_state(600.0, 0.0, constants)
    a = constants.Re + 600.0
    assert orbital_period(x, constants) == pytest.approx(2 * math.pi * math.sqrt(a**3 / constants.mu), rel=1e-14)


def test_standard_constants_snapshot():
    k = standard_earth_constants()
    assert k.as_dict()["mu"] == 3.986004418e5
    assert set(k.as_dict()) == {"mu", "Re", "J2", "J3", "J4", "g0", "c", "k_B", "omega_E"}

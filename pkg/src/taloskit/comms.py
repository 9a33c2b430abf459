"""Ground-station downlink: link budget, line of sight, station aggregation and data volume."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .astro import PhysicalConstants, TimeGrid, geodetic_to_eci, standard_earth_constants


@dataclass(frozen=True)
class LinkParameters:
    """Link-budget inputs. Defaults are toolkit values for a UHF CubeSat downlink."""

    Gr: float = 1.0e4  # receiver gain
    Gt: float = 1.0  # transmitter gain (omnidirectional)
    Ll: float = 0.9  # line loss factor
    f: float = 437.0e6  # Hz
    Ts: float = 500.0  # K
    SNR: float = 10.0
    eta_p: float = 0.3
    P_comm: float = 2.0  # W

    def __post_init__(self) -> None:
        for name in ("Gr", "Gt", "Ll", "f", "Ts", "SNR", "eta_p", "P_comm"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"link parameter {name} must be positive, got {value!r}")
        if self.Ll > 1:
            raise ValueError("line loss factor Ll must lie in (0, 1]")
        if self.eta_p > 1:
            raise ValueError("amplifier efficiency eta_p must lie in (0, 1]")

    def as_dict(self) -> dict[str, float]:
        return {k: float(getattr(self, k)) for k in ("Gr", "Gt", "Ll", "f", "Ts", "SNR", "eta_p", "P_comm")}


def line_of_sight(r_sc, r_gs) -> int:
    """1 when the spacecraft is strictly above the station's local horizon plane."""
    r_sc = np.asarray(r_sc, dtype=float)
    r_gs = np.asarray(r_gs, dtype=float)
    return int(float(np.dot(r_sc - r_gs, r_gs)) > 0.0)


def download_rate(link: LinkParameters, S: float, los: int, constants: PhysicalConstants | None = None) -> float:
    """Downlink bit rate (bit/s) for slant range ``S`` in km."""
    if not S > 0:
        raise ValueError(f"slant range must be positive, got {S!r}")
    k = constants or standard_earth_constants()
    S_m = S * 1000.0
    return (
        (k.c**2 * link.Gr * link.Ll)
        / (16.0 * math.pi**2 * link.f**2 * k.k_B * link.Ts * link.SNR)
        * (link.eta_p * link.P_comm * link.Gt)
        / S_m**2
        * los
    )


def ks_max(values, rho: float) -> float:
    """Kreisselmeier-Steinhauser aggregate: max <= KS <= max + ln(n)/rho."""
    x = np.asarray(values, dtype=float)
    m = float(np.max(x))
    return m + float(np.log(np.sum(np.exp(rho * (x - m))))) / rho


def ks_max_grad(values, rho: float) -> tuple[float, np.ndarray]:
    x = np.asarray(values, dtype=float)
    m = float(np.max(x))
    w = np.exp(rho * (x - m))
    total = float(w.sum())
    return m + math.log(total) / rho, w / total


def max_rate(rates, mode: str = "hard", rho: float = 1.0) -> float:
    """Best station rate; ``mode="smooth"`` returns the KS aggregate instead of the max."""
    r = np.asarray(rates, dtype=float).reshape(-1)
    if r.size == 0:
        raise ValueError("max_rate needs at least one station")
    if mode == "hard":
        return float(np.max(r))
    if mode == "smooth":
        if not rho > 0:
            raise ValueError("rho must be positive in smooth mode")
        return ks_max(r, rho)
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class LinkSeries:
    """Per-grid-point link samples for one spacecraft."""

    times: np.ndarray
    station_names: tuple[str, ...]
    rates: np.ndarray  # (n_t, n_stations) bit/s
    los: np.ndarray  # (n_t, n_stations) 0/1
    max_rate: np.ndarray
    cumulative: np.ndarray  # bits

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(
                ["t"]
                + [f"rate_{n}_bps" for n in self.station_names]
                + [f"los_{n}" for n in self.station_names]
                + ["max_rate_bps", "cumulative_bits"]
            )
            for i, t in enumerate(self.times):
                w.writerow(
                    [repr(float(t))]
                    + [repr(float(v)) for v in self.rates[i]]
                    + [str(int(v)) for v in self.los[i]]
                    + [repr(float(self.max_rate[i])), repr(float(self.cumulative[i]))]
                )


def trapezoid_cumulative(values, dt: float) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    out = np.zeros_like(v)
    out[1:] = np.cumsum(0.5 * dt * (v[1:] + v[:-1]))
    return out


def total_data(positions, stations, link: LinkParameters, grid: TimeGrid, constants: PhysicalConstants | None = None) -> LinkSeries:
    """Per-station rates, hard max and trapezoid-integrated data volume over ``grid``.

    ``positions`` holds the spacecraft ECI positions (km) at each grid point;
    a Trajectory is accepted directly. ``stations`` are objects with ``name``,
    ``lon``, ``lat`` (deg) and ``alt`` (km) attributes.
    """
    k = constants or standard_earth_constants()
    pos = np.asarray(getattr(positions, "states", positions), dtype=float)
    if pos.ndim != 2 or pos.shape[0] != grid.n + 1:
        raise ValueError(f"expected {grid.n + 1} spacecraft positions for the grid, got {pos.shape[0]}")
    pos = pos[:, :3]
    stations = list(stations)
    times = grid.times
    rates = np.zeros((times.size, len(stations)))
    los = np.zeros((times.size, len(stations)), dtype=int)
    for i, t in enumerate(times):
        for j, st in enumerate(stations):
            r_gs = geodetic_to_eci(st.lon, st.lat, st.alt, float(t), k)
            visible = line_of_sight(pos[i], r_gs)
            los[i, j] = visible
            if visible:
                rates[i, j] = download_rate(link, float(np.linalg.norm(pos[i] - r_gs)), 1, k)
    best = rates.max(axis=1) if stations else np.zeros(times.size)
    return LinkSeries(times, tuple(s.name for s in stations), rates, los, best, trapezoid_cumulative(best, grid.dt))

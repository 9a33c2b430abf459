"""Mission specifications (ground station, CubeSat, virtual telescope) and model assembly.

Specifications are plain JSON documents whose field names mirror the Python
constructor keywords used in the toolkit's examples. Validation is strict:
unknown fields are rejected and every problem is reported with its dotted
field path.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .astro import PhysicalConstants, TimeGrid, default_reference_state, standard_earth_constants
from .attitude import AttitudeDynamics, AttitudeState, make_attitude_system
from .comms import LinkParameters
from .gravity import ReferenceOrbit, make_formation_system, make_relative_system, precompute_reference, reference_grid_for
from .ode import OdeSystem

FORMAT_VERSION = 1


class SpecError(ValueError):
    """Invalid mission document; ``errors`` holds ``(field_path, message)`` pairs."""

    def __init__(self, errors: list[tuple[str, str]], source: str | None = None):
        self.errors = errors
        where = f"{source}: " if source else ""
        super().__init__(where + "; ".join(f"{path}: {msg}" for path, msg in errors))


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False, strict=False)


class GroundStationSpec(_Spec):
    name: str = Field(min_length=1)
    lon: float = Field(ge=-180.0, le=180.0)
    lat: float = Field(ge=-90.0, le=90.0)
    alt: float = Field(ge=0.0)


class LinkSpec(_Spec):
    """Link-budget parameters; defaults are toolkit values, not mission data."""

    Gr: float = Field(default=LinkParameters.Gr, gt=0)
    Gt: float = Field(default=LinkParameters.Gt, gt=0)
    Ll: float = Field(default=LinkParameters.Ll, gt=0, le=1)
    f: float = Field(default=LinkParameters.f, gt=0)
    Ts: float = Field(default=LinkParameters.Ts, gt=0)
    SNR: float = Field(default=LinkParameters.SNR, gt=0)
    eta_p: float = Field(default=LinkParameters.eta_p, gt=0, le=1)
    P_comm: float = Field(default=LinkParameters.P_comm, gt=0)

    def parameters(self) -> LinkParameters:
        return LinkParameters(**self.model_dump())


class AttitudeSpec(_Spec):
    inertia_kgm2: tuple[float, float, float]
    initial_omega_rad_s: tuple[float, float, float] = (0.0, 0.0, 0.0)
    initial_c3: tuple[float, float, float] = (0.0, 0.0, 1.0)
    initial_c1: tuple[float, float, float] = (1.0, 0.0, 0.0)

    @field_validator("inertia_kgm2")
    @classmethod
    def _inertia(cls, v):
        if min(v) <= 0:
            raise ValueError("principal moments must be positive")
        for i in range(3):
            if v[(i + 1) % 3] + v[(i + 2) % 3] < v[i]:
                raise ValueError("principal moments violate the triangle inequality")
        return v

    @model_validator(mode="after")
    def _rows(self):
        c3, c1 = np.array(self.initial_c3), np.array(self.initial_c1)
        if abs(np.linalg.norm(c3) - 1) > 1e-6 or abs(np.linalg.norm(c1) - 1) > 1e-6 or abs(c1 @ c3) > 1e-6:
            raise ValueError("initial_c3 and initial_c1 must be orthonormal rows")
        return self


def _check_station_map(stations: dict[str, GroundStationSpec]) -> dict[str, GroundStationSpec]:
    for key, gs in stations.items():
        if gs.name != key:
            raise ValueError(f"at {key}: station key does not match its name {gs.name!r}")
    return stations


class CubesatSpec(_Spec):
    name: str = Field(min_length=1)
    groundstations: dict[str, GroundStationSpec] = Field(default_factory=dict)
    orbit_model: Literal["absolute", "relative"] = "relative"
    attitude: Optional[AttitudeSpec] = None
    dry_mass: float = Field(gt=0)
    initial_orbit_state: tuple[float, float, float, float, float, float]
    specific_impulse: float = Field(gt=0)
    link: LinkSpec = Field(default_factory=LinkSpec)

    _stations = field_validator("groundstations")(classmethod(lambda cls, v: _check_station_map(v)))

    @property
    def initial_state(self) -> np.ndarray:
        return np.array(self.initial_orbit_state, dtype=float)


class VirtualTelescopeSpec(_Spec):
    optics_cubesat: CubesatSpec
    detector_cubesat: CubesatSpec
    groundstations: dict[str, GroundStationSpec] = Field(default_factory=dict)
    telescope_length_m: float = Field(gt=0)
    telescope_length_tol_mm: float = Field(gt=0)
    telescope_view_halfangle_tol_arcsec: float = Field(gt=0)
    max_separation_all_phases_km: float = Field(gt=0)
    observation_windows: list[tuple[float, float]] = Field(default_factory=list)
    reference_orbit_initial_state: tuple[float, float, float, float, float, float] = Field(
        default_factory=lambda: tuple(float(v) for v in default_reference_state())
    )
    sun_direction: tuple[float, float, float] = (1.0, 0.0, 0.0)
    duration_s: float = Field(default=5800.0, gt=0)
    num_steps: int = Field(default=500, ge=1)
    max_thrust_n: float = Field(default=1e-3, gt=0)

    _stations = field_validator("groundstations")(classmethod(lambda cls, v: _check_station_map(v)))

    @field_validator("sun_direction")
    @classmethod
    def _sun(cls, v):
        if math.sqrt(sum(c * c for c in v)) == 0.0:
            raise ValueError("sun direction must be nonzero")
        return v

    @field_validator("observation_windows")
    @classmethod
    def _windows(cls, v):
        prev_end = -math.inf
        for i, (a, b) in enumerate(v):
            if not a < b:
                raise ValueError(f"at {i}: window must have start < end")
            if a < prev_end:
                raise ValueError(f"at {i}: window overlaps or precedes window {i - 1}")
            prev_end = b
        return v

    @model_validator(mode="after")
    def _mission(self):
        for role in ("optics_cubesat", "detector_cubesat"):
            if getattr(self, role).orbit_model != "relative":
                raise ValueError(f"at {role}.orbit_model: must be 'relative' for a virtual telescope")
        for i, (a, b) in enumerate(self.observation_windows):
            if a < 0 or b > self.duration_s:
                raise ValueError(f"at observation_windows.{i}: window lies outside [0, duration_s]")
        return self

    @property
    def sun_unit(self) -> np.ndarray:
        s = np.array(self.sun_direction, dtype=float)
        return s / np.linalg.norm(s)

    def grid(self) -> TimeGrid:
        return TimeGrid(0.0, self.duration_s / self.num_steps, self.num_steps)

    @property
    def cubesats(self) -> dict[str, CubesatSpec]:
        return {"optics": self.optics_cubesat, "detector": self.detector_cubesat}


MissionSpec = Union[VirtualTelescopeSpec, CubesatSpec]
_KINDS: dict[str, type[_Spec]] = {"virtual_telescope": VirtualTelescopeSpec, "cubesat": CubesatSpec}


def _format_loc(loc) -> str:
    return ".".join(str(p) for p in loc if not (isinstance(p, str) and p.startswith("function-")))


_AT_PATH = re.compile(r"^at (.+?): (.*)$", re.S)


def _error_entry(e) -> tuple[str, str]:
    path = _format_loc(e["loc"])
    msg = e["msg"].removeprefix("Value error, ")
    # whole-model checks name their field inside the message
    m = _AT_PATH.match(msg)
    if m:
        path = f"{path}.{m.group(1)}" if path else m.group(1)
        msg = m.group(2)
    return path or "<root>", msg


def parse_mission(doc: dict, source: str | None = None) -> MissionSpec:
    """Validate a decoded JSON document into a specification."""
    if not isinstance(doc, dict):
        raise SpecError([("<root>", "document must be a JSON object")], source)
    body = dict(doc)
    version = body.pop("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise SpecError([("format_version", f"unsupported version {version!r}")], source)
    kind = body.pop("type", None)
    if kind not in _KINDS:
        raise SpecError([("type", f"must be one of {sorted(_KINDS)}, got {kind!r}")], source)
    try:
        return _KINDS[kind].model_validate(body)
    except ValidationError as exc:
        raise SpecError([_error_entry(e) for e in exc.errors()], source) from None


def load_mission(path) -> MissionSpec:
    """Read and validate a JSON mission file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SpecError([("<root>", f"JSON parse error at line {exc.lineno} column {exc.colno}: {exc.msg}")], str(path)) from None
    return parse_mission(doc, str(path))


def _canonical(value):
    if isinstance(value, BaseModel):
        return {k: _canonical(v) for k, v in value.model_dump(mode="python", round_trip=True).items()}
    if isinstance(value, dict):
        return {str(k): _canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, int):
        return value
    return float(value)


def spec_roundtrip(spec: MissionSpec) -> str:
    """Canonical JSON text: sorted keys, defaults materialized, shortest round-trip floats."""
    kind = "virtual_telescope" if isinstance(spec, VirtualTelescopeSpec) else "cubesat"
    doc = {"format_version": FORMAT_VERSION, "type": kind, **_canonical(spec)}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def dump_mission(spec: MissionSpec, path) -> None:
    Path(path).write_text(spec_roundtrip(spec))


# --- assembly ----------------------------------------------------------------


@dataclass(frozen=True)
class CommLink:
    station: GroundStationSpec
    cubesat: str
    link: LinkParameters


@dataclass(frozen=True)
class MissionModel:
    """Configured disciplines for one virtual-telescope specification."""

    spec: VirtualTelescopeSpec
    constants: PhysicalConstants
    grid: TimeGrid
    reference: ReferenceOrbit
    orbit_systems: dict[str, OdeSystem]
    formation_system: OdeSystem
    comm_links: tuple[CommLink, ...]
    attitude_systems: dict[str, OdeSystem]
    attitude_initial: dict[str, AttitudeState]
    telescope: object = field(repr=False)

    @property
    def disciplines(self) -> list[str]:
        names = [f"orbit:{n}" for n in self.orbit_systems]
        names += [f"comm:{c.station.name}->{c.cubesat}" for c in self.comm_links]
        names += [f"attitude:{n}" for n in self.attitude_systems]
        names.append("telescope")
        return names

    def structure(self) -> tuple:
        """Hashable summary used to compare repeated assemblies."""
        return (tuple(self.disciplines), self.reference.provenance, self.grid)


def assemble(
    spec: VirtualTelescopeSpec,
    constants: PhysicalConstants | None = None,
    grid: TimeGrid | None = None,
    cache_dir=None,
) -> MissionModel:
    """Build the reference orbit, dynamics, comm links, attitude systems and telescope evaluator.

    The reference orbit is sampled at half the propagation step so that
    every RK4 stage lands on a stored sample.
    """
    from .trajopt import TelescopeConstraints

    if not isinstance(spec, VirtualTelescopeSpec):
        raise TypeError("assemble expects a VirtualTelescopeSpec")
    k = constants or standard_earth_constants()
    grid = grid or spec.grid()
    reference = precompute_reference(k, np.array(spec.reference_orbit_initial_state), reference_grid_for(grid), cache_dir)

    orbit_systems = {}
    comm_links = []
    attitude_systems = {}
    attitude_initial = {}
    r0 = np.linalg.norm(reference.states[0, :3])
    orbit_rate = math.sqrt(k.mu / r0**3)
    for role, cs in spec.cubesats.items():
        orbit_systems[role] = make_relative_system(reference, k, cs.dry_mass, cs.specific_impulse)
        for gs in cs.groundstations.values():
            comm_links.append(CommLink(gs, role, cs.link.parameters()))
        if cs.attitude is not None:
            dyn = AttitudeDynamics(cs.attitude.inertia_kgm2, orbit_rate)
            attitude_systems[role] = make_attitude_system(dyn)
            attitude_initial[role] = AttitudeState.initial(cs.attitude.initial_omega_rad_s, cs.attitude.initial_c3, cs.attitude.initial_c1)

    pair = (spec.optics_cubesat, spec.detector_cubesat)
    formation = make_formation_system(reference, k, [c.dry_mass for c in pair], [c.specific_impulse for c in pair])
    telescope = TelescopeConstraints.from_spec(spec, grid)
    return MissionModel(
        spec, k, grid, reference, orbit_systems, formation, tuple(comm_links), attitude_systems, attitude_initial, telescope
    )

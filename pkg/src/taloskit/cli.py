"""Command-line front end: one subcommand per analysis, CSV outputs plus a run manifest.

Exit codes: 0 success, 2 usage or validation error, 3 optimizer did not
converge, 4 numerical divergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import shutil
import sys
import tempfile
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .astro import TimeGrid, default_reference_state, orbital_period, standard_earth_constants
from .attitude import AttitudeDynamics, AttitudeState, make_attitude_system, nutation_angle, orthonormality_drift
from .comms import total_data
from .gravity import make_absolute_system, make_relative_system, precompute_reference, reference_grid_for
from .illumination import (
    MeshError,
    fit_surrogate,
    generate_test_grid,
    generate_training_grid,
    load_mesh,
    rmse,
    write_samples_csv,
)
from .ode import DivergenceError, rk4_propagate
from .spec import CubesatSpec, SpecError, VirtualTelescopeSpec, assemble, load_mission

log = logging.getLogger("taloskit")

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_DIVERGED = 0, 2, 3, 4
MANIFEST_VERSION = 1


class UsageError(Exception):
    """Invalid inputs detected after argument parsing (exit code 2)."""


def data_path(name: str) -> Path:
    """Path of a file shipped in ``taloskit/data``."""
    return Path(str(resources.files("taloskit") / "data" / name))


def cache_dir() -> Path:
    env = os.environ.get("TALOSKIT_CACHE_DIR")
    if env:
        return Path(env)
    base = os.environ.get("XDG_CACHE_HOME") or os.path.join(os.path.expanduser("~"), ".cache")
    return Path(base) / "taloskit"


# --- argument types ----------------------------------------------------------


def positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"must be a positive finite number, got {text!r}")
    return v


def positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {text!r}")
    return v


def float_triple(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    try:
        vals = tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}") from None
    if len(vals) != 3 or not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected three comma-separated finite numbers, got {text!r}")
    return vals


def grid_size(text: str) -> tuple[int, int]:
    try:
        a, b = (int(p) for p in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NxM, got {text!r}") from None
    if a < 1 or b < 1:
        raise argparse.ArgumentTypeError(f"grid sizes must be positive, got {text!r}")
    return a, b


# --- output helpers ----------------------------------------------------------


def _fmt(v) -> str:
    return repr(float(v))


def write_state_csv(path: Path, times, states) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "y", "z", "vx", "vy", "vz"])
        for t, row in zip(times, states):
            w.writerow([_fmt(t)] + [_fmt(v) for v in row[:6]])


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _grid_for(period: float, duration_orbits: float, dt: float) -> TimeGrid:
    n = max(1, int(round(duration_orbits * period / dt)))
    return TimeGrid(0.0, dt, n)


def _load(path) -> VirtualTelescopeSpec | CubesatSpec:
    try:
        return load_mission(path)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None


# --- subcommands ---------------------------------------------------------------
# Each returns (exit_code, {label: output_path}, extra manifest fields).


def cmd_propagate(args) -> tuple[int, dict, dict]:
    spec = _load(args.config)
    k = standard_earth_constants()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if isinstance(spec, VirtualTelescopeSpec):
        ref_state = np.array(spec.reference_orbit_initial_state)
        craft = {cs.name: cs for cs in (spec.optics_cubesat, spec.detector_cubesat)}
        offsets = True
    else:
        craft = {spec.name: spec}
        offsets = spec.orbit_model == "relative"
        ref_state = default_reference_state(k) if offsets else spec.initial_state
    mode = args.mode or ("relative" if offsets else "absolute")
    if mode == "relative" and not offsets:
        raise UsageError("--relative needs relative initial states (orbit_model 'relative')")

    grid = _grid_for(orbital_period(ref_state, k), args.duration_orbits, args.dt)
    outputs = {}
    if offsets:
        ref = precompute_reference(k, ref_state, reference_grid_for(grid), cache_dir())
        ref_states = ref.states[::2]
    for name, cs in craft.items():
        if mode == "relative":
            sys_ = make_relative_system(ref, k, cs.dry_mass, cs.specific_impulse)
            traj = rk4_propagate(sys_, cs.initial_state, np.zeros((grid.n, 3)), grid)
        else:
            x0 = ref_state + cs.initial_state if offsets else cs.initial_state
            sys_ = make_absolute_system(k, cs.dry_mass, cs.specific_impulse)
            traj = rk4_propagate(sys_, x0, np.zeros((grid.n, 3)), grid)
        path = out / f"{name}.csv"
        write_state_csv(path, grid.times, traj.states)
        outputs[name] = path
    if mode == "relative":
        path = out / "reference.csv"
        write_state_csv(path, grid.times, ref_states)
        outputs["reference"] = path
    return EXIT_OK, outputs, {"grid": grid}


def cmd_attitude(args) -> tuple[int, dict, dict]:
    try:
        dyn = AttitudeDynamics(args.inertia, args.orbit_rate)
        omega0 = args.omega0 if args.omega0 is not None else (0.0, 0.0, args.orbit_rate)
        x0 = AttitudeState.initial(omega0, args.c3, args.c1)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    period = 2.0 * math.pi / args.orbit_rate
    grid = _grid_for(period, args.duration_orbits, args.dt)
    traj = rk4_propagate(make_attitude_system(dyn), x0.as_vector(), np.zeros((grid.n, 0)), grid)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "wx", "wy", "wz", "nutation_deg", "orthonormality_drift"])
        for t, x in zip(grid.times, traj.states):
            w.writerow([_fmt(t), _fmt(x[0]), _fmt(x[1]), _fmt(x[2]), _fmt(math.degrees(nutation_angle(x))), _fmt(orthonormality_drift(x))])
    return EXIT_OK, {"attitude": out}, {"grid": grid}


def cmd_illuminate(args) -> tuple[int, dict, dict]:
    mesh_path = Path(args.mesh) if args.mesh else data_path("example_bus.stl")
    try:
        mesh = load_mesh(mesh_path, args.panels)
    except (MeshError, FileNotFoundError) as exc:
        raise UsageError(str(exc)) from None
    (tra, tre), (tea, tee) = args.train_grid, args.test_grid
    spt = args.samples_per_triangle
    try:
        train = generate_training_grid(mesh, tra, tre, spt)
        test = generate_test_grid(mesh, tea, tee, spt)
        surrogate = fit_surrogate(train, args.az_knots, args.el_knots, args.regularization)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    paths = {
        "train": Path(f"{prefix}_train.csv"),
        "test": Path(f"{prefix}_test.csv"),
        "surrogate": Path(f"{prefix}_surrogate.json"),
        "summary": Path(f"{prefix}_summary.txt"),
    }
    write_samples_csv(paths["train"], train)
    write_samples_csv(paths["test"], test)
    paths["surrogate"].write_text(surrogate.to_json() + "\n")
    err_train, err_test = rmse(surrogate, train), rmse(surrogate, test)
    line = f"train_rmse={err_train!r} test_rmse={err_test!r} n_train={len(train)} n_test={len(test)}"
    paths["summary"].write_text(line + "\n")
    print(line)
    return EXIT_OK, paths, {"mesh": str(mesh_path.resolve())}


def cmd_comm(args) -> tuple[int, dict, dict]:
    spec = _load(args.config)
    k = standard_earth_constants()
    if isinstance(spec, VirtualTelescopeSpec):
        ref_state = np.array(spec.reference_orbit_initial_state)
        craft = [spec.optics_cubesat, spec.detector_cubesat]
        offsets = True
    else:
        craft = [spec]
        offsets = spec.orbit_model == "relative"
        ref_state = default_reference_state(k) if offsets else spec.initial_state
    active = [cs for cs in craft if cs.groundstations]
    if not active:
        raise UsageError(
            "no ground stations in this config: an empty groundstations map disables the communication discipline"
        )
    grid = _grid_for(orbital_period(ref_state, k), args.duration_orbits, args.dt)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = {}
    for cs in active:
        x0 = ref_state + cs.initial_state if offsets else cs.initial_state
        traj = rk4_propagate(make_absolute_system(k, cs.dry_mass, cs.specific_impulse), x0, np.zeros((grid.n, 3)), grid)
        series = total_data(traj, cs.groundstations.values(), cs.link.parameters(), grid, k)
        path = out / f"{cs.name}_comm.csv"
        series.write_csv(path)
        outputs[cs.name] = path
        print(f"{cs.name}: total_bits={float(series.cumulative[-1])!r}")
    return EXIT_OK, outputs, {"grid": grid}


def cmd_optimize(args) -> tuple[int, dict, dict]:
    from .trajopt import SolverOptions, TrajOptProblem, report_convergence, solve, write_formation_csv, write_thrust_csv

    spec = _load(args.config)
    if not isinstance(spec, VirtualTelescopeSpec):
        raise UsageError("optimize needs a virtual_telescope config")
    model = assemble(spec, standard_earth_constants(), spec.grid(), cache_dir())
    problem = TrajOptProblem(model)
    opts = SolverOptions(max_outer=args.max_outer, feas_tol=args.feas_tol, opt_tol=args.opt_tol)
    result = solve(problem, opts)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    paths = {
        "thrust": Path(f"{prefix}_thrust.csv"),
        "formation": Path(f"{prefix}_formation.csv"),
        "convergence": Path(f"{prefix}_convergence.csv"),
    }
    write_thrust_csv(problem.grid, result.thrusts, paths["thrust"])
    write_formation_csv(problem.formation_metrics(result.trajectory), paths["formation"])
    report_convergence(result.report, paths["convergence"])
    final = result.report.final
    print(
        f"{result.report.termination}: iterations={len(result.report.history)} objective_kg={final.objective!r} "
        f"feasibility={final.feasibility!r} optimality={final.optimality!r}"
    )
    code = EXIT_OK if result.report.converged else EXIT_NOT_CONVERGED
    return code, paths, {"grid": problem.grid, "termination": result.report.termination}


# --- manifest ------------------------------------------------------------------


def _manifest_path(args) -> Path:
    if args.command in ("propagate", "comm"):
        return Path(args.out) / "manifest.json"
    if args.command == "attitude":
        return Path(f"{args.out}.manifest.json")
    return Path(f"{args.out_prefix}_manifest.json")


_PATH_ARGS = {"config", "mesh", "panels", "out", "out_prefix"}


def _recorded_args(args) -> dict:
    rec = {}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "verbose"):
            continue
        if key in _PATH_ARGS and value is not None:
            value = str(Path(value).resolve())
        elif isinstance(value, tuple):
            value = list(value)
        rec[key] = value
    return rec


def write_manifest(args, outputs: dict, extra: dict, wall: float, code: int) -> Path:
    grid = extra.pop("grid", None)
    config = getattr(args, "config", None)
    doc = {
        "manifest_version": MANIFEST_VERSION,
        "subcommand": args.command,
        "arguments": _recorded_args(args),
        "config_path": str(Path(config).resolve()) if config else None,
        "config_sha256": sha256_file(config) if config else None,
        "constants": standard_earth_constants().as_dict(),
        "grid": {"t0": grid.t0, "dt": grid.dt, "n": grid.n} if grid is not None else None,
        "outputs": {label: {"path": str(Path(p).resolve()), "sha256": sha256_file(p)} for label, p in outputs.items()},
        "exit_code": code,
        "toolkit_version": __version__,
        "wall_time_s": wall,
        **extra,
    }
    path = _manifest_path(args)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def cmd_replay(args) -> int:
    """Rerun a manifest's invocation in a scratch directory and compare output hashes."""
    try:
        doc = json.loads(Path(args.manifest).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read manifest {args.manifest}: {exc}") from None
    rec = dict(doc["arguments"])
    if doc.get("config_path") and sha256_file(doc["config_path"]) != doc["config_sha256"]:
        raise UsageError(f"config {doc['config_path']} changed since the manifest was written")
    scratch = Path(tempfile.mkdtemp(prefix="taloskit-replay-"))
    try:
        command = rec.pop("command")
        original = {}
        for key in ("out", "out_prefix"):
            if rec.get(key):
                original[key] = Path(rec[key])
                rec[key] = str(scratch / Path(rec[key]).name)
        argv = [command] + _argv_from_record(command, rec)
        code, outputs = _run(build_parser().parse_args(argv), write=False)
        mismatches = []
        for label, entry in doc["outputs"].items():
            new = outputs.get(label)
            if new is None or sha256_file(new) != entry["sha256"]:
                mismatches.append(label)
        if code != doc["exit_code"]:
            mismatches.append(f"exit code {code} != {doc['exit_code']}")
    finally:
        shutil.rmtree(scratch, ignore_errors=True)
    if mismatches:
        print("replay mismatch: " + ", ".join(mismatches))
        return 1
    print(f"replay identical: {len(doc['outputs'])} outputs reproduced bitwise")
    return EXIT_OK


def _argv_from_record(command: str, rec: dict) -> list[str]:
    argv = []
    for key, value in rec.items():
        if value is None:
            continue
        if key == "mode":
            argv.append(f"--{value}")
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(value, list):
            text = "x".join(str(v) for v in value) if key in ("train_grid", "test_grid") else ",".join(repr(float(v)) for v in value)
        else:
            text = repr(value) if isinstance(value, float) else str(value)
        argv += [flag, text]
    return argv


# --- parser and entry point ----------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="taloskit", description="Spacecraft mission analysis toolkit.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("propagate", help="propagate orbits without thrust")
    sp.add_argument("--config", required=True)
    sp.add_argument("--duration-orbits", type=positive_float, default=1.0)
    sp.add_argument("--dt", type=positive_float, default=10.0)
    mode = sp.add_mutually_exclusive_group()
    mode.add_argument("--relative", dest="mode", action="store_const", const="relative")
    mode.add_argument("--absolute", dest="mode", action="store_const", const="absolute")
    sp.add_argument("--out", required=True, help="output directory")

    sa = sub.add_parser("attitude", help="gravity-gradient attitude propagation")
    sa.add_argument("--inertia", type=float_triple, required=True, help="I1,I2,I3 in kg m^2")
    sa.add_argument("--orbit-rate", type=positive_float, default=0.001, help="rad/s")
    sa.add_argument("--duration-orbits", type=positive_float, default=1.0)
    sa.add_argument("--dt", type=positive_float, default=1.0)
    sa.add_argument("--omega0", type=float_triple, default=None, help="initial body rates (default 0,0,orbit-rate)")
    sa.add_argument("--c3", type=float_triple, default=(0.0, 0.0, 1.0))
    sa.add_argument("--c1", type=float_triple, default=(1.0, 0.0, 0.0))
    sa.add_argument("--out", required=True, help="output CSV file")

    si = sub.add_parser("illuminate", help="ray-traced illumination data and spline surrogate")
    si.add_argument("--mesh", default=None, help="ASCII STL (default: shipped example bus)")
    si.add_argument("--panels", default=None, help="panel sidecar (default: <mesh>.panels)")
    si.add_argument("--train-grid", type=grid_size, default=(24, 13))
    si.add_argument("--test-grid", type=grid_size, default=(23, 11))
    si.add_argument("--samples-per-triangle", type=positive_int, default=64)
    si.add_argument("--az-knots", type=positive_int, default=16)
    si.add_argument("--el-knots", type=positive_int, default=9)
    si.add_argument("--regularization", type=float, default=1e-4)
    si.add_argument("--out-prefix", required=True)

    sc = sub.add_parser("comm", help="ground-station downlink rates and data volume")
    sc.add_argument("--config", required=True)
    sc.add_argument("--duration-orbits", type=positive_float, default=1.0)
    sc.add_argument("--dt", type=positive_float, default=10.0)
    sc.add_argument("--out", required=True, help="output directory")

    so = sub.add_parser("optimize", help="virtual-telescope trajectory optimization")
    so.add_argument("--config", required=True)
    so.add_argument("--max-outer", type=positive_int, default=30)
    so.add_argument("--feas-tol", type=positive_float, default=1e-3)
    so.add_argument("--opt-tol", type=positive_float, default=1e-6)
    so.add_argument("--out-prefix", required=True)

    sr = sub.add_parser("replay", help="rerun a manifest and check outputs are bitwise identical")
    sr.add_argument("manifest")
    return p


_COMMANDS = {
    "propagate": cmd_propagate,
    "attitude": cmd_attitude,
    "illuminate": cmd_illuminate,
    "comm": cmd_comm,
    "optimize": cmd_optimize,
}


def _run(args, write: bool = True) -> tuple[int, dict]:
    start = time.perf_counter()
    code, outputs, extra = _COMMANDS[args.command](args)
    if write:
        write_manifest(args, outputs, extra, time.perf_counter() - start, code)
    return code, outputs


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            return cmd_replay(args)
        return _run(args)[0]
    except (UsageError, SpecError) as exc:
        print(f"taloskit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"taloskit {args.command}: numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())

"""Ray-traced solar-array illumination and its tensor-product spline surrogate."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import BSpline

RAY_OFFSET_M = 1e-9
TWO_PI = 2.0 * math.pi


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class TriangleMesh:
    """Body-frame triangle mesh in metres; ``panel_flags`` marks solar-array triangles."""

    vertices: np.ndarray
    triangles: np.ndarray
    panel_flags: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.vertices, dtype=float).reshape(-1, 3)
        t = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        p = np.array(self.panel_flags, dtype=bool).reshape(-1)
        if p.shape[0] != t.shape[0]:
            raise MeshError("panel_flags must have one entry per triangle")
        if t.size and (t.min() < 0 or t.max() >= v.shape[0]):
            raise MeshError("triangle vertex index out of range")
        if not p.any():
            raise MeshError("mesh has no solar-array triangles")
        for a in (v, t, p):
            a.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "panel_flags", p)
        areas = self.areas
        bad = np.flatnonzero(~(areas > 0))
        if bad.size:
            raise MeshError(f"degenerate triangle {int(bad[0])} (zero area)")

    @property
    def corners(self) -> np.ndarray:
        """(T, 3, 3) array of triangle corner coordinates."""
        return self.vertices[self.triangles]

    @property
    def normals(self) -> np.ndarray:
        c = self.corners
        n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    @property
    def areas(self) -> np.ndarray:
        c = self.corners
        return 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)

    @property
    def panel_area(self) -> float:
        return float(self.areas[self.panel_flags].sum())

    def without_occluders(self) -> TriangleMesh:
        keep = self.panel_flags
        return TriangleMesh(self.vertices, self.triangles[keep], self.panel_flags[keep])


def read_ascii_stl(path) -> tuple[np.ndarray, np.ndarray]:
    """Parse an ASCII STL file into ``(vertices, triangles)`` with one vertex triple per facet."""
    corners = []
    current: list[list[float]] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            words = line.split()
            if not words:
                continue
            if words[0] == "vertex":
                if len(words) != 4:
                    raise MeshError(f"{path}:{lineno}: malformed vertex line")
                try:
                    current.append([float(w) for w in words[1:]])
                except ValueError:
                    raise MeshError(f"{path}:{lineno}: non-numeric vertex coordinate") from None
            elif words[0] == "endloop":
                if len(current) != 3:
                    raise MeshError(f"{path}:{lineno}: facet does not have 3 vertices")
                corners.append(current)
                current = []
    if not corners:
        raise MeshError(f"{path}: no facets found")
    verts = np.array(corners, dtype=float).reshape(-1, 3)
    return verts, np.arange(verts.shape[0]).reshape(-1, 3)


def write_ascii_stl(path, mesh: TriangleMesh, name: str = "taloskit") -> None:
    with open(path, "w") as fh:
        fh.write(f"solid {name}\n")
        for tri, n in zip(mesh.corners, mesh.normals):
            fh.write("  facet normal {} {} {}\n    outer loop\n".format(*(repr(float(c)) for c in n)))
            for v in tri:
                fh.write("      vertex {} {} {}\n".format(*(repr(float(c)) for c in v)))
            fh.write("    endloop\n  endfacet\n")
        fh.write(f"endsolid {name}\n")


def read_panel_sidecar(path, n_triangles: int) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"panel sidecar not found: expected {path}")
    flags = np.zeros(n_triangles, dtype=bool)
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            idx = int(line)
        except ValueError:
            raise MeshError(f"{path}:{lineno}: expected a triangle index, got {line!r}") from None
        if not 0 <= idx < n_triangles:
            raise MeshError(f"{path}:{lineno}: triangle index {idx} out of range")
        flags[idx] = True
    return flags


def load_mesh(stl_path, sidecar_path=None) -> TriangleMesh:
    """Load an ASCII STL plus its panel-index sidecar (default: ``<stl>.panels``)."""
    stl_path = Path(stl_path)
    sidecar = Path(sidecar_path) if sidecar_path is not None else stl_path.with_suffix(".panels")
    verts, tris = read_ascii_stl(stl_path)
    return TriangleMesh(verts, tris, read_panel_sidecar(sidecar, tris.shape[0]))


def sun_vector(azimuth: float, elevation: float) -> np.ndarray:
    ce = math.cos(elevation)
    return np.array([ce * math.cos(azimuth), ce * math.sin(azimuth), math.sin(elevation)])


def _radical_inverse(count: int) -> np.ndarray:
    i = np.arange(count)
    out = np.zeros(count)
    scale = 0.5
    while np.any(i):
        out += scale * (i & 1)
        i = i >> 1
        scale *= 0.5
    return out


def triangle_sample_points(corners: np.ndarray, count: int) -> np.ndarray:
    """Deterministic Hammersley points inside each triangle, shape (T, count, 3).

    The unit square is mapped onto the triangle with the area-preserving
    square-root warp, so equal point counts cover equal areas.
    """
    u = (np.arange(count) + 0.5) / count
    v = _radical_inverse(count) + 0.5 / count
    s = np.sqrt(u)
    wb, wc = s * (1.0 - v), s * v
    a = corners[:, 0][:, None, :]
    e1 = (corners[:, 1] - corners[:, 0])[:, None, :]
    e2 = (corners[:, 2] - corners[:, 0])[:, None, :]
    return a + wb[None, :, None] * e1 + wc[None, :, None] * e2


def _ray_hits(origins: np.ndarray, direction: np.ndarray, corners: np.ndarray) -> np.ndarray:
    """Watertight ray/triangle test for rays sharing one direction.

    Returns a (P, T) boolean matrix: ray ``p`` hits triangle ``t`` at a
    strictly positive distance. Edge and vertex hits count as hits.
    """
    kz = int(np.argmax(np.abs(direction)))
    kx, ky = (kz + 1) % 3, (kz + 2) % 3
    if direction[kz] < 0:
        kx, ky = ky, kx
    sx = direction[kx] / direction[kz]
    sy = direction[ky] / direction[kz]
    sz = 1.0 / direction[kz]

    rel = corners[None, :, :, :] - origins[:, None, None, :]  # (P, T, 3 corners, 3)
    px = rel[..., kx] - sx * rel[..., kz]
    py = rel[..., ky] - sy * rel[..., kz]
    pz = sz * rel[..., kz]
    ax, bx, cx = px[..., 0], px[..., 1], px[..., 2]
    ay, by, cy = py[..., 0], py[..., 1], py[..., 2]
    U = cx * by - cy * bx
    V = ax * cy - ay * cx
    W = bx * ay - by * ax
    inside = ~(((U < 0) | (V < 0) | (W < 0)) & ((U > 0) | (V > 0) | (W > 0)))
    det = U + V + W
    T = U * pz[..., 0] + V * pz[..., 1] + W * pz[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        ahead = np.where(det != 0, T / det, -1.0) > 0.0
    return inside & (det != 0) & ahead


def ray_trace_illumination(mesh: TriangleMesh, azimuth: float, elevation: float, samples_per_triangle: int = 64) -> float:
    """Fraction of solar-array area lit by a sun at infinity in direction (az, el).

    Each facing panel triangle is sampled at ``samples_per_triangle`` points;
    a point is lit when a ray toward the sun, offset by 1e-9 m, escapes the mesh.
    """
    if samples_per_triangle < 1:
        raise ValueError("samples_per_triangle must be >= 1")
    s = sun_vector(azimuth, elevation)
    corners = mesh.corners
    areas = mesh.areas
    panels = np.flatnonzero(mesh.panel_flags)
    facing = panels[mesh.normals[panels] @ s > 0.0]
    total = areas[panels].sum()
    if facing.size == 0:
        return 0.0

    pts = triangle_sample_points(corners[facing], samples_per_triangle)
    origins = pts.reshape(-1, 3) + RAY_OFFSET_M * s
    owner = np.repeat(facing, samples_per_triangle)
    hits = _ray_hits(origins, s, corners)
    hits[np.arange(owner.size), owner] = False
    lit = ~hits.any(axis=1)
    lit_share = lit.reshape(facing.size, samples_per_triangle).mean(axis=1)
    return float(min(1.0, max(0.0, (areas[facing] * lit_share).sum() / total)))


@dataclass(frozen=True)
class IlluminationSample:
    azimuth: float
    elevation: float
    fraction: float


def grid_angles(n_az: int, n_el: int, offset: bool = False) -> list[tuple[float, float]]:
    """Az-major (az, el) pairs; ``offset`` shifts both axes half a cell off the training nodes."""
    if offset:
        azs = [TWO_PI * (i + 0.5) / n_az for i in range(n_az)]
        els = [-math.pi / 2 + math.pi * (j + 0.5) / n_el for j in range(n_el)]
    else:
        azs = [TWO_PI * i / n_az for i in range(n_az)]
        els = [-math.pi / 2 + math.pi * j / (n_el - 1) for j in range(n_el)]
    return [(a, e) for a in azs for e in els]


def generate_training_grid(mesh: TriangleMesh, n_az: int, n_el: int, samples_per_triangle: int = 64) -> list[IlluminationSample]:
    """Ray-trace a uniform az x el grid over [0, 2pi) x [-pi/2, pi/2], az-major."""
    if n_az < 4 or n_el < 3:
        raise ValueError("training grid needs n_az >= 4 and n_el >= 3")
    return [
        IlluminationSample(a, e, ray_trace_illumination(mesh, a, e, samples_per_triangle)) for a, e in grid_angles(n_az, n_el)
    ]


def generate_test_grid(mesh: TriangleMesh, n_az: int, n_el: int, samples_per_triangle: int = 64) -> list[IlluminationSample]:
    return [
        IlluminationSample(a, e, ray_trace_illumination(mesh, a, e, samples_per_triangle))
        for a, e in grid_angles(n_az, n_el, offset=True)
    ]


def write_samples_csv(path, samples) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["azimuth_rad", "elevation_rad", "fraction"])
        for s in samples:
            w.writerow([repr(s.azimuth), repr(s.elevation), repr(s.fraction)])


def read_samples_csv(path) -> list[IlluminationSample]:
    with open(path, newline="") as fh:
        return [
            IlluminationSample(float(r["azimuth_rad"]), float(r["elevation_rad"]), float(r["fraction"]))
            for r in csv.DictReader(fh)
        ]


# --- spline surrogate -------------------------------------------------------

_DEGREE = 3


class _Axis:
    """Cubic B-spline basis on one axis, periodic (azimuth) or clamped (elevation)."""

    def __init__(self, lo: float, hi: float, n_intervals: int, periodic: bool):
        self.lo, self.hi, self.periodic = lo, hi, periodic
        self.n_intervals = n_intervals
        h = (hi - lo) / n_intervals
        if periodic:
            self.knots = lo + h * np.arange(-_DEGREE, n_intervals + _DEGREE + 1)
            self.size = n_intervals
        else:
            inner = lo + h * np.arange(n_intervals + 1)
            inner[-1] = hi
            self.knots = np.concatenate([[lo] * _DEGREE, inner, [hi] * _DEGREE])
            self.size = n_intervals + _DEGREE
        n_raw = len(self.knots) - _DEGREE - 1
        self._splines = [BSpline(self.knots, np.eye(n_raw), _DEGREE, extrapolate=False)]
        self._splines += [self._splines[0].derivative(d) for d in (1, 2)]

    def _wrap(self, x: np.ndarray) -> np.ndarray:
        if self.periodic:
            return np.mod(x - self.lo, self.hi - self.lo) + self.lo
        return np.clip(x, self.lo, self.hi)

    def basis(self, x, deriv: int = 0) -> np.ndarray:
        x = self._wrap(np.atleast_1d(np.asarray(x, dtype=float)))
        raw = np.nan_to_num(self._splines[deriv](x))
        if not self.periodic:
            return raw
        folded = np.zeros((x.size, self.size))
        for j in range(raw.shape[1]):
            folded[:, j % self.size] += raw[:, j]
        return folded

    def gram(self, deriv: int) -> np.ndarray:
        """Integral over the axis of products of ``deriv``-th basis derivatives (exact Gauss rule)."""
        gx, gw = np.polynomial.legendre.leggauss(4)
        edges = np.linspace(self.lo, self.hi, self.n_intervals + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        xs = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
        ws = (half[:, None] * gw[None, :]).ravel()
        B = self.basis(xs, deriv)
        return B.T @ (ws[:, None] * B)


@dataclass(frozen=True)
class IlluminationSurrogate:
    """Cubic tensor-product spline in (azimuth, elevation), periodic in azimuth."""

    n_az_knots: int
    n_el_knots: int
    coefficients: np.ndarray
    regularization: float

    def __post_init__(self) -> None:
        c = np.array(self.coefficients, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "_az", _Axis(0.0, TWO_PI, self.n_az_knots, periodic=True))
        object.__setattr__(self, "_el", _Axis(-math.pi / 2, math.pi / 2, self.n_el_knots - 1, periodic=False))
        if c.shape != (self._az.size, self._el.size):
            raise ValueError(f"coefficient array must have shape {(self._az.size, self._el.size)}")

    def evaluate(self, azimuth, elevation) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        az = np.atleast_1d(np.asarray(azimuth, dtype=float))
        el = np.atleast_1d(np.asarray(elevation, dtype=float))
        if np.any(np.abs(el) > math.pi / 2 + 1e-12):
            raise ValueError("elevation must lie in [-pi/2, pi/2]")
        Ba, dBa = self._az.basis(az), self._az.basis(az, 1)
        Be, dBe = self._el.basis(el), self._el.basis(el, 1)
        c = self.coefficients
        f = np.einsum("pi,ij,pj->p", Ba, c, Be)
        fa = np.einsum("pi,ij,pj->p", dBa, c, Be)
        fe = np.einsum("pi,ij,pj->p", Ba, c, dBe)
        return f, fa, fe

    def to_json(self) -> str:
        return json.dumps(
            {
                "format_version": 1,
                "degree": _DEGREE,
                "n_az_knots": self.n_az_knots,
                "n_el_knots": self.n_el_knots,
                "regularization": self.regularization,
                "coefficients": self.coefficients.tolist(),
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> IlluminationSurrogate:
        d = json.loads(text)
        return cls(d["n_az_knots"], d["n_el_knots"], np.array(d["coefficients"]), d["regularization"])


def energy_matrix(n_az_knots: int, n_el_knots: int) -> np.ndarray:
    """Matrix of the integral of f_aa^2 + 2 f_ae^2 + f_ee^2 over the az/el domain."""
    az = _Axis(0.0, TWO_PI, n_az_knots, periodic=True)
    el = _Axis(-math.pi / 2, math.pi / 2, n_el_knots - 1, periodic=False)
    return (
        np.kron(az.gram(2), el.gram(0))
        + 2.0 * np.kron(az.gram(1), el.gram(1))
        + np.kron(az.gram(0), el.gram(2))
    )


def fit_surrogate(samples, n_az_knots: int = 12, n_el_knots: int = 7, lam: float = 1e-6) -> IlluminationSurrogate:
    """Regularized least-squares fit: minimize ``|B c - y|^2 + lam * E(c)``.

    ``E`` is the bending energy from :func:`energy_matrix`. Constants and
    functions linear in elevation carry no energy.

    Raises:
        ValueError: too few samples, negative ``lam``, or a rank-deficient
            system (under-sampling) when ``lam == 0``.
    """
    samples = list(samples)
    if n_az_knots < 4 or n_el_knots < 2:
        raise ValueError("need n_az_knots >= 4 and n_el_knots >= 2")
    if lam < 0:
        raise ValueError("regularization weight must be nonnegative")
    if len(samples) < n_az_knots * n_el_knots / 2:
        raise ValueError(f"{len(samples)} samples are too few for a {n_az_knots}x{n_el_knots} knot grid")
    az = np.array([s.azimuth for s in samples])
    el = np.array([s.elevation for s in samples])
    y = np.array([s.fraction for s in samples])

    shell = IlluminationSurrogate(n_az_knots, n_el_knots, np.zeros((n_az_knots, n_el_knots + 2)), lam)
    Ba = shell._az.basis(az)
    Be = shell._el.basis(el)
    B = (Ba[:, :, None] * Be[:, None, :]).reshape(len(samples), -1)
    A = B.T @ B
    if lam > 0:
        A = A + lam * energy_matrix(n_az_knots, n_el_knots)
    elif np.linalg.matrix_rank(B) < B.shape[1]:
        raise ValueError("rank-deficient normal system at zero regularization: training data under-samples the spline")
    c = np.linalg.solve(A, B.T @ y)
    return IlluminationSurrogate(n_az_knots, n_el_knots, c.reshape(shell.coefficients.shape), lam)


def surrogate_eval(s: IlluminationSurrogate, azimuth: float, elevation: float) -> tuple[float, float, float]:
    """Value and (d/d_az, d/d_el) at one sun angle."""
    f, fa, fe = s.evaluate(azimuth, elevation)
    return float(f[0]), float(fa[0]), float(fe[0])


def rmse(s: IlluminationSurrogate, samples) -> float:
    samples = list(samples)
    f, _, _ = s.evaluate([p.azimuth for p in samples], [p.elevation for p in samples])
    y = np.array([p.fraction for p in samples])
    return float(np.sqrt(np.mean((f - y) ** 2)))


# --- example geometry -------------------------------------------------------


def box_triangles(lo, hi) -> list[list[list[float]]]:
    """Twelve outward-facing triangles of an axis-aligned box."""
    (x0, y0, z0), (x1, y1, z1) = lo, hi
    faces = [
        [(x1, y0, z0), (x1, y1, z0), (x1, y1, z1), (x1, y0, z1)],  # +x
        [(x0, y0, z0), (x0, y0, z1), (x0, y1, z1), (x0, y1, z0)],  # -x
        [(x0, y1, z0), (x0, y1, z1), (x1, y1, z1), (x1, y1, z0)],  # +y
        [(x0, y0, z0), (x1, y0, z0), (x1, y0, z1), (x0, y0, z1)],  # -y
        [(x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1)],  # +z
        [(x0, y0, z0), (x0, y1, z0), (x1, y1, z0), (x1, y0, z0)],  # -z
    ]
    return [tri for q in faces for tri in quad_triangles(q)]


def quad_triangles(quad) -> list[list[list[float]]]:
    a, b, c, d = (list(map(float, p)) for p in quad)
    return [[a, b, c], [a, c, d]]


def example_cubesat_mesh(sides: int = 16) -> TriangleMesh:
    """Faceted cylindrical bus with body-mounted arrays, a conical array cap, a mast and a side boom.

    Units are metres. Side and cap facets are solar arrays; the mast and
    boom are occluders that cast shadows on them.
    """
    tris: list = []
    flags: list[bool] = []

    def add(ts, panel):
        tris.extend(ts)
        flags.extend([panel] * len(ts))

    radius, height, apex = 0.1, 0.3, 0.42
    angles = [TWO_PI * i / sides for i in range(sides)]
    lower = [(radius * math.cos(a), radius * math.sin(a), 0.0) for a in angles]
    upper = [(radius * math.cos(a), radius * math.sin(a), height) for a in angles]
    for i in range(sides):
        j = (i + 1) % sides
        add(quad_triangles([lower[i], lower[j], upper[j], upper[i]]), True)
        add([[list(upper[i]), list(upper[j]), [0.0, 0.0, apex]]], True)
        add([[[0.0, 0.0, 0.0], list(lower[j]), list(lower[i])]], False)
    add(box_triangles((-0.01, -0.01, height), (0.01, 0.01, height + 0.35)), False)
    add(box_triangles((0.1, -0.02, 0.12), (0.4, 0.02, 0.16)), False)
    verts = np.array(tris, dtype=float).reshape(-1, 3)
    return TriangleMesh(verts, np.arange(verts.shape[0]).reshape(-1, 3), flags)

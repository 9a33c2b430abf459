"""Oracle self-checks and a static check that oracles share no code with taloskit."""

import ast
import math
from pathlib import Path

import numpy as np
import pytest

from oracles.attitude import oracle_attitude_rhs
from oracles.fd import oracle_fd_directional, oracle_fd_gradient, oracle_fd_jacobian
from oracles.gravity import MU, oracle_gravity
from oracles.link import oracle_download_rate
from oracles.precision import oracle_difference_norm, oracle_dot
from oracles.shadow import oracle_shadow_geometry

ORACLE_DIR = Path(__file__).parent / "oracles"
ALLOWED_IMPORTS = {"math", "numpy", "mpmath"}


@pytest.mark.parametrize("path", sorted(ORACLE_DIR.glob("*.py")), ids=lambda p: p.name)
def test_oracle_imports_are_independent(path):
    tree = ast.parse(path.read_text())
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            roots = {a.name.split(".")[0] for a in node.names}
        elif isinstance(node, ast.ImportFrom):
            roots = {(node.module or "").split(".")[0]}
        else:
            continue
        assert roots <= ALLOWED_IMPORTS, f"{path.name} imports {roots - ALLOWED_IMPORTS}"


def test_gravity_oracle_point_mass():
    r = [7000.0, -1000.0, 2000.0]
    a = oracle_gravity(r, j2=0.0, j3=0.0, j4=0.0)
    n = math.sqrt(sum(c * c for c in r))
    assert a == pytest.approx([-MU * c / n**3 for c in r], rel=1e-15)


def test_gravity_oracle_j3_equatorial_limit():
    # the z -> 0 branch is the continuous limit of the general expression
    a0 = oracle_gravity([7000.0, 0.0, 0.0])[2]
    a1 = oracle_gravity([7000.0, 0.0, 1e-7])[2]
    assert a1 == pytest.approx(a0, rel=1e-9)


def test_fd_exact_for_quadratic_and_linear():
    A = np.array([[2.0, 1.0], [1.0, 3.0]])
    x = np.array([0.3, -0.7])
    g = oracle_fd_gradient(lambda v: 0.5 * v @ A @ v, x, h=1e-3)
    np.testing.assert_allclose(g, A @ x, rtol=1e-12)
    assert oracle_fd_directional(lambda v: 3 * v[0] - v[1], x, np.array([1.0, 2.0]), 0.1) == pytest.approx(1.0, rel=1e-14)
    assert oracle_fd_directional(lambda v: v[0] ** 4, x, np.array([1.0, 0.0]), 1e-2, order=4) == pytest.approx(4 * 0.3**3, rel=1e-10)
    np.testing.assert_allclose(oracle_fd_jacobian(lambda v: A @ v, x), A, rtol=1e-10)


def test_shadow_oracle_union_counts_overlap_once():
    plate = (0.0, 0.0, 2.0, 1.0, 0.0)
    occ = [(0.0, 0.0, 1.0, 1.0, 1.0), (0.5, 0.0, 1.5, 1.0, 2.0)]
    assert oracle_shadow_geometry(plate, occ) == pytest.approx(0.25)
    # tilted light slides the shadow
    assert oracle_shadow_geometry(plate, occ[:1], (-1.0, 0.0, 1.0)) == pytest.approx(0.5)
    assert oracle_shadow_geometry(plate, occ[:1], (1.0, 0.0, 1.0)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        oracle_shadow_geometry(plate, occ, (0.0, 0.0, -1.0))


def test_link_oracle_inverse_square_and_gating():
    base = oracle_download_rate(1e4, 1, 0.9, 437e6, 500, 10, 0.3, 2, 1000.0, 1)
    assert oracle_download_rate(1e4, 1, 0.9, 437e6, 500, 10, 0.3, 2, 2000.0, 1) == pytest.approx(base / 4, rel=1e-15)
    assert oracle_download_rate(1e4, 1, 0.9, 437e6, 500, 10, 0.3, 2, 1000.0, 0) == 0.0


def test_attitude_oracle_equilibrium():
    w = 0.0011
    assert oracle_attitude_rhs([0, 0, w, 0, 0, 1, 1, 0, 0], (0.03, 0.04, 0.05), w) == [0.0] * 9


def test_precision_oracles():
    assert float(oracle_difference_norm(["1e-17", "0", "0"], ["0", "0", "0"])) == 1e-17
    assert float(oracle_dot(["0.1", "0.2", "0.3"], ["1", "1", "1"])) == 0.6

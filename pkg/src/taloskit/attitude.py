"""Gravity-gradient attitude dynamics of an unsymmetric rigid body in circular orbit.

State layout (9 values): ``omega`` (body rates, rad/s), row ``C3`` and row
``C1`` of the RTN-to-body rotation matrix. Row ``C2`` is rebuilt as
``C3 x C1`` whenever it is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ode import OdeSystem


@dataclass(frozen=True)
class AttitudeState:
    omega: np.ndarray
    C3: np.ndarray
    C1: np.ndarray

    def __post_init__(self) -> None:
        for name in ("omega", "C3", "C1"):
            v = np.array(getattr(self, name), dtype=float).reshape(3)
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @classmethod
    def from_vector(cls, x) -> AttitudeState:
        x = np.asarray(x, dtype=float)
        return cls(x[0:3], x[3:6], x[6:9])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.omega, self.C3, self.C1])

    @property
    def C2(self) -> np.ndarray:
        return np.cross(self.C3, self.C1)

    def orthonormality_error(self) -> float:
        return orthonormality_drift(self.as_vector())

    @classmethod
    def initial(cls, omega=(0.0, 0.0, 0.0), C3=(0.0, 0.0, 1.0), C1=(1.0, 0.0, 0.0), tol: float = 1e-6) -> AttitudeState:
        """Checked constructor for initial conditions; rows must be orthonormal to ``tol``."""
        s = cls(omega, C3, C1)
        if s.orthonormality_error() > tol:
            raise ValueError("initial C1 and C3 rows must be orthonormal")
        return s


def orthonormality_drift(x) -> float:
    """max(|C1.C3|, ||C1| - 1|, ||C3| - 1|) for a state vector."""
    x = np.asarray(x, dtype=float)
    c3, c1 = x[3:6], x[6:9]
    return float(max(abs(c1 @ c3), abs(np.linalg.norm(c1) - 1.0), abs(np.linalg.norm(c3) - 1.0)))


@dataclass(frozen=True)
class AttitudeDynamics:
    """Principal inertia ``(I1, I2, I3)`` in kg m^2 and orbital rate ``Omega`` in rad/s."""

    inertia: tuple[float, float, float]
    Omega: float

    def __post_init__(self) -> None:
        I = tuple(float(v) for v in self.inertia)
        if len(I) != 3 or min(I) <= 0:
            raise ValueError("inertia must be three positive principal moments")
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            if I[j] + I[k] < I[i]:
                raise ValueError(f"inertia {I} violates the triangle inequality")
        if not self.Omega > 0:
            raise ValueError("orbital rate must be positive")
        object.__setattr__(self, "inertia", I)
        object.__setattr__(self, "_K", tuple(self.K.tolist()))

    @property
    def K(self) -> np.ndarray:
        I1, I2, I3 = self.inertia
        return np.array([(I2 - I3) / I1, (I3 - I1) / I2, (I1 - I2) / I3])


def _cyc(v: np.ndarray) -> np.ndarray:
    return np.array([v[1] * v[2], v[2] * v[0], v[0] * v[1]])


def _cyc_jac(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, v[2], v[1]], [v[2], 0.0, v[0]], [v[1], v[0], 0.0]])


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def attitude_rhs(state, dyn: AttitudeDynamics) -> np.ndarray:
    """Time derivative of the 9-component state (``AttitudeState`` or flat vector)."""
    x = state.as_vector() if isinstance(state, AttitudeState) else state
    wx, wy, wz, c31, c32, c33, c11, c12, c13 = (float(v) for v in x)
    Kx, Ky, Kz = dyn._K
    W = dyn.Omega
    c21 = c32 * c13 - c33 * c12
    c22 = c33 * c11 - c31 * c13
    c23 = c31 * c12 - c32 * c11
    return np.array(
        [
            Kx * (wy * wz - 3.0 * W * W * c21 * c31),
            Ky * (wz * wx - 3.0 * W * W * c31 * c11),
            Kz * (wx * wy - 3.0 * W * W * c11 * c21),
            c32 * wz - c33 * wy,
            c33 * wx - c31 * wz,
            c31 * wy - c32 * wx,
            c12 * wz - c13 * wy + W * c21,
            c13 * wx - c11 * wz + W * c22,
            c11 * wy - c12 * wx + W * c23,
        ]
    )


def attitude_jacobian(x, dyn: AttitudeDynamics) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    w, c3, c1 = x[0:3], x[3:6], x[6:9]
    c2 = np.cross(c3, c1)
    dc2_dc3 = -_skew(c1)
    dc2_dc1 = _skew(c3)
    first_col = np.array([c1[0], c2[0], c3[0]])
    # d(first_col)/d(c3, c1)
    e0 = np.array([1.0, 0.0, 0.0])
    dp_dc3 = np.vstack([np.zeros(3), e0 @ dc2_dc3, e0])
    dp_dc1 = np.vstack([e0, e0 @ dc2_dc1, np.zeros(3)])
    gg = -3.0 * dyn.Omega**2 * _cyc_jac(first_col)
    K = dyn.K[:, None]

    J = np.zeros((9, 9))
    J[0:3, 0:3] = K * _cyc_jac(w)
    J[0:3, 3:6] = K * (gg @ dp_dc3)
    J[0:3, 6:9] = K * (gg @ dp_dc1)
    J[3:6, 0:3] = _skew(c3)
    J[3:6, 3:6] = -_skew(w)
    J[6:9, 0:3] = _skew(c1)
    J[6:9, 3:6] = dyn.Omega * dc2_dc3
    J[6:9, 6:9] = -_skew(w) + dyn.Omega * dc2_dc1
    return J


def make_attitude_system(dyn: AttitudeDynamics) -> OdeSystem:
    no_u = np.zeros((9, 0))
    return OdeSystem(
        9,
        0,
        lambda t, x, u: attitude_rhs(x, dyn),
        lambda t, x, u: attitude_jacobian(x, dyn),
        lambda t, x, u: no_u,
        "attitude",
    )


def nutation_angle(state) -> float:
    """Angle between body 3-axis and orbit normal, ``arccos(C33)`` with clamping."""
    x = state.as_vector() if isinstance(state, AttitudeState) else np.asarray(state, dtype=float)
    return math.acos(min(1.0, max(-1.0, float(x[5]))))

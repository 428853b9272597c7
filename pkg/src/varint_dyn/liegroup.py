"""SE(3) and se(3) spatial algebra.

Twists and co-twists are ordered ``(angular, linear)`` everywhere, and every
6x6 operator in the package follows the same ordering.

Two retraction maps are supported: the exponential map (default) and the
Cayley map. Both have right-trivialised tangents ``dtau`` with
``d/ds tau(v + s w)|_0 = dtau_v(w) tau(v)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import DomainError

__all__ = [
    "RetractionKind", "Transform", "Twist", "CoTwist", "DomainError",
    "compose", "inverse", "retract", "retract_inverse", "dtau", "dtau_inv",
    "dtau_inv_dual", "dtau_inv_matrix", "dtau_matrix", "dtau_inv_directional",
    "Ad", "Ad_dual", "adjoint_matrix", "pairing", "rot_x", "rot_y", "rot_z",
]

# tolerance on |R^T R - I|_inf before a composed rotation is re-orthonormalised
RENORM_TOL = 1e-9


class RetractionKind(enum.IntEnum):
    EXPONENTIAL = K.EXP
    CAYLEY = K.CAYLEY

    @classmethod
    def parse(cls, value) -> "RetractionKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        if key in ("exp", "exponential"):
            return cls.EXPONENTIAL
        if key in ("cay", "cayley"):
            return cls.CAYLEY
        raise ValueError(f"unknown retraction {value!r}")


def _vec3(x, name):
    a = np.array(x, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    return a


def _orthonormalize(R):
    # nearest rotation in the Frobenius sense
    U, _, Vt = np.linalg.svd(R)
    out = U @ Vt
    if np.linalg.det(out) < 0:
        U[:, -1] *= -1
        out = U @ Vt
    return out


@dataclass(frozen=True, eq=False)
class Transform:
    """Rigid transform ``x -> rotation @ x + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        R.setflags(write=False)
        p = _vec3(self.translation, "translation")
        p.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", p)

    @classmethod
    def identity(cls) -> "Transform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, T) -> "Transform":
        T = np.asarray(T, dtype=float)
        return cls(T[:3, :3], T[:3, 3])

    @classmethod
    def from_translation(cls, p) -> "Transform":
        return cls(np.eye(3), p)

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def __matmul__(self, other: "Transform") -> "Transform":
        return compose(self, other)

    def allclose(self, other: "Transform", atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.matrix(), other.matrix(), rtol=0.0, atol=atol))

    def __repr__(self):
        return (f"Transform(rotation={self.rotation.tolist()}, "
                f"translation={self.translation.tolist()})")


@dataclass(frozen=True, eq=False)
class _Spatial:
    angular: np.ndarray
    linear: np.ndarray

    def __post_init__(self):
        w = _vec3(self.angular, "angular")
        v = _vec3(self.linear, "linear")
        w.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "angular", w)
        object.__setattr__(self, "linear", v)

    @classmethod
    def from_vector(cls, x):
        x = np.asarray(x, dtype=float).reshape(6)
        return cls(x[:3], x[3:])

    @classmethod
    def zero(cls):
        return cls(np.zeros(3), np.zeros(3))

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.angular, self.linear])

    def __add__(self, other):
        return type(self).from_vector(self.vector + other.vector)

    def __sub__(self, other):
        return type(self).from_vector(self.vector - other.vector)

    def __mul__(self, s):
        return type(self).from_vector(self.vector * float(s))

    __rmul__ = __mul__

    def __neg__(self):
        return type(self).from_vector(-self.vector)

    def __repr__(self):
        return (f"{type(self).__name__}(angular={self.angular.tolist()}, "
                f"linear={self.linear.tolist()})")


class Twist(_Spatial):
    """Element of se(3): body velocity, joint screw or scaled displacement."""


class CoTwist(_Spatial):
    """Element of the dual of se(3): momentum, impulse or wrench."""


def rot_x(angle: float) -> Transform:
    return retract(Twist([angle, 0, 0], [0, 0, 0]))


def rot_y(angle: float) -> Transform:
    return retract(Twist([0, angle, 0], [0, 0, 0]))


def rot_z(angle: float) -> Transform:
    return retract(Twist([0, 0, angle], [0, 0, 0]))


def pairing(f: CoTwist, v: Twist) -> float:
    return float(f.vector @ v.vector)


def inverse(T: Transform) -> Transform:
    Rt = T.rotation.T
    return Transform(Rt, -(Rt @ T.translation))


def compose(a: Transform, b: Transform) -> Transform:
    R = a.rotation @ b.rotation
    if np.abs(R.T @ R - np.eye(3)).max() > RENORM_TOL:
        R = _orthonormalize(R)
    return Transform(R, a.rotation @ b.translation + a.translation)


def retract(v: Twist, kind=RetractionKind.EXPONENTIAL) -> Transform:
    kind = RetractionKind.parse(kind)
    return Transform.from_matrix(K.retract(v.vector, int(kind)))


def retract_inverse(T: Transform, kind=RetractionKind.EXPONENTIAL) -> Twist:
    """Inverse retraction. Raises DomainError for rotations within 1e-6 of pi."""
    kind = RetractionKind.parse(kind)
    return Twist.from_vector(K.retract_inv(T.matrix(), int(kind)))


def dtau_inv_matrix(v: Twist, kind=RetractionKind.EXPONENTIAL) -> np.ndarray:
    kind = RetractionKind.parse(kind)
    return K.dtau_inv_matrix(v.vector, int(kind))


def dtau_matrix(v: Twist, kind=RetractionKind.EXPONENTIAL) -> np.ndarray:
    kind = RetractionKind.parse(kind)
    return K.dtau_matrix(v.vector, int(kind))


def dtau(v: Twist, w: Twist, kind=RetractionKind.EXPONENTIAL) -> Twist:
    return Twist.from_vector(dtau_matrix(v, kind) @ w.vector)


def dtau_inv(v: Twist, w: Twist, kind=RetractionKind.EXPONENTIAL) -> Twist:
    return Twist.from_vector(dtau_inv_matrix(v, kind) @ w.vector)


def dtau_inv_dual(v: Twist, f: CoTwist, kind=RetractionKind.EXPONENTIAL) -> CoTwist:
    return CoTwist.from_vector(dtau_inv_matrix(v, kind).T @ f.vector)


def dtau_inv_directional(v: Twist, w: Twist,
                         kind=RetractionKind.EXPONENTIAL) -> np.ndarray:
    """Derivative of the ``dtau_inv`` matrix at ``v`` in the direction ``w``."""
    kind = RetractionKind.parse(kind)
    return K.dtau_inv_directional(v.vector, w.vector, int(kind))


def adjoint_matrix(T: Transform) -> np.ndarray:
    return K.adjoint(T.matrix())


def Ad(T: Transform, v: Twist) -> Twist:
    return Twist.from_vector(adjoint_matrix(T) @ v.vector)


def Ad_dual(T: Transform, f: CoTwist) -> CoTwist:
    return CoTwist.from_vector(adjoint_matrix(T).T @ f.vector)

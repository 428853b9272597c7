"""Kinematic trees: bodies, joints, scene documents and chain generators.

Body ``i`` is attached to its parent through a single-DOF joint whose
relative transform is ``T_{parent,i}(q_i) = M_i @ exp(S_i q_i)``, with the
fixed offset ``M_i`` and the unit screw ``S_i`` expressed in the child frame.
Bodies are numbered from 1 in scene documents (0 is the inertial frame) and
from 0 in arrays.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import yaml

from . import _kernels as K
from .errors import ParseError, ValidationError
from .liegroup import Transform, Twist

__all__ = [
    "SpatialInertia", "JointKind", "Joint", "Body", "KinematicTree", "SimState",
    "serial_chain", "floating_body", "forward_kinematics", "load_scene",
    "load_scene_file", "save_scene", "DEFAULT_GRAVITY",
]

DEFAULT_GRAVITY = (0.0, -9.81, 0.0)
UNIT_TOL = 1e-9


def _hat(w):
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


@dataclass(frozen=True, eq=False)
class SpatialInertia:
    """Mass properties of one body.

    ``rotational_inertia`` is taken about the centre of mass, in body axes.
    With ``com`` at the origin the 6x6 matrix is ``diag(I, m*Id)``; otherwise
    it is the same inertia transported to the body frame origin. A body with
    zero mass and zero inertia is allowed as a massless connector.
    """

    mass: float
    rotational_inertia: np.ndarray
    com: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "mass", float(self.mass))
        I = np.array(self.rotational_inertia, dtype=float).reshape(3, 3)
        c = np.array(self.com, dtype=float).reshape(3)
        I.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "rotational_inertia", I)
        object.__setattr__(self, "com", c)

    @property
    def massless(self) -> bool:
        return self.mass == 0.0 and not np.any(self.rotational_inertia)

    def check(self, name="body"):
        I = self.rotational_inertia
        if not (np.all(np.isfinite(I)) and np.isfinite(self.mass)
                and np.all(np.isfinite(self.com))):
            raise ValidationError(f"{name}: inertia must be finite")
        if self.massless:
            return
        if self.mass <= 0:
            raise ValidationError(f"{name}: mass must be positive, got {self.mass}")
        if not np.allclose(I, I.T, rtol=0, atol=1e-12 * max(1.0, np.abs(I).max())):
            raise ValidationError(f"{name}: rotational inertia is not symmetric")
        if np.linalg.eigvalsh(I).min() <= 0:
            raise ValidationError(f"{name}: rotational inertia is not positive-definite")

    def matrix(self) -> np.ndarray:
        m = self.mass
        C = _hat(self.com)
        G = np.zeros((6, 6))
        G[:3, :3] = self.rotational_inertia + m * (C @ C.T)
        G[:3, 3:] = m * C
        G[3:, :3] = m * C.T
        G[3:, 3:] = m * np.eye(3)
        return G


class JointKind(enum.Enum):
    REVOLUTE = "revolute"
    PRISMATIC = "prismatic"


@dataclass(frozen=True, eq=False)
class Joint:
    kind: JointKind
    screw: Twist
    parent_to_joint: Transform = field(default_factory=Transform.identity)

    @classmethod
    def revolute(cls, axis, offset: Transform | None = None) -> "Joint":
        return cls(JointKind.REVOLUTE, Twist(axis, np.zeros(3)),
                   offset or Transform.identity())

    @classmethod
    def prismatic(cls, axis, offset: Transform | None = None) -> "Joint":
        return cls(JointKind.PRISMATIC, Twist(np.zeros(3), axis),
                   offset or Transform.identity())

    @property
    def axis(self) -> np.ndarray:
        if self.kind is JointKind.REVOLUTE:
            return self.screw.angular
        return self.screw.linear

    def check(self, name="joint"):
        if self.kind is JointKind.REVOLUTE:
            unit, other = self.screw.angular, self.screw.linear
        else:
            unit, other = self.screw.linear, self.screw.angular
        if abs(np.linalg.norm(unit) - 1.0) > UNIT_TOL:
            raise ValidationError(f"{name}: joint axis is not a unit vector")
        if np.any(other != 0.0):
            raise ValidationError(
                f"{name}: {self.kind.value} screw must have a zero "
                f"{'linear' if self.kind is JointKind.REVOLUTE else 'angular'} part")


@dataclass(frozen=True, eq=False)
class Body:
    inertia: SpatialInertia
    joint: Joint
    parent: int  # 1-based, 0 = inertial frame
    name: str = ""


@dataclass(frozen=True, eq=False)
class KinematicTree:
    """Immutable, topologically sorted tree of single-DOF bodies."""

    bodies: tuple
    gravity: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_GRAVITY))

    def __post_init__(self):
        object.__setattr__(self, "bodies", tuple(self.bodies))
        g = np.array(self.gravity, dtype=float).reshape(3)
        g.setflags(write=False)
        object.__setattr__(self, "gravity", g)
        self._validate()

    def _validate(self):
        if not self.bodies:
            raise ValidationError("tree has no bodies")
        for idx, body in enumerate(self.bodies, start=1):
            label = body.name or f"body {idx}"
            if body.parent == idx:
                raise ValidationError(f"{label}: parent refers to itself (cycle)")
            if not 0 <= body.parent < idx:
                raise ValidationError(
                    f"{label}: parent {body.parent} is not topologically sorted")
            body.inertia.check(label)
            body.joint.check(label)

    @property
    def dof(self) -> int:
        return len(self.bodies)

    def __len__(self):
        return len(self.bodies)

    @cached_property
    def parent(self) -> np.ndarray:
        return np.array([b.parent - 1 for b in self.bodies], dtype=np.int64)

    @cached_property
    def children(self) -> tuple:
        out = [[] for _ in self.bodies]
        for i, p in enumerate(self.parent):
            if p >= 0:
                out[p].append(i)
        return tuple(tuple(c) for c in out)

    @cached_property
    def offset(self) -> np.ndarray:
        return np.ascontiguousarray([b.joint.parent_to_joint.matrix() for b in self.bodies])

    @cached_property
    def screw(self) -> np.ndarray:
        return np.ascontiguousarray([b.joint.screw.vector for b in self.bodies])

    @cached_property
    def inertia(self) -> np.ndarray:
        return np.ascontiguousarray([b.inertia.matrix() for b in self.bodies])

    @cached_property
    def mass(self) -> np.ndarray:
        return np.array([b.inertia.mass for b in self.bodies])

    @cached_property
    def com(self) -> np.ndarray:
        return np.ascontiguousarray([b.inertia.com for b in self.bodies])

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    def kernel_args(self):
        return self.parent, self.offset, self.screw, self.inertia

    def with_gravity(self, gravity) -> "KinematicTree":
        return KinematicTree(self.bodies, gravity)


@dataclass
class SimState:
    """Configuration pair of a variational step plus the momentum cache.

    ``velocity`` and ``momentum`` hold the per-body average velocity and
    discrete momentum of the step ``q_prev -> q_curr``. They are optional and
    can always be regenerated from the two configurations.
    """

    q_prev: np.ndarray
    q_curr: np.ndarray
    time: float = 0.0
    velocity: np.ndarray | None = None
    momentum: np.ndarray | None = None

    def __post_init__(self):
        self.q_prev = np.array(self.q_prev, dtype=float)
        self.q_curr = np.array(self.q_curr, dtype=float)
        if self.q_prev.shape != self.q_curr.shape or self.q_prev.ndim != 1:
            raise ValueError("q_prev and q_curr must be vectors of equal length")

    @classmethod
    def _unchecked(cls, q_prev, q_curr, time, velocity, momentum):
        """State from owned float vectors, skipping the copies."""
        state = cls.__new__(cls)
        state.q_prev, state.q_curr, state.time = q_prev, q_curr, time
        state.velocity, state.momentum = velocity, momentum
        return state


def _rod_inertia(mass, length, radius):
    # solid cylinder along the body y axis
    ixx = mass * (3 * radius ** 2 + length ** 2) / 12.0
    iyy = mass * radius ** 2 / 2.0
    return np.diag([ixx, iyy, ixx])


def serial_chain(n: int, *, mass: float = 1.0, length: float = 0.1,
                 radius: float = 0.005, gravity=DEFAULT_GRAVITY) -> KinematicTree:
    """Chain of ``n`` identical rods joined by revolute joints about z.

    Each body frame sits on its joint, ``length`` below the parent frame along
    the parent's -y axis; the rod hangs from the joint with its centre of mass
    at ``(0, -length/2, 0)``.
    """
    if n < 1:
        raise ValidationError(f"serial chain needs at least one body, got {n}")
    inertia = SpatialInertia(mass, _rod_inertia(mass, length, radius),
                             (0.0, -length / 2.0, 0.0))
    offset = Transform.from_translation((0.0, -length, 0.0))
    bodies = [Body(inertia, Joint.revolute((0, 0, 1), offset), parent=i,
                   name=f"link{i + 1}") for i in range(n)]
    return KinematicTree(tuple(bodies), gravity)


def floating_body(mass: float, rotational_inertia, *, gravity=(0.0, 0.0, 0.0)) -> KinematicTree:
    """A single free rigid body realised by six joints and five massless links.

    Coordinates are ``(x, y, z, yaw, pitch, roll)``: three prismatic joints
    followed by revolute z-y-x. Only the last body carries mass.
    """
    none = SpatialInertia(0.0, np.zeros((3, 3)))
    axes = [np.eye(3)[k] for k in range(3)]
    bodies = [Body(none, Joint.prismatic(axes[k]), parent=k, name=f"slider_{'xyz'[k]}")
              for k in range(3)]
    bodies.append(Body(none, Joint.revolute(axes[2]), parent=3, name="yaw"))
    bodies.append(Body(none, Joint.revolute(axes[1]), parent=4, name="pitch"))
    bodies.append(Body(SpatialInertia(mass, rotational_inertia), Joint.revolute(axes[0]),
                       parent=5, name="body"))
    return KinematicTree(tuple(bodies), gravity)


def world_poses(tree: KinematicTree, q, ops=None) -> np.ndarray:
    """Body poses as an ``(n, 4, 4)`` array."""
    if ops is None:
        ops = np.zeros(1, dtype=np.int64)
    q = np.ascontiguousarray(q, dtype=float)
    if q.shape != (tree.dof,):
        raise ValueError(f"expected {tree.dof} coordinates, got shape {q.shape}")
    return K.forward_kinematics(tree.parent, tree.offset, tree.screw, q, ops)


def forward_kinematics(tree: KinematicTree, q, ops=None) -> list:
    return [Transform.from_matrix(T) for T in world_poses(tree, q, ops)]


# ---------------------------------------------------------------------------
# scene documents

_TOP_KEYS = {"gravity", "bodies"}
_BODY_KEYS = {"name", "parent", "mass", "inertia", "com", "joint"}
_JOINT_KEYS = {"type", "axis", "offset"}


def _numbers(value, count, where):
    if not isinstance(value, (list, tuple)) or len(value) != count:
        raise ParseError(f"{where}: expected a list of {count} numbers")
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ParseError(f"{where}: expected numbers, got {v!r}")
        out.append(float(v))
    return np.array(out)


def _reject_unknown(mapping, allowed, where):
    if not isinstance(mapping, dict):
        raise ParseError(f"{where}: expected a mapping")
    extra = sorted(set(mapping) - allowed)
    if extra:
        raise ParseError(f"{where}: unknown key(s) {', '.join(map(str, extra))}")


def _axis_angle_to_rotation(r):
    return K.exp_se3(np.concatenate([r, np.zeros(3)]))[:3, :3]


def _rotation_to_axis_angle(R):
    th, sx, sy, sz = K._rotation_angle(np.ascontiguousarray(R))
    if th < 1e-12:
        return np.array([sx, sy, sz])
    if th < np.pi - 1e-6:
        return th / np.sin(th) * np.array([sx, sy, sz])
    # near pi the axis comes from the symmetric part
    w, vecs = np.linalg.eigh(0.5 * (R + R.T))
    axis = vecs[:, np.argmax(w)]
    if axis @ np.array([sx, sy, sz]) < 0:
        axis = -axis
    return th * axis


def _parse_body(doc, idx):
    where = f"bodies[{idx}]"
    _reject_unknown(doc, _BODY_KEYS, where)
    for key in ("parent", "mass", "inertia", "joint"):
        if key not in doc:
            raise ParseError(f"{where}: missing key '{key}'")
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise ParseError(f"{where}: name must be a string")
    parent = doc["parent"]
    if isinstance(parent, bool) or not isinstance(parent, int):
        raise ParseError(f"{where}: parent must be an integer")
    mass = doc["mass"]
    if isinstance(mass, bool) or not isinstance(mass, (int, float)):
        raise ParseError(f"{where}: mass must be a number")
    ixx, iyy, izz, ixy, ixz, iyz = _numbers(doc["inertia"], 6, f"{where}.inertia")
    I = np.array([[ixx, ixy, ixz], [ixy, iyy, iyz], [ixz, iyz, izz]])
    com = _numbers(doc.get("com", [0, 0, 0]), 3, f"{where}.com")
    jdoc = doc["joint"]
    _reject_unknown(jdoc, _JOINT_KEYS, f"{where}.joint")
    for key in ("type", "axis"):
        if key not in jdoc:
            raise ParseError(f"{where}.joint: missing key '{key}'")
    try:
        kind = JointKind(jdoc["type"])
    except ValueError:
        raise ParseError(f"{where}.joint: unknown joint type {jdoc['type']!r}") from None
    axis = _numbers(jdoc["axis"], 3, f"{where}.joint.axis")
    off = _numbers(jdoc.get("offset", [0] * 6), 6, f"{where}.joint.offset")
    offset = Transform(_axis_angle_to_rotation(off[3:]), off[:3])
    if kind is JointKind.REVOLUTE:
        joint = Joint.revolute(axis, offset)
    else:
        joint = Joint.prismatic(axis, offset)
    return Body(SpatialInertia(float(mass), I, com), joint, parent, name)


def load_scene(text: str) -> KinematicTree:
    """Parse a scene document (YAML or JSON) into a validated tree."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"malformed scene document: {exc}") from None
    _reject_unknown(doc, _TOP_KEYS, "scene")
    if "bodies" not in doc:
        raise ParseError("scene: missing key 'bodies'")
    gravity = _numbers(doc.get("gravity", list(DEFAULT_GRAVITY)), 3, "scene.gravity")
    bodies = doc["bodies"]
    if not isinstance(bodies, list):
        raise ParseError("scene.bodies: expected a list")
    return KinematicTree(tuple(_parse_body(b, i) for i, b in enumerate(bodies)), gravity)


def load_scene_file(path) -> KinematicTree:
    return load_scene(Path(path).read_text(encoding="utf-8"))


def save_scene(tree: KinematicTree) -> str:
    def floats(a):
        return [float(x) for x in a]

    bodies = []
    for b in tree.bodies:
        I = b.inertia.rotational_inertia
        M = b.joint.parent_to_joint
        entry = {}
        if b.name:
            entry["name"] = b.name
        entry["parent"] = int(b.parent)
        entry["mass"] = float(b.inertia.mass)
        entry["inertia"] = floats([I[0, 0], I[1, 1], I[2, 2], I[0, 1], I[0, 2], I[1, 2]])
        if np.any(b.inertia.com):
            entry["com"] = floats(b.inertia.com)
        entry["joint"] = {
            "type": b.joint.kind.value,
            "axis": floats(b.joint.axis),
            "offset": floats(np.concatenate([M.translation,
                                             _rotation_to_axis_angle(M.rotation)])),
        }
        bodies.append(entry)
    doc = {"gravity": floats(tree.gravity), "bodies": bodies}
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)

"""Recursive kernels on kinematic trees.

* :func:`drnea` evaluates the forced discrete Euler-Lagrange residual in one
  forward and one backward pass.
* :func:`drnea_jacobian` differentiates that residual exactly with respect to
  the next configuration.
* :func:`abi_solve` applies ``M(q)^-1`` with the articulated-body recursion.
* :func:`rnea` and :func:`forward_dynamics` are the continuous inverse and
  forward dynamics used by the oracles, the Euler baseline and the
  forward-dynamics initial guess.

Every function takes an optional ``ops`` counter (``int64`` array of length
one) that the compiled kernels increment per spatial operation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels as K
from .errors import DomainError, SingularJointError
from .liegroup import CoTwist, RetractionKind, Twist
from .model import KinematicTree

__all__ = [
    "DiscreteStepContext", "ResidualReport", "drnea", "drnea_jacobian",
    "abi_solve", "rnea", "forward_dynamics", "mass_matrix", "bias_forces",
    "step_velocities", "op_counter", "DomainError", "SingularJointError",
]


def op_counter() -> np.ndarray:
    return np.zeros(1, dtype=np.int64)


def _vec(x, n, name):
    a = np.ascontiguousarray(x, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"{name}: expected shape ({n},), got {a.shape}")
    return a


@dataclass
class DiscreteStepContext:
    """Everything fixed during one root solve ``q_curr -> q_next``.

    ``external_impulses`` are per-body spatial impulses in body coordinates
    at time k; ``joint_impulses`` are generalized impulses (torque times dt).
    ``velocity_prev``/``momentum_prev`` may carry the previous step's
    per-body results; when absent they are recomputed from ``q_prev`` and
    ``q_curr``.
    """

    tree: KinematicTree
    dt: float
    q_prev: np.ndarray
    q_curr: np.ndarray
    external_impulses: np.ndarray | None = None
    joint_impulses: np.ndarray | None = None
    retraction: RetractionKind = RetractionKind.EXPONENTIAL
    velocity_prev: np.ndarray | None = None
    momentum_prev: np.ndarray | None = None

    def __post_init__(self):
        n = self.tree.dof
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        self.dt = float(self.dt)
        self.q_prev = _vec(self.q_prev, n, "q_prev")
        self.q_curr = _vec(self.q_curr, n, "q_curr")
        if self.external_impulses is None:
            self.external_impulses = np.zeros((n, 6))
        else:
            self.external_impulses = np.ascontiguousarray(self.external_impulses, dtype=float)
            if self.external_impulses.shape != (n, 6):
                raise ValueError("external_impulses must have shape (n, 6)")
        if self.joint_impulses is None:
            self.joint_impulses = np.zeros(n)
        else:
            self.joint_impulses = _vec(self.joint_impulses, n, "joint_impulses")
        self.retraction = RetractionKind.parse(self.retraction)
        if (self.velocity_prev is None) != (self.momentum_prev is None):
            raise ValueError("velocity_prev and momentum_prev must be given together")
        if self.velocity_prev is not None:
            self.velocity_prev = np.ascontiguousarray(self.velocity_prev, dtype=float)
            self.momentum_prev = np.ascontiguousarray(self.momentum_prev, dtype=float)
            if self.velocity_prev.shape != (n, 6) or self.momentum_prev.shape != (n, 6):
                raise ValueError("velocity_prev and momentum_prev must have shape (n, 6)")

    @classmethod
    def _unchecked(cls, tree, dt, q_prev, q_curr, retraction, velocity_prev,
                   momentum_prev):
        """Context from arrays that a previous step has already validated."""
        n = tree.dof
        ctx = cls.__new__(cls)
        ctx.tree, ctx.dt, ctx.retraction = tree, dt, retraction
        ctx.q_prev, ctx.q_curr = q_prev, q_curr
        ctx.external_impulses = np.zeros((n, 6))
        ctx.joint_impulses = np.zeros(n)
        ctx.velocity_prev, ctx.momentum_prev = velocity_prev, momentum_prev
        return ctx

    @property
    def n(self) -> int:
        return self.tree.dof

    def previous(self, ops=None):
        """Per-body average velocity and momentum of the step ``q_prev -> q_curr``."""
        if self.velocity_prev is not None:
            return self.velocity_prev, self.momentum_prev
        if ops is None:
            ops = op_counter()
        t = self.tree
        _, _, V = K.displacements(t.parent, t.offset, t.screw, self.q_prev,
                                  self.q_curr, self.dt, int(self.retraction), ops)
        mu = K.momenta(t.inertia, V, self.dt, int(self.retraction), ops)
        self.velocity_prev, self.momentum_prev = V, mu
        return V, mu

    @cached_property
    def transport(self) -> np.ndarray:
        """Previous momenta carried into the current body frames."""
        V, mu = self.previous()
        return K.transported_momenta(V, mu, self.dt, int(self.retraction), op_counter())


@dataclass
class ResidualReport:
    residual: np.ndarray
    momentum: np.ndarray = field(repr=False)
    velocity: np.ndarray = field(repr=False)

    @property
    def per_body_momentum(self) -> list:
        return [CoTwist.from_vector(m) for m in self.momentum]

    @property
    def per_body_velocity(self) -> list:
        return [Twist.from_vector(v) for v in self.velocity]


def drnea(ctx: DiscreteStepContext, q_next, ops=None) -> ResidualReport:
    """Residual impulse of the forced DEL equation at ``q_next``."""
    if ops is None:
        ops = op_counter()
    t = ctx.tree
    q_next = _vec(q_next, t.dof, "q_next")
    res, mu, V = K.drnea(t.parent, t.offset, t.screw, t.inertia, t.mass, t.com,
                         t.gravity, ctx.dt, ctx.q_curr, q_next, ctx.transport,
                         ctx.external_impulses, ctx.joint_impulses,
                         int(ctx.retraction), ops)
    return ResidualReport(res, mu, V)


def drnea_jacobian(ctx: DiscreteStepContext, q_next, ops=None) -> np.ndarray:
    """``d residual_i / d q_next_j`` as a dense ``(n, n)`` matrix."""
    if ops is None:
        ops = op_counter()
    t = ctx.tree
    q_next = _vec(q_next, t.dof, "q_next")
    return K.drnea_jacobian(t.parent, t.offset, t.screw, t.inertia, ctx.dt,
                            ctx.q_curr, q_next, int(ctx.retraction), ops)


def abi_solve(tree: KinematicTree, q, rhs, ops=None) -> np.ndarray:
    """``M(q)^-1 rhs`` in O(n) (zero velocity, gravity off)."""
    if ops is None:
        ops = op_counter()
    n = tree.dof
    return K.abi_solve(tree.parent, tree.offset, tree.screw, tree.inertia,
                       _vec(q, n, "q"), _vec(rhs, n, "rhs"), ops)


def rnea(tree: KinematicTree, q, qdot, qddot, gravity_on=True, ops=None) -> np.ndarray:
    """Generalized forces ``M(q) qddot + C(q, qdot) + g(q)``."""
    if ops is None:
        ops = op_counter()
    n = tree.dof
    g = tree.gravity if gravity_on else np.zeros(3)
    return K.rnea(tree.parent, tree.offset, tree.screw, tree.inertia, np.asarray(g, float),
                  _vec(q, n, "q"), _vec(qdot, n, "qdot"), _vec(qddot, n, "qddot"), ops)


def forward_dynamics(tree: KinematicTree, q, qdot, tau=None, gravity_on=True,
                     ops=None) -> np.ndarray:
    """Joint accelerations ``M^-1 (tau - C - g)`` by the articulated-body algorithm."""
    if ops is None:
        ops = op_counter()
    n = tree.dof
    tau = np.zeros(n) if tau is None else _vec(tau, n, "tau")
    g = tree.gravity if gravity_on else np.zeros(3)
    return K.aba(tree.parent, tree.offset, tree.screw, tree.inertia, np.asarray(g, float),
                 _vec(q, n, "q"), _vec(qdot, n, "qdot"), tau, ops)


def mass_matrix(tree: KinematicTree, q) -> np.ndarray:
    """Dense mass matrix assembled column by column from :func:`rnea`."""
    n = tree.dof
    zero = np.zeros(n)
    M = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        M[:, j] = rnea(tree, q, zero, e, gravity_on=False)
    return M


def bias_forces(tree: KinematicTree, q, qdot, gravity_on=True) -> np.ndarray:
    return rnea(tree, q, qdot, np.zeros(tree.dof), gravity_on=gravity_on)


def step_velocities(tree: KinematicTree, q_a, q_b, dt,
                    retraction=RetractionKind.EXPONENTIAL) -> np.ndarray:
    """Per-body average velocities of the step ``q_a -> q_b``."""
    n = tree.dof
    _, _, V = K.displacements(tree.parent, tree.offset, tree.screw, _vec(q_a, n, "q_a"),
                              _vec(q_b, n, "q_b"), float(dt),
                              int(RetractionKind.parse(retraction)), op_counter())
    return V

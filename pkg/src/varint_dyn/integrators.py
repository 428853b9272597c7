"""Time stepping: the variational integrator and a semi-implicit Euler baseline.

Both steppers carry a :class:`~varint_dyn.model.SimState` holding the last two
configurations. The variational stepper solves the discrete Euler-Lagrange
equation for the next one; the Euler stepper reads the velocity off the
configuration difference, takes accelerations from the articulated-body
algorithm and updates velocity first, then position.

Energy is reported the same way for both. Frame 0 uses the exact initial
state. Frame ``k >= 1`` uses the discrete average body velocities of the
step ``q^{k-1} -> q^k`` for kinetic energy and the mean potential of the two
endpoints, which is the same quadrature the discrete Lagrangian uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .dynamics import DiscreteStepContext, forward_dynamics, op_counter
from .errors import DomainError, NonConvergence
from .liegroup import RetractionKind
from .model import KinematicTree, SimState
from .solvers import SolverConfig, _solve

__all__ = [
    "Trajectory", "step_variational", "step_semi_implicit_euler", "total_energy",
    "potential_energy", "discrete_energy", "bootstrap", "simulate",
]


@dataclass
class Trajectory:
    """Recorded run.

    ``times``, ``configurations`` and ``energies`` have one entry per frame
    including frame 0. ``solve_traces`` has one entry per root solve; the
    first step comes from the bootstrap and has none.
    """

    times: list = field(default_factory=list)
    configurations: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    solve_traces: list = field(default_factory=list)

    def energy_array(self) -> np.ndarray:
        """``(frames + 1, 3)`` array of kinetic, potential and total energy."""
        e = np.asarray(self.energies, dtype=float).reshape(-1, 2)
        return np.column_stack([e, e.sum(axis=1)])


def potential_energy(tree: KinematicTree, q) -> float:
    """Gravitational potential ``sum_i -m_i g . p_com,i``."""
    T = K.forward_kinematics(tree.parent, tree.offset, tree.screw,
                             np.ascontiguousarray(q, dtype=float), op_counter())
    p = np.einsum("nij,nj->ni", T[:, :3, :3], tree.com) + T[:, :3, 3]
    return float(-(tree.mass * (p @ tree.gravity)).sum())


def _kinetic(tree, V):
    return 0.5 * float(np.einsum("ni,nij,nj->", V, tree.inertia, V))


def total_energy(tree: KinematicTree, q, qdot) -> tuple[float, float]:
    """Kinetic and potential energy of the continuous state ``(q, qdot)``."""
    q = np.ascontiguousarray(q, dtype=float)
    qdot = np.ascontiguousarray(qdot, dtype=float)
    A = K.joint_transforms(tree.offset, tree.screw, q)
    V = K.body_velocities(tree.parent, A, tree.screw, qdot)
    return _kinetic(tree, V), potential_energy(tree, q)


def discrete_energy(tree: KinematicTree, q_a, q_b, dt,
                    retraction=RetractionKind.EXPONENTIAL) -> tuple[float, float]:
    """Kinetic and potential energy attributed to the step ``q_a -> q_b``."""
    kind = int(RetractionKind.parse(retraction))
    _, _, V = K.displacements(tree.parent, tree.offset, tree.screw,
                              np.ascontiguousarray(q_a, dtype=float),
                              np.ascontiguousarray(q_b, dtype=float),
                              float(dt), kind, op_counter())
    pot = 0.5 * (potential_energy(tree, q_a) + potential_energy(tree, q_b))
    return _kinetic(tree, V), pot


def step_variational(state: SimState, tree: KinematicTree, dt: float,
                     cfg: SolverConfig | None = None, *,
                     retraction=RetractionKind.EXPONENTIAL, joint_impulses=None,
                     external_impulses=None, frame: int | None = None,
                     traces: list | None = None, ops=None) -> SimState:
    """Advance ``(q_prev, q_curr)`` to ``(q_curr, q_next)`` by one root solve.

    The per-body momenta found at ``q_next`` become the cache of the returned
    state. When ``traces`` is a list the step's :class:`SolveTrace` is
    appended to it. Errors carry ``frame`` when it is given.
    """
    cfg = cfg or SolverConfig()
    n = tree.dof
    if (external_impulses is None and joint_impulses is None
            and type(dt) is float and dt > 0 and type(retraction) is RetractionKind
            and state.q_curr.shape == (n,) and state.momentum is not None
            and state.momentum.shape == (n, 6) and state.velocity.shape == (n, 6)):
        # a state produced by this function; its arrays are already valid
        ctx = DiscreteStepContext._unchecked(tree, dt, state.q_prev, state.q_curr,
                                             retraction, state.velocity,
                                             state.momentum)
    else:
        ctx = DiscreteStepContext(tree, dt, state.q_prev, state.q_curr,
                                  external_impulses=external_impulses,
                                  joint_impulses=joint_impulses, retraction=retraction,
                                  velocity_prev=state.velocity,
                                  momentum_prev=state.momentum)
    try:
        res = _solve(ctx, cfg, ops=ops)
    except DomainError as err:
        if frame is None:
            raise
        tagged = DomainError(f"frame {frame}: {err}")
        tagged.frame = frame
        raise tagged from err
    except NonConvergence as err:
        if frame is not None:
            err.frame = frame
            err.args = (f"frame {frame}: {err.args[0]}",)
        raise
    if traces is not None:
        traces.append(res.trace)
    return SimState._unchecked(ctx.q_curr.copy(), res.q_next, state.time + dt,
                               res.velocity, res.momentum)


def step_semi_implicit_euler(state: SimState, tree: KinematicTree, dt: float,
                             joint_torques=None) -> SimState:
    """One semi-implicit Euler step with ``qdot = (q_curr - q_prev) / dt``."""
    qd = (state.q_curr - state.q_prev) / dt
    qdd = forward_dynamics(tree, state.q_curr, qd, joint_torques)
    qd = qd + dt * qdd
    return SimState(state.q_curr, state.q_curr + dt * qd, state.time + dt)


def bootstrap(tree: KinematicTree, q0, qdot0, dt: float, joint_torques=None) -> SimState:
    """Second configuration from the initial state by one semi-implicit Euler step."""
    q0 = np.array(q0, dtype=float)
    qd = np.asarray(qdot0, dtype=float) + dt * forward_dynamics(tree, q0, qdot0, joint_torques)
    return SimState(q0, q0 + dt * qd, dt)


def simulate(tree: KinematicTree, q0, qdot0, dt: float, frames: int, *,
             integrator: str = "variational", cfg: SolverConfig | None = None,
             retraction=RetractionKind.EXPONENTIAL) -> Trajectory:
    """Passive simulation for ``frames`` steps from ``(q0, qdot0)``."""
    if frames < 1:
        raise ValueError(f"frames must be at least 1, got {frames}")
    if integrator not in ("variational", "euler"):
        raise ValueError(f"unknown integrator {integrator!r}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    q0 = np.array(q0, dtype=float)
    traj = Trajectory([0.0], [q0.copy()], [total_energy(tree, q0, qdot0)])
    state = bootstrap(tree, q0, qdot0, dt)

    def record(k, s):
        traj.times.append(k * dt)
        traj.configurations.append(s.q_curr.copy())
        traj.energies.append(discrete_energy(tree, s.q_prev, s.q_curr, dt, retraction))

    record(1, state)
    for k in range(2, frames + 1):
        if integrator == "variational":
            state = step_variational(state, tree, dt, cfg, retraction=retraction,
                                     frame=k, traces=traj.solve_traces)
        else:
            state = step_semi_implicit_euler(state, tree, dt)
        record(k, state)
    return traj

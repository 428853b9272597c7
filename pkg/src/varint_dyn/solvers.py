"""Root finders for one variational step.

Three methods share one compiled loop and differ only in how they turn the
residual impulse ``e`` into a configuration update:

* ``RIQN``: ``q <- q - dt * M(q_curr)^-1 e``, one articulated-body solve per
  iteration, so each iteration is O(n).
* ``NEWTON``: ``q <- q - J^-1 e`` with the exact Jacobian, O(n^2) to build
  and O(n^3) to factor.
* ``BROYDEN``: good-Broyden rank-one updates of an inverse-Jacobian estimate
  seeded with the RIQN matrix ``dt * M^-1``.

Convergence is measured by the max-norm of the residual impulse.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _solve as _loops
from .dynamics import DiscreteStepContext, op_counter
from .errors import NonConvergence

__all__ = [
    "SolverMethod", "InitialGuess", "SolverConfig", "SolveTrace", "StepResult",
    "solve_step", "initial_guess", "NonConvergence",
]


class SolverMethod(str, enum.Enum):
    RIQN = "riqn"
    NEWTON = "newton"
    BROYDEN = "broyden"

    @classmethod
    def parse(cls, value) -> "SolverMethod":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown solver method {value!r}") from None


class InitialGuess(str, enum.Enum):
    HOLD = "hold"
    EXPLICIT_EULER = "euler"
    FORWARD_DYNAMICS = "fd"
    ZERO = "zero"

    @classmethod
    def parse(cls, value) -> "InitialGuess":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"explicit_euler": "euler", "forward_dynamics": "fd"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(f"unknown initial guess {value!r}") from None


_EMPTY = np.zeros((0, 6))

_METHOD_CODE = {
    SolverMethod.RIQN: _loops.RIQN,
    SolverMethod.NEWTON: _loops.NEWTON,
    SolverMethod.BROYDEN: _loops.BROYDEN,
}


@dataclass(frozen=True)
class SolverConfig:
    """Settings for :func:`solve_step`.

    ``tolerance`` bounds the max-norm of the residual impulse (N m s) and may
    be ``inf`` to accept the initial guess as is. ``refresh_mass`` makes RIQN
    re-evaluate the mass matrix at each iterate instead of freezing it at the
    current configuration. ``line_search`` halves a step while it increases
    the residual norm.
    """

    method: SolverMethod = SolverMethod.RIQN
    tolerance: float = 1e-9
    max_iterations: int = 30
    initial_guess: InitialGuess = InitialGuess.FORWARD_DYNAMICS
    line_search: bool = False
    refresh_mass: bool = False

    def __post_init__(self):
        object.__setattr__(self, "method", SolverMethod.parse(self.method))
        object.__setattr__(self, "initial_guess", InitialGuess.parse(self.initial_guess))
        tol = float(self.tolerance)
        if not tol > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        object.__setattr__(self, "tolerance", tol)
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError(f"max_iterations must be a positive integer, got {self.max_iterations}")
        object.__setattr__(self, "max_iterations", int(self.max_iterations))


@dataclass
class SolveTrace:
    """Per-step record; ``residual_norms`` includes the initial residual."""

    iterations: int
    residual_norms: list = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0


@dataclass
class StepResult:
    """Solution of one step with the momenta and velocities found at it."""

    q_next: np.ndarray
    trace: SolveTrace
    momentum: np.ndarray = field(repr=False)
    velocity: np.ndarray = field(repr=False)


_GUESS_CODE = {
    InitialGuess.HOLD: _loops.GUESS_HOLD,
    InitialGuess.EXPLICIT_EULER: _loops.GUESS_EULER,
    InitialGuess.FORWARD_DYNAMICS: _loops.GUESS_FD,
    InitialGuess.ZERO: _loops.GUESS_ZERO,
}


def initial_guess(ctx: DiscreteStepContext, kind=InitialGuess.FORWARD_DYNAMICS) -> np.ndarray:
    """Starting point for the root finder.

    The forward-dynamics predictor takes ``qdot = (q_curr - q_prev) / dt``,
    gets accelerations from the articulated-body algorithm with joint forces
    ``joint_impulses / dt`` and applies one semi-implicit Euler step. External
    impulses are not included in the predictor.
    """
    t = ctx.tree
    return _loops.predict(_GUESS_CODE[InitialGuess.parse(kind)], t.parent, t.offset,
                          t.screw, t.inertia, t.gravity, ctx.dt, ctx.q_prev, ctx.q_curr,
                          ctx.joint_impulses, ctx.q_curr, op_counter())


def _solve(ctx: DiscreteStepContext, cfg: SolverConfig, q0=None, ops=None) -> StepResult:
    if ops is None:
        ops = op_counter()
    if q0 is None:
        guess, q_given = _GUESS_CODE[cfg.initial_guess], ctx.q_curr
    else:
        guess, q_given = _loops.GUESS_GIVEN, np.ascontiguousarray(q0, dtype=float)
        if q_given.shape != ctx.q_curr.shape:
            raise ValueError(f"q0: expected shape {ctx.q_curr.shape}, got {q_given.shape}")
    have_prev = ctx.velocity_prev is not None
    V_prev = ctx.velocity_prev if have_prev else _EMPTY
    mu_prev = ctx.momentum_prev if have_prev else _EMPTY
    t = ctx.tree
    norms = np.empty(cfg.max_iterations + 1)
    start = time.perf_counter()
    q, best, it, mu, V = _loops.variational_step(
        _METHOD_CODE[cfg.method], guess, t.parent, t.offset, t.screw, t.inertia,
        t.mass, t.com, t.gravity, ctx.dt, ctx.q_prev, ctx.q_curr, V_prev, mu_prev,
        have_prev, ctx.external_impulses, ctx.joint_impulses, int(ctx.retraction),
        q_given, cfg.tolerance, cfg.max_iterations, cfg.line_search,
        cfg.refresh_mass, norms, ops)
    wall = time.perf_counter() - start
    converged = bool(norms[it] <= cfg.tolerance)
    trace = SolveTrace(int(it), norms[: it + 1].tolist(), converged, wall)
    if not converged:
        final = norms[it]
        detail = "residual is NaN" if math.isnan(final) else f"residual {final:.3e}"
        raise NonConvergence(
            f"{cfg.method.value} did not converge in {it} iterations ({detail}, "
            f"tolerance {cfg.tolerance:.1e})", q_best=best, trace=trace)
    return StepResult(q, trace, mu, V)


def solve_step(ctx: DiscreteStepContext, cfg: SolverConfig | None = None,
               q0=None, ops=None) -> tuple[np.ndarray, SolveTrace]:
    """Find ``q_next`` with ``drnea(ctx, q_next)`` within tolerance of zero.

    ``q0`` overrides the configured initial guess. Raises
    :class:`NonConvergence` with the best iterate and the trace when the
    iteration limit is reached, and propagates ``DomainError`` when an iterate
    leaves the retraction's domain.
    """
    res = _solve(ctx, cfg or SolverConfig(), q0, ops)
    return res.q_next, res.trace

"""Linear-time variational integration of multibody kinematic trees.

Submodules:

* ``liegroup``: SE(3) transforms, twists, retractions and their tangents.
* ``model``: kinematic trees, scene documents and the serial-chain generator.
* ``dynamics``: the discrete recursive residual, its Jacobian, articulated-body solves.
* ``solvers``: RIQN, Newton and Broyden root finders for one time step.
* ``integrators``: variational and semi-implicit Euler time stepping.
* ``bench``: the energy, scaling and convergence experiments.
"""

from .dynamics import (DiscreteStepContext, ResidualReport, abi_solve, drnea,
                       drnea_jacobian, forward_dynamics, mass_matrix, rnea)
from .errors import (DomainError, NonConvergence, ParseError, SingularJointError,
                     ValidationError)
from .integrators import (Trajectory, bootstrap, simulate, step_semi_implicit_euler,
                          step_variational, total_energy)
from .liegroup import CoTwist, RetractionKind, Transform, Twist
from .model import (KinematicTree, SimState, floating_body, forward_kinematics,
                    load_scene, save_scene, serial_chain)
from .solvers import InitialGuess, SolverConfig, SolverMethod, SolveTrace, solve_step

__version__ = "0.1.0"

__all__ = [
    "DiscreteStepContext", "ResidualReport", "abi_solve", "drnea", "drnea_jacobian",
    "forward_dynamics", "mass_matrix", "rnea",
    "DomainError", "NonConvergence", "ParseError", "SingularJointError", "ValidationError",
    "Trajectory", "bootstrap", "simulate", "step_semi_implicit_euler", "step_variational",
    "total_energy",
    "CoTwist", "RetractionKind", "Transform", "Twist",
    "KinematicTree", "SimState", "floating_body", "forward_kinematics", "load_scene",
    "save_scene", "serial_chain",
    "InitialGuess", "SolverConfig", "SolverMethod", "SolveTrace", "solve_step",
]

"""Exception types shared across the package."""


class DomainError(ValueError):
    """A displacement or twist lies outside the domain of the retraction map.

    Inside a time step this usually means ``dt`` is too large for the motion.
    """


class ParseError(ValueError):
    """The scene document could not be parsed."""


class ValidationError(ValueError):
    """A kinematic tree violates one of its structural invariants."""


class SingularJointError(ArithmeticError):
    """An articulated-inertia pivot vanished during the ABI recursion."""


class NonConvergence(RuntimeError):
    """The root finder hit its iteration limit.

    The best iterate and the full trace are kept on the exception so callers
    can inspect or recover from the failed step.
    """

    def __init__(self, message, q_best=None, trace=None, frame=None):
        super().__init__(message)
        self.q_best = q_best
        self.trace = trace
        self.frame = frame

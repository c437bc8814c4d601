"""Exceptions raised by the restless bandit tools"""

from __future__ import annotations


class DegenerateChainError(ValueError):
    """A multi-state chain has a zero down-probability, so it is not ergodic"""


class LengthMismatchError(ValueError):
    """Two vectors that should be aligned have different lengths"""


class InvalidInstanceError(ValueError):
    """An instance definition can not be used (ragged arms, bad initial states...)"""


class InvalidActionError(ValueError):
    """An action outside of {0, ..., N} was requested"""


class StateBudgetExceededError(RuntimeError):
    """Belief-state enumeration went past the configured cap"""

    def __init__(self, count: int, budget: int):
        RuntimeError.__init__(
            self,
            f"Reachable belief-state count reached {count}, above the budget of {budget}",
        )
        self.count = count
        self.budget = budget

    def __reduce__(self) -> tuple:
        return (type(self), (self.count, self.budget))


class NonConvergenceError(RuntimeError):
    """Relative value iteration hit its iteration cap"""

    def __init__(self, span: float, iterations: int):
        RuntimeError.__init__(
            self,
            f"Relative value iteration did not converge after {iterations} iterations, "
            f"final span {span:.3e}",
        )
        self.span = span
        self.iterations = iterations

    def __reduce__(self) -> tuple:
        return (type(self), (self.span, self.iterations))


class InsufficientDataError(ValueError):
    """An (arm, state) pair has no completed observation"""

    def __init__(self, arm: int, state: int):
        ValueError.__init__(
            self, f"No completed observation of state {state} for arm {arm}"
        )
        self.arm = arm
        self.state = state

    def __reduce__(self) -> tuple:
        return (type(self), (self.arm, self.state))


class EmptyGridError(ValueError):
    """A Thompson Sampling prior has no candidate"""


class ZeroProbabilityError(ValueError):
    """The conditioning state of a coupling has zero probability"""


class CouplingPreconditionError(RuntimeError):
    """The dominance required by a coupled simulation does not hold"""


class ReplicationError(RuntimeError):
    """A replication of an experiment failed"""

    def __init__(self, rep: int, error: BaseException):
        RuntimeError.__init__(self, f"Replication {rep} failed: {error!r}")
        self.rep = rep
        self.error = error

    def __reduce__(self) -> tuple:
        return (type(self), (self.rep, self.error))

"""Exception types shared across the package."""


class JumpHedgeError(Exception):
    """Base class for package-specific failures."""


class SingularPointError(JumpHedgeError, ValueError):
    """Evaluation requested exactly at a singular point (e.g. a barrier endpoint)."""


class StepBudgetError(JumpHedgeError, RuntimeError):
    """A simulated path exceeded its hard step budget before exiting."""

    def __init__(self, path_index, max_steps):
        self.path_index = path_index
        self.max_steps = max_steps
        super().__init__(
            f"path {path_index} exceeded the step budget of {max_steps} before exit"
        )


class RuleViolationError(JumpHedgeError, ValueError):
    """A barrier rule evaluated to a non-positive width along a path."""


class HypothesisViolationError(JumpHedgeError, ValueError):
    """Model input violates a structural hypothesis (e.g. non-increasing hedge function)."""


class BracketError(JumpHedgeError, RuntimeError):
    """The optimizer could not bracket a minimum inside its search box."""


class BudgetRangeError(JumpHedgeError, ValueError):
    """A requested cost budget falls outside the sampled frontier range."""


class FitDegeneracyError(JumpHedgeError, RuntimeError):
    """Too few frontier points to fit a convergence rate."""


class ConfigError(JumpHedgeError, ValueError):
    """Invalid experiment configuration; message carries the offending field path."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class InternalConsistencyError(JumpHedgeError, RuntimeError):
    """An invariant that should hold by construction was violated."""

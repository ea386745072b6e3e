"""Custom exception classes for ehpc."""


class EhpcError(Exception):
    """Base exception for ehpc errors."""

    pass


class ScenarioError(EhpcError):
    """Exception for malformed or invalid problem instances."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(message)


class PolicyViolationError(EhpcError):
    """Exception when a policy allocates more power than the battery holds."""

    def __init__(self, message: str, slot: int | None = None):
        self.slot = slot
        super().__init__(message)


class InfeasibleAllocationError(EhpcError):
    """Exception for infeasible within-block allocation sequences."""

    def __init__(self, message: str, index: int | None = None):
        self.index = index
        super().__init__(message)


class NoRegenerationError(EhpcError):
    """Exception when epoch statistics are requested but p = 0."""

    pass


class NotSemiBernoulliError(EhpcError):
    """Exception when a distribution has mass strictly between 0 and E_c."""

    def __init__(self, message: str, atom: float | None = None):
        self.atom = atom
        super().__init__(message)


class NonConvergenceError(EhpcError):
    """Exception when value iteration hits its iteration cap."""

    def __init__(self, message: str, span: float, iterations: int):
        self.span = span
        self.iterations = iterations
        super().__init__(f"{message} (span={span:.3e} after {iterations} iterations)")

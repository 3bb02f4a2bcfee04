"""Exception types raised across heatchain."""


class HeatChainError(Exception):
    """Base class for all heatchain errors."""


class ContractViolation(HeatChainError, ValueError):
    """An operation was called outside its precondition."""


class NoPinningError(HeatChainError, ValueError):
    pass


class DegenerateError(HeatChainError, ValueError):
    pass


class LimitConvexityError(HeatChainError, ValueError):
    pass


class NotLinearError(HeatChainError, ValueError):
    pass


class NotHurwitzError(HeatChainError, ValueError):
    pass


class InsufficientSamplesError(HeatChainError, ValueError):
    pass


class NoDecayWindowError(HeatChainError, RuntimeError):
    pass


class CoefficientBlowUp(HeatChainError, RuntimeError):
    pass


class BlowUpError(HeatChainError, FloatingPointError):
    """Numerical blow-up while integrating; carries the step index and state."""

    def __init__(self, step, state, message=None):
        self.step = int(step)
        self.state = state
        super().__init__(message or f"blow-up at step {self.step}")

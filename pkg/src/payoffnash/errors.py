"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An input broke a documented precondition."""


class GameConstructionError(ContractViolation):
    """A game specification does not satisfy the monotonicity or range checks."""


class NonFiniteError(ContractViolation):
    """A NaN or infinity showed up where a finite number is required."""

    def __init__(self, message, value=None, context=None):
        super().__init__(message)
        self.value = value
        self.context = context or {}

"""Exception types shared across the package."""


class ModelError(Exception):
    """Base class for physics/model-level failures."""


class EmptyBranchError(ModelError):
    """Raised when a heralded branch has zero probability (state undefined)."""


class IllConditionedError(ModelError):
    """Raised when an inverse-loss transformation would amplify noise beyond bounds."""


class InconsistentBudgetError(ValueError):
    """Raised when a residual-loss computation would yield a negative loss."""

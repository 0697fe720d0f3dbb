"""Exception and warning classes raised by catmml."""


class CatmmlError(Exception):
    """Base class for all errors raised by this package."""


class DatasetValidationError(CatmmlError, ValueError):
    """Raised when an observation table violates the dataset invariants.

    ``row`` and ``variable`` locate the offending cell when known (0-based).
    """

    def __init__(self, message, row=None, variable=None):
        super().__init__(message)
        self.row = row
        self.variable = variable


class DegenerateLikelihoodError(CatmmlError, FloatingPointError):
    """Raised when an observation has zero density under every component."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class EmptyComponentError(CatmmlError):
    """Raised by the classical M-step when a component receives no mass."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class AnnihilationError(CatmmlError):
    """Raised when the penalized mixing-weight update removes every component."""


class InfiniteDivergenceError(CatmmlError, ValueError):
    """Raised when a KL divergence between components is infinite."""


class UndefinedSeparationError(CatmmlError, ValueError):
    """Raised when separation is requested for a single-component model."""


class GenerationError(CatmmlError):
    """Raised when a planted mixture with the requested separation cannot be drawn."""


class UndefinedAssociationError(CatmmlError, ValueError):
    """Raised when a contingency table has a single row or column."""


class ModelFileError(CatmmlError, ValueError):
    """Raised on malformed or incompatible model files."""


class IdentifiabilityWarning(UserWarning):
    """Emitted when trial counts are too small to guarantee identifiability."""

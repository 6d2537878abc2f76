"""Exception and warning classes shared across the package."""


class ClinstatError(Exception):
    """Base class for all errors raised by clinstat."""


class ConfigError(ClinstatError):
    """Invalid or unparseable configuration."""


class DataError(ClinstatError, ValueError):
    """Input data violates a schema or operation precondition."""


class FitError(ClinstatError):
    """A model could not be fitted (degenerate target, singular design, divergence)."""


class SingularDesignError(FitError):
    """The information matrix is singular; ``columns`` names the collinear design columns."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class ArtifactError(ClinstatError):
    """A persisted model file is malformed or incompatible."""


class ClinstatWarning(UserWarning):
    pass


class SeparationWarning(ClinstatWarning):
    """Coefficients diverged; the maximum-likelihood estimate does not exist."""


class SchemaMismatchWarning(ClinstatWarning):
    pass

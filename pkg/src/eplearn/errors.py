"""Exception and warning types used across the package."""


class EplearnError(Exception):
    """Base class for all package-specific errors."""


class EmptyData(EplearnError):
    """Raised when an input table has no rows."""


class NonBinaryTreatment(EplearnError):
    """Raised when a treatment entry is not exactly 0 or 1."""


class NonFiniteValue(EplearnError):
    """Raised when a covariate, treatment, or outcome entry is NaN or infinite."""


class NonFiniteLoss(EplearnError):
    """Raised when a pointwise loss evaluation overflows."""


class SingularDesign(EplearnError):
    """Raised by unpenalized least squares on a rank-deficient design."""


class NoConvergence(EplearnError):
    """Raised when IRLS fails to converge within the iteration budget."""


class KTooLarge(EplearnError):
    """Raised when a k-nearest-neighbors request exceeds the training size."""


class BadFoldCount(EplearnError):
    """Raised when a fold count is outside [1, n]."""


class MethodOutcomeMismatch(EplearnError):
    """Raised when debiasing method 1 is requested for outcomes outside [0, 1]."""


class AllZeroWeights(EplearnError):
    """Raised when a weighted fit receives no positive weight."""


class DimensionMismatch(EplearnError):
    """Raised when query covariates do not match the fitted dimension."""


class DegenerateRangeWarning(UserWarning):
    """Warns that a constant covariate dimension was dropped from the sieve basis."""


class ZeroWeightWarning(UserWarning):
    """Warns that rows with exactly zero pseudo-weight were excluded."""


class ScoreResidualWarning(UserWarning):
    """Warns that the post-adjustment score residual exceeds the expected tolerance."""

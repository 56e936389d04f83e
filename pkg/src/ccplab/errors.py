"""Exception hierarchy.

Every error carries a short machine-readable ``code`` and belongs to one of
two families: configuration problems (bad input shapes, invalid parameters)
and numerical-precondition failures (undefined conditionals, forbidden
regions, guard violations). The command line maps the families to distinct
exit codes.
"""


class CCPLabError(Exception):
    code = "error"


class ConfigError(CCPLabError, ValueError):
    code = "config"


class DimensionMismatch(ConfigError):
    code = "dimension_mismatch"


class NumericalPreconditionError(CCPLabError, ValueError):
    code = "numerical_precondition"


class NonFiniteValue(NumericalPreconditionError):
    code = "non_finite"


class NotHermitian(NumericalPreconditionError):
    code = "not_hermitian"


class ZeroVector(NumericalPreconditionError):
    code = "zero_vector"


class OrthogonalConditions(NumericalPreconditionError):
    """Pre- and post-selection overlap too small for a conditional to exist."""

    code = "orthogonal_conditions"


class ZeroReferenceOverlap(OrthogonalConditions):
    code = "zero_reference_overlap"


class ForbiddenRegion(NumericalPreconditionError):
    code = "forbidden_region"


class OpenOrbit(NumericalPreconditionError):
    code = "open_orbit"


class WrapAroundGuard(NumericalPreconditionError):
    code = "wrap_around_guard"


class InsufficientTrials(NumericalPreconditionError):
    code = "insufficient_trials"

"""Exception hierarchy.

Numerical failures and hypothesis failures are kept apart so that the
command line driver can map them to different exit codes.
"""


class HfkError(Exception):
    """Base class for all package errors."""


class DomainError(HfkError, ValueError):
    """Point or parameter outside the admissible region of a model."""


class SingularMetric(HfkError):
    pass


class BandLimitError(HfkError):
    """A sampled field carries visible energy at the top of its band."""


class DegenerateSurface(HfkError):
    pass


class ZeroMeanCurvature(HfkError):
    pass


class StepError(HfkError):
    """A finite-difference step produced a degenerate intermediate surface."""


class NonPositiveH(HfkError):
    pass


class NoConvergence(HfkError):
    pass


class TailError(HfkError):
    pass


class ZeroEnergy(HfkError):
    pass


class NotCentered(HfkError):
    pass


class HypothesisViolation(HfkError):
    """Raised when the data violate a hypothesis of the existence theory."""


class BoundaryMinimum(HypothesisViolation):
    pass


class NotAFoliation(HypothesisViolation):
    pass


class ConfigError(HfkError, ValueError):
    pass

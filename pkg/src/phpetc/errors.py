"""Exception taxonomy shared by all toolkit modules."""


class ToolkitError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(ToolkitError):
    """Matrix or vector shapes are inconsistent with the declared dimensions."""


class AntisymmetryViolation(ToolkitError):
    """A structure matrix J fails J + J^T = 0."""


class DissipationViolation(ToolkitError):
    """A dissipation matrix R is not symmetric positive semidefinite."""


class EquilibriumViolation(ToolkitError):
    """The energy gradient does not vanish at the declared equilibrium."""


class GradientMismatch(ToolkitError):
    """The supplied Hessian disagrees with finite differences of the gradient."""


class StepMismatch(ToolkitError):
    """A time quantity is not an integer multiple of the integration step."""


class NonFiniteState(ToolkitError):
    """The simulated state left the finite-norm guard region."""


class InsufficientHistory(ToolkitError):
    """A history buffer does not span the requested delay window."""


class NonConstantMatrices(ToolkitError):
    """Certification was requested for a model with state-dependent blocks."""


class SolverFailure(ToolkitError):
    """The feasibility engine could not produce a trustworthy verdict."""


class NoFeasiblePoint(ToolkitError):
    """No certificate exists even at the most permissive parameter value."""


class ConfigError(ToolkitError):
    """A scenario file contains unknown sections, unknown keys, or bad values."""

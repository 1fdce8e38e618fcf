"""Exception hierarchy shared by all modules."""


class DissipationlessError(Exception):
    """Base class for every error raised by the package."""


class ModelError(DissipationlessError, ValueError):
    """Invalid system or environment description."""


class DimensionMismatch(ModelError):
    pass


class NotSymmetric(ModelError):
    pass


class NotPositiveDefinite(ModelError):
    pass


class NegativeCoupling(ModelError):
    pass


class BandCollapse(ModelError):
    pass


class NumericalError(DissipationlessError, ArithmeticError):
    """A numerical procedure could not reach its tolerance."""


class QuadratureFailure(NumericalError):
    pass


class OnBandEvaluation(NumericalError):
    """Laplace transform requested on a branch cut; use boundary values."""


class EdgeEvaluation(NumericalError):
    """Boundary value requested too close to a band edge."""


class TrackingAmbiguity(NumericalError):
    pass


class RootBracketFailure(NumericalError):
    pass


class StepTooLarge(NumericalError):
    pass


class WindowTooShort(NumericalError):
    pass


class GridMismatch(DissipationlessError, ValueError):
    pass


class NonPSDBin(NumericalError):
    pass


class PhysicsError(DissipationlessError):
    """The requested physics is not defined for this parameter point."""


class UnstableModel(PhysicsError):
    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class UnstableBeforeCritical(PhysicsError):
    def __init__(self, message, g_unstable=None):
        super().__init__(message)
        self.g_unstable = g_unstable


class IndefiniteTotalForm(PhysicsError):
    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class DegenerateSpectrum(PhysicsError):
    pass


class ModeOutsideGap(PhysicsError):
    pass


class ConfigError(DissipationlessError, ValueError):
    """Malformed run configuration; carries the offending field or line."""

    def __init__(self, message, field=None, line=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field '{field}'")
        super().__init__(f"{', '.join(loc)}: {message}" if loc else message)
        self.field = field
        self.line = line


class EdgeDivergence(PhysicsError):
    """η̃'(iω_c) is infinite at a band edge, so the critical coupling is zero."""


class NoLocalizedModes(PhysicsError):
    pass

"""Exception hierarchy shared by all modules."""


class DualstabError(Exception):
    """Base class for every error raised by the package."""


class MarketSpecError(DualstabError, ValueError):
    """A market description is structurally invalid."""


class NonPositiveProbability(MarketSpecError):
    pass


class DisconnectedTree(MarketSpecError):
    pass


class DegenerateBranching(MarketSpecError):
    pass


class NoMartingaleMeasure(DualstabError):
    """The martingale-measure polytope has no strictly positive point."""


class EmptyBundle(DualstabError, ValueError):
    pass


class ConjugateDiverges(DualstabError):
    pass


class BoundaryPoint(DualstabError, ValueError):
    pass


class UnboundedSubdifferentials(DualstabError):
    pass


class NotApplicable(DualstabError):
    pass


class NoPowerBound(DualstabError):
    pass


class SolverError(DualstabError):
    """Base class for optimizer failures (CLI exit code 3)."""


class InfeasibleStart(SolverError):
    pass


class SolverDiverged(SolverError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class MismatchedPair(SolverError):
    pass


class EmptySet(DualstabError, ValueError):
    pass


class ConfigError(DualstabError, ValueError):
    """Experiment configuration failed validation (CLI exit code 2)."""

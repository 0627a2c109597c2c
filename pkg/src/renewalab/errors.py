"""Exception hierarchy shared by all renewalab modules."""


class RenewalabError(Exception):
    """Base class for every error raised by the package."""


class DimensionError(RenewalabError, ValueError):
    pass


class ZeroDriftError(RenewalabError, ValueError):
    """The drift vector vanishes (centered case is out of scope)."""


class SingularMatrixError(RenewalabError, ValueError):
    pass


class DomainError(RenewalabError, ValueError):
    pass


class ErgodicityError(RenewalabError, ValueError):
    """Chain is reducible or periodic."""


class ContractionError(RenewalabError, ValueError):
    """Iterative model is not strictly contractive."""


class SpectralGapError(RenewalabError, RuntimeError):
    pass


class DecompositionError(RenewalabError, RuntimeError):
    pass


class ConsistencyError(RenewalabError, RuntimeError):
    """Finite-difference derivative disagrees with the analytic value."""


class DifferentiationError(RenewalabError, RuntimeError):
    pass


class BandError(RenewalabError, RuntimeError):
    pass


class LatticeError(RenewalabError, ValueError):
    """Monte Carlo renewal estimation refused for lattice evidence."""


class BudgetError(RenewalabError, ValueError):
    pass


class SingularityError(RenewalabError, RuntimeError):
    """Shell refinement around the integrable singularity did not converge."""


class CapabilityError(RenewalabError, ValueError):
    """Derivatives required for a norm are not available."""


class DomainCoverageError(RenewalabError, ValueError):
    pass


class HypothesisViolationError(RenewalabError, ValueError):
    pass


class EnvelopeError(RenewalabError, RuntimeError):
    pass


class ConfigError(RenewalabError, ValueError):
    pass

"""Exception types.

Every error carries a short machine-readable ``code`` so the command line
driver can report the failing condition by name.
"""


class RandGibbsError(Exception):
    code = "error"

    def __init__(self, message="", **details):
        super().__init__(message or self.code)
        self.details = details


class InvalidConfig(RandGibbsError):
    code = "invalid-config"


class HorizonExhausted(RandGibbsError):
    code = "horizon-exhausted"


class BudgetExceeded(RandGibbsError):
    code = "budget-exceeded"

    def __init__(self, message="", count=None, budget=None, **details):
        super().__init__(message, count=count, budget=budget, **details)
        self.count = count
        self.budget = budget


class InconsistentFiber(RandGibbsError):
    code = "inconsistent-fiber"


class DomainError(RandGibbsError):
    code = "domain-error"


class NonMonotoneBranch(RandGibbsError):
    code = "non-monotone-branch"


class RequiresCoarsening(RandGibbsError):
    code = "requires-coarsening"


class BracketFailure(RandGibbsError):
    code = "bracket-failure"


class NotConcave(RandGibbsError):
    code = "not-concave"


class TooShallowWeights(RandGibbsError):
    code = "too-shallow-weights"


class DegenerateSupport(RandGibbsError):
    code = "degenerate-support"


class UnsupportedMeasure(RandGibbsError):
    code = "unsupported-measure"


class UnknownScenario(RandGibbsError):
    code = "unknown-scenario"


class SchemaError(InvalidConfig):
    code = "schema-violation"


# warning categories: reported, never fatal
class PrecisionLoss(UserWarning):
    code = "precision-loss"


class NoisyPressure(UserWarning):
    code = "noisy-pressure"

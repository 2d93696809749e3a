"""Exception hierarchy.

Every error carries an ``exit_code`` so the command-line front end can map
it without a lookup table: 2 for analytic refusals (a condition fails, a
limit is missing, a classification is unusable), 3 for numerical failures.
"""


class CompactError(Exception):
    exit_code = 3


class AnalyticRefusal(CompactError):
    exit_code = 2


class NumericalFailure(CompactError):
    exit_code = 3


# expressions

class ExprError(CompactError):
    exit_code = 2


class ExprSyntaxError(ExprError):
    def __init__(self, msg, offset, src=""):
        self.offset = offset
        self.src = src
        super().__init__(f"{msg} at offset {offset}")


class UnknownFunction(ExprSyntaxError):
    pass


class ArityError(ExprSyntaxError):
    pass


class UnboundVariable(ExprError):
    pass


class UndeclaredVariable(ExprError):
    pass


class DomainError(NumericalFailure):
    pass


# problem definition

class NoLimit(AnalyticRefusal):
    pass


class Disagreement(AnalyticRefusal):
    pass


class SideUnavailable(AnalyticRefusal):
    pass


# transforms

class TransformError(AnalyticRefusal):
    pass


class NonPositiveRate(TransformError):
    pass


class NonPositiveOrder(TransformError):
    pass


class NotMonotone(TransformError):
    pass


class DegenerateLimits(TransformError):
    pass


class OutOfDomain(CompactError):
    exit_code = 2


# conditions

class InsufficientDecayWindow(AnalyticRefusal):
    pass


class Unrecommendable(AnalyticRefusal):
    def __init__(self, msg, decay=None):
        self.decay = decay
        super().__init__(msg)


class ConditionsViolated(AnalyticRefusal):
    def __init__(self, msg, report=None):
        self.report = report
        super().__init__(msg)


# integration and invariant sets

class NonFiniteState(NumericalFailure):
    pass


class Resonance(AnalyticRefusal):
    pass


class SeedEscape(NumericalFailure):
    pass


class Ambiguous(AnalyticRefusal):
    pass


class Unsupported(AnalyticRefusal):
    pass


# rate problems

class NoSignChange(AnalyticRefusal):
    def __init__(self, msg, probes=None):
        self.probes = probes or []
        super().__init__(msg)


class UndecidedProbe(NumericalFailure):
    def __init__(self, msg, r=None, probes=None):
        self.r = r
        self.probes = probes or []
        super().__init__(msg)


class NonMonotoneFamily(UserWarning):
    pass


# command line

class ConfigError(CompactError):
    exit_code = 2


class UnknownScenario(ConfigError):
    pass

"""Exception hierarchy shared across the tuner."""


class SigtuneError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(SigtuneError, ValueError):
    pass


class DimensionUnsupported(SigtuneError, ValueError):
    pass


class UnknownParam(SigtuneError, KeyError):
    pass


class ValueOutOfDomain(SigtuneError, ValueError):
    pass


class SpaceValidationError(SigtuneError, ValueError):
    """Raised with the full list of violations found in a space definition."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{v.code}: {v.message}" for v in self.violations)
        super().__init__(f"invalid config space: {lines}")


class TooFewSamples(SigtuneError, ValueError):
    pass


class NonFiniteCost(SigtuneError, ValueError):
    pass


class SAComplete(SigtuneError, RuntimeError):
    pass


class SAIncomplete(SigtuneError, RuntimeError):
    pass


class NotPositiveDefinite(SigtuneError, ArithmeticError):
    pass


class NotEnoughObservations(SigtuneError, RuntimeError):
    pass


class PhaseMismatch(SigtuneError, RuntimeError):
    pass


class PhaseMismatchWarning(UserWarning):
    """A reported configuration differs from the one last suggested."""


class InsufficientData(SigtuneError, ValueError):
    pass


class CorruptProfile(SigtuneError, ValueError):
    pass


class SchemaMismatch(SigtuneError, ValueError):
    pass


class DegenerateInput(SigtuneError, ValueError):
    pass


class ExecutionError(SigtuneError, RuntimeError):
    """An external workload run that produced no usable cost."""


class SpawnFailure(ExecutionError):
    pass


class NonZeroExit(ExecutionError):
    def __init__(self, returncode, message=""):
        self.returncode = returncode
        super().__init__(message or f"command exited with status {returncode}")


class ExecutionTimeout(ExecutionError):
    pass

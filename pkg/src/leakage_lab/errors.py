"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class ConstraintViolation(ValueError):
    """A transform or parameter set breaks a model constraint (e.g. crossed means)."""


class DegenerateThresholdError(ValueError):
    """A decision threshold is undefined because the transformed means coincide."""


class RegimeError(ValueError):
    """The requested quantity is only defined in a different solution regime."""


class IdxParseError(ValueError):
    """Base class for malformed IDX containers."""


class IdxMagicError(IdxParseError):
    pass


class IdxTruncatedError(IdxParseError):
    pass


class IdxCountMismatchError(IdxParseError):
    pass


class CheckpointError(ValueError):
    """A network checkpoint file is malformed or has an unsupported version."""


class ConfigError(ValueError):
    """An experiment configuration file is invalid."""


class TrainingDiverged(RuntimeError):
    """A loss became non-finite during training.

    The partially trained pair (with its trace up to the failure) is kept on
    ``self.partial``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial

"""Exception hierarchy shared by all engine modules."""


class EvacsimError(Exception):
    """Base class for all engine errors."""


class SchemaError(EvacsimError):
    """A document does not parse as its schema (missing/malformed field)."""


class ValidationError(EvacsimError):
    """A structurally valid document breaches an invariant."""


class UnknownIdError(EvacsimError):
    """Referenced id does not exist."""


class OutOfBoundsError(EvacsimError):
    """Position lies in no region."""


class InvalidParamsError(EvacsimError):
    """Parameter object breaches its invariants."""


class TickGridError(EvacsimError):
    """Time not aligned to the fixed tick grid."""


class UnknownObjectError(EvacsimError):
    """Scene object id not found."""


class WrongKindError(EvacsimError):
    """Object has a kind the operation does not accept."""


class RegionStagingError(EvacsimError):
    """Region has the wrong staging for the operation."""


class NotInteractiveError(EvacsimError):
    """Trigger fired on a non-interactive NPC."""


class NotAssistableError(EvacsimError):
    """NPC has no special state that assistance would clear."""


class ActionUnavailableError(EvacsimError):
    """Action not in the current available set."""


class UnknownActionError(EvacsimError):
    """Action id not offered at this wait point / not in the catalog."""


class IllegalTransitionError(EvacsimError):
    """Phase event violates the canonical phase order."""


class IncompleteSessionError(EvacsimError):
    """Log does not describe a completed session."""


class ClockRegressionError(EvacsimError):
    """Event timestamp precedes the last recorded one."""


class LengthMismatchError(EvacsimError):
    """Paired samples have different lengths."""


class EmptyInputError(EvacsimError):
    """Statistic requested on an empty sample."""


class InsufficientDataError(EvacsimError):
    """Sample too small for the requested statistic."""


class ConfigError(EvacsimError):
    """Session configuration invalid or references missing files."""


class SessionEndedError(EvacsimError):
    """Operation on a session that already terminated."""


class UnknownCommandError(EvacsimError):
    """Wire command not in the input vocabulary or referencing unknown ids."""


class NotTerminalError(EvacsimError):
    """finish() called before the session reached a terminal state."""

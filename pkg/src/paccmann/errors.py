"""Exception types raised across the package."""


class PaccMannError(Exception):
    """Base class for all package errors."""


class InputError(PaccMannError, ValueError):
    """Malformed or inconsistent user input (CLI exit code 2)."""


class ValidationError(PaccMannError):
    """A data-integrity guarantee was violated (CLI exit code 3)."""


# smiles
class SmilesError(InputError):
    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (position {position})"
        super().__init__(message)
        self.position = position


class UnbalancedBracket(SmilesError):
    pass


class IllegalCharacter(SmilesError):
    pass


class ParseError(SmilesError):
    pass


class SequenceTooLong(InputError):
    pass


class DisconnectedGraph(InputError):
    pass


class EmptyCorpus(InputError):
    pass


# netprop
class NoConvergence(PaccMannError):
    pass


class SingularSystem(PaccMannError):
    pass


# tensor / encoders
class ShapeMismatch(InputError):
    pass


class AllMasked(InputError):
    pass


class BatchTooSmall(InputError):
    pass


class IndexOutOfRange(InputError):
    pass


class SequenceTooShort(InputError):
    pass


class MissingContextParams(InputError):
    pass


# model
class InvalidConfig(InputError):
    pass


class LeakageDetected(ValidationError):
    pass


class LengthMismatch(InputError):
    pass


class ConstantVector(InputError):
    pass


class EmptySample(InputError):
    pass


class CheckpointError(PaccMannError):
    pass


class VersionMismatch(CheckpointError):
    pass


class CorruptCheckpoint(CheckpointError):
    pass


# dataio
class MalformedCsv(InputError):
    pass


class DuplicateCellId(MalformedCsv):
    pass


class NonNumericValue(MalformedCsv):
    pass


class DegenerateRange(InputError):
    pass


class TooFewEntities(InputError):
    pass


class UnresolvedId(InputError):
    pass


class PanelGeneMissing(InputError):
    pass

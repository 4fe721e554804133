"""
Exception hierarchy for the MR prioritizer.

Every data or validation problem raises a subclass of DataError, so callers
(and the CLI exit-code mapping) can catch the whole family at once.
"""


class MRPrioError(Exception):
    """Root of all errors raised by this package"""


class DataError(MRPrioError, ValueError):
    """Input data violates a documented contract"""


# core_model
class InvalidLabel(DataError):
    pass


class DuplicateRecord(DataError):
    pass


class UnknownId(DataError):
    pass


class MissingCell(DataError):
    pass


class EmptyTestCaseList(DataError):
    pass


class InvalidSeed(DataError):
    pass


# prioritize
class EmptyMatrix(DataError):
    pass


class MissingCriterion(DataError):
    pass


# metrics
class MrSetMismatch(DataError):
    pass


class LengthMismatch(DataError):
    pass


class EmptyList(DataError):
    pass


class CurveTooShort(DataError):
    pass


class InvalidThreshold(DataError):
    pass


class MissingCost(DataError):
    pass


class NoKillableFaults(DataError):
    pass


class ZeroBaseline(DataError):
    pass


# stats
class EmptySample(DataError):
    pass


class InvalidProbability(DataError):
    pass


# io_formats
class MalformedHeader(DataError):
    pass


class BadCell(DataError):
    pass


class DuplicateId(DataError):
    pass


class RaggedRow(DataError):
    pass


class MissingField(DataError):
    pass


class DuplicateMr(DataError):
    pass


class NegativeCost(DataError):
    pass


class UnknownFaultId(DataError):
    pass


class ConfigError(DataError):
    pass


class EmptyConfig(ConfigError):
    pass


# synth
class InvalidSpec(DataError):
    pass


# experiment
class ReportWriteError(MRPrioError):
    """Report files could not be written to the output directory"""


def with_context(error: MRPrioError, context: str) -> MRPrioError:
    """Return a copy of ``error`` (same class) whose message is prefixed by ``context``"""
    wrapped = type(error)(f"{context}: {error}")
    wrapped.__cause__ = error
    return wrapped

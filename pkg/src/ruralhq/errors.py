"""Exception hierarchy shared by every subsystem.

Two broad families matter to callers: :class:`DataError` (malformed or
inconsistent input, CLI exit code 2) and :class:`NumericalError`
(a computation that cannot produce a meaningful number, CLI exit code 3).
"""


class RuralHQError(Exception):
    """Base class for all package errors."""


class DataError(RuralHQError):
    """Input rows, files, or identifiers violate a contract."""


class NumericalError(RuralHQError):
    """A statistic or optimization step is undefined or diverged."""


# --- corpus ---------------------------------------------------------------

class DuplicateImageId(DataError):
    pass


class UnreadableRaster(DataError):
    pass


class MalformedGeoPath(DataError):
    pass


class UnknownImage(DataError):
    pass


class ScoreOutOfRange(DataError):
    pass


class DuplicateRaterImage(DataError):
    pass


class NoBallots(DataError):
    pass


class InvalidDimensions(DataError):
    pass


# --- network engine -------------------------------------------------------

class InvalidSpec(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class NonDistributionTarget(DataError):
    pass


class CorruptCheckpoint(DataError):
    pass


class IoFailure(RuralHQError):
    pass


# --- training -------------------------------------------------------------

class EmptyDataset(DataError):
    pass


class EmptySplit(DataError):
    pass


class DivergedLoss(NumericalError):
    pass


# --- evaluation -----------------------------------------------------------

class IdMismatch(DataError):
    pass


class ZeroVariance(NumericalError):
    pass


class LengthMismatch(DataError):
    pass


class ConstantInput(NumericalError):
    pass


class TooFewSamples(DataError):
    pass


class InsufficientGroups(DataError):
    pass


# --- geography / inequality ----------------------------------------------

class MissingGeoField(DataError):
    pass


class AllZero(NumericalError):
    pass


class NegativeValue(DataError):
    pass


class TooFewRegions(DataError):
    pass


class JoinTooSmall(DataError):
    pass


class DuplicateCountyCode(DataError):
    pass


class UnmappedCounty(DataError):
    pass


# --- serving --------------------------------------------------------------

class NothingLeft(RuralHQError):
    """The rater has scored every image in the corpus."""

"""Exception hierarchy shared by all modules."""


class LatentSimError(Exception):
    """Base class for every error raised by this package."""


class FormatError(LatentSimError):
    """Malformed input file or payload."""


# relevance
class EmptyDocument(LatentSimError):
    pass


class MissingDf(LatentSimError):
    pass


class NoScoredWords(LatentSimError):
    pass


# embedding
class ZeroVectorError(LatentSimError):
    pass


class DimensionMismatch(LatentSimError):
    pass


# signature
class EmptySelection(LatentSimError):
    pass


class CorruptSignature(FormatError):
    pass


class PoolTooSmall(LatentSimError):
    pass


# transport
class TooLarge(LatentSimError):
    pass


# backend
class EmptySubmission(LatentSimError):
    pass


class ModelUnavailable(LatentSimError):
    pass


class CorruptSnapshot(FormatError):
    pass


class BackendUnavailable(LatentSimError):
    """The backend could not be reached or answered with a server error."""


# netgraph
class UnknownId(LatentSimError):
    pass


class DegenerateSpectrum(LatentSimError):
    pass

"""Exception hierarchy shared across the package."""


class QueryWatchError(Exception):
    """Base class for all package errors."""


# audio
class MalformedWav(QueryWatchError):
    pass


class UnsupportedEncoding(QueryWatchError):
    pass


class UnsupportedRate(QueryWatchError):
    pass


class SilentInput(QueryWatchError):
    pass


class LengthMismatch(QueryWatchError):
    pass


class ClipTooShort(QueryWatchError):
    pass


# fingerprints / similarity
class DimensionMismatch(QueryWatchError):
    pass


class SchemeMismatch(QueryWatchError):
    pass


class EmptyInput(QueryWatchError):
    pass


class EmptyMemory(QueryWatchError):
    pass


# detector
class ClientBlocked(QueryWatchError):
    def __init__(self, client_id: str, retry_after: float):
        super().__init__(f"client {client_id!r} is blocked for {retry_after:.1f}s")
        self.client_id = client_id
        self.retry_after = retry_after


class VersionMismatch(QueryWatchError):
    pass


class CorruptSnapshot(QueryWatchError):
    pass


# calibration / simulation / metrics
class CorpusTooSmall(QueryWatchError):
    pass


class CarrierTooShort(QueryWatchError):
    pass


class EmptyPool(QueryWatchError):
    pass


class UncalibratedThreshold(QueryWatchError):
    pass


class ZeroQueries(QueryWatchError):
    pass


class ZeroPerturbation(QueryWatchError):
    pass


class EmptyReference(QueryWatchError):
    pass

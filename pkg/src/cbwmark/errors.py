"""Exception hierarchy shared across the toolkit."""


class CbwError(Exception):
    """Base class for all toolkit errors."""


# --- audio ---------------------------------------------------------------

class MalformedWav(CbwError):
    pass


class UnsupportedFormat(CbwError):
    pass


class TooShort(CbwError):
    pass


class AllSilent(CbwError):
    pass


class InvalidConfig(CbwError):
    pass


class FrequencyAboveNyquist(CbwError):
    pass


class SampleRateMismatch(CbwError):
    pass


# --- embedding -----------------------------------------------------------

class TooFewFrames(CbwError):
    pass


class InsufficientData(CbwError):
    pass


class DegenerateScatter(CbwError):
    pass


class DimensionMismatch(CbwError):
    pass


class DegenerateEmbedding(CbwError):
    pass


class NotNormalized(CbwError):
    pass


class ProviderUnavailable(CbwError):
    pass


class MissingEmbedding(CbwError):
    pass


class MalformedResponse(CbwError):
    pass


# --- watermark -----------------------------------------------------------

class EmptySpeaker(CbwError):
    pass


class TooManyClusters(CbwError):
    pass


# --- stats / theory ------------------------------------------------------

class InvalidDf(CbwError):
    pass


class InvalidProbability(CbwError):
    pass


class LengthMismatch(CbwError):
    pass


class TooFewSamples(CbwError):
    pass


class InvalidInput(CbwError):
    pass


# --- metrics / verify ----------------------------------------------------

class EmptyScores(CbwError):
    pass


class InsufficientSpeakers(CbwError):
    pass


# --- corpus --------------------------------------------------------------

class MalformedManifest(CbwError):
    pass


class DuplicateId(CbwError):
    pass


class MissingFile(CbwError):
    pass

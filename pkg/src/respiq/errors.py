"""Exception types shared across the package.

Two broad families matter to callers: configuration problems (bad
parameters, malformed config files) and data problems (unreadable files,
signals that violate a precondition). The CLI maps them to exit codes 2
and 3 respectively.
"""


class RespiqError(Exception):
    """Base class for all package errors."""


class ConfigError(RespiqError):
    """Invalid configuration value or malformed config file."""


class ScenarioInvalid(ConfigError):
    """Simulation scenario violates its own invariants."""


class BadRate(ScenarioInvalid):
    """Breathing rate outside the supported 4-40 bpm range."""


class DataError(RespiqError):
    """Input data unusable: bad file, bad shape, degenerate signal."""


class IoFailure(DataError):
    """Underlying OS-level read/write failure."""


class BadMagic(DataError):
    """File does not start with the expected magic bytes."""


class TruncatedFile(DataError):
    """File ends before the declared payload is complete."""


class VersionMismatch(DataError):
    """File header declares an unsupported version or inconsistent layout."""


class DimensionOverflow(DataError):
    """Header-declared dimensions exceed what the payload can hold."""


class InvariantViolation(DataError):
    """A domain object failed its own validity checks."""


class TooShort(DataError):
    """Signal shorter than the operation's minimum length."""


class WindowTooLarge(DataError):
    """Smoothing window longer than the signal."""


class BadOrder(ConfigError):
    """Polynomial order incompatible with the window length."""


class LengthMismatch(DataError):
    """Paired vectors have different lengths."""


class ShapeMismatch(DataError):
    """Array shape incompatible with the model's declared geometry."""


class EmptyBank(DataError):
    """Candidate bank contains no candidates."""


class EmptyTrainSet(DataError):
    """Training set contains no window pairs."""


class NoQualifyingSequences(DataError):
    """No sequence passed the training-set quality filter."""


class DivergedLoss(RespiqError):
    """Training loss became non-finite."""


class EmptyCorpus(DataError):
    """Evaluation corpus contains no scenes."""


class TooFewPeaks(DataError):
    """Not enough peaks to estimate a rate."""

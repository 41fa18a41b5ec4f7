"""Exception types shared across the package."""


class HysidError(Exception):
    """Base class for all errors raised by hysid."""


class ConstantChannel(HysidError):
    """A channel with max == min cannot be affinely scaled to a target range."""

    def __init__(self, channel: str):
        self.channel = channel
        super().__init__(f"channel {channel!r} is constant and cannot be scaled")


class UnknownChannel(HysidError):
    def __init__(self, channel: str):
        self.channel = channel
        super().__init__(f"unknown channel {channel!r}")


class LengthMismatch(HysidError):
    pass


class InvalidSample(HysidError):
    """Non-finite sample (NaN/inf) where a finite value is required."""


class NoSwitchObserved(HysidError):
    """Automatic hysteron initialization needs at least one threshold crossing."""


class NonFiniteValue(HysidError):
    def __init__(self, row: int, col: int):
        self.row = row
        self.col = col
        super().__init__(f"non-finite library value at row {row}, column {col}")


class RankDeficient(HysidError):
    pass


class AllTermsEliminated(HysidError):
    """Every coefficient of some target column fell below the threshold.

    The tuning parameter is too large for the data at hand; lower it.
    """


class DivergenceDetected(HysidError):
    def __init__(self, step: int):
        self.step = step
        super().__init__(f"free-running prediction diverged at step {step}")


class InfeasibleVariation(HysidError):
    pass


class ConfigError(HysidError):
    pass


class PipelineError(HysidError):
    """Wraps a failure inside the identification pipeline with a stage label."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"pipeline stage {stage!r} failed: {cause}")

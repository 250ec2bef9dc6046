"""Exception types raised across the library."""


class SmtmError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(SmtmError):
    """User-supplied configuration is malformed or inconsistent."""


class UnknownPreset(ConfigError):
    """Requested experiment preset does not exist."""


class DimensionMismatch(SmtmError):
    """Array argument has the wrong trailing dimension."""


class NorthPoleSingularity(SmtmError):
    """Sphere point is too close to the projection pole to map to the plane."""


class DegenerateProposal(SmtmError):
    """Tangent proposal collapsed to (numerically) zero length."""


class AllWeightsDegenerate(SmtmError):
    """Every candidate weight is zero; no candidate can be selected."""


class NonIntegrable(SmtmError):
    """Numerical integration failed to converge to the requested tolerance."""


class NegativeVariance(SmtmError):
    """Limit-law variance would be negative for these parameters."""


class OutOfRange(SmtmError):
    """Scalar parameter lies outside its admissible range."""


class EmptyTrace(SmtmError):
    """Diagnostic requested on a trace with no retained iterations."""


class RetentionTooCoarse(SmtmError):
    """Trace does not retain enough state for the requested diagnostic."""


class TooFewSamples(SmtmError):
    """Not enough samples/pairs to form the requested estimate."""


class SchemaMismatch(SmtmError):
    """CSV or config payload is missing required columns/fields."""


class IOFailure(SmtmError):
    """Reading or writing an artifact file failed."""

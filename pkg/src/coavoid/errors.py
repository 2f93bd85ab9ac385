"""Exception types shared across the package."""


class CoavoidError(Exception):
    """Base class for all package-specific errors."""


class IntervalOutOfRange(CoavoidError):
    """Broadcast interval number outside 1..96."""


class ResolutionOutOfRange(CoavoidError):
    """Grid resolution outside 0..15."""


class InvalidCoordinate(CoavoidError):
    """Latitude/longitude outside valid bounds or outside the configured region."""


class MissingBroadcast(CoavoidError):
    """Exchange interval has no matching own-broadcast record to pair with."""


class MalformedPayload(CoavoidError):
    """Upload payload empty or not parseable as record lines."""


class EpochFromFuture(CoavoidError):
    """Download cursor beyond the store's current epoch."""


class UnknownSession(CoavoidError):
    """Relay envelope for a session id nobody registered."""


class ConstraintViolation(CoavoidError):
    """Fine-match parameter lengths violate a bit-length inequality."""


class CoordinateOverflow(CoavoidError):
    """Fixed-point coordinate outside [0, 2**coord_bits)."""


class SanityCheckFailed(CoavoidError):
    """Encrypted anchor failed the component non-degeneracy checks."""


class SecretsConsumed(CoavoidError):
    """Single-use anchor secrets were offered to a second encryption."""


class NoiseOverflow(CoavoidError):
    """Decrypted response exceeds the bound the parameter inequalities guarantee."""


class LevelOutOfRange(CoavoidError):
    """Risk factor level outside 0..8."""


class NoHits(CoavoidError):
    """Risk factors requested for an empty set of confirmed matches."""


class ConfigInvalid(CoavoidError):
    """Simulation configuration fails validation."""


class ScenarioInvalid(CoavoidError):
    """Attack scenario inconsistent with its declared kind."""


class IoFailure(CoavoidError):
    """Metrics or report output could not be written."""

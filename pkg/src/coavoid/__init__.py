"""Privacy-preserving proximity verification for contact tracing.

The pipeline, end to end: devices rotate broadcast identifiers on a fixed
key schedule and log what they hear together with a hashed location cell;
diagnosed patients upload only the intervals with actual contact, each
record recombined to reveal nothing about third parties; an edge server
re-shuffles all records before anyone can download them; devices screen
downloads by identifier, hidden location, and hearing time, and confirm
survivors through an encrypted point-in-circle protocol that reveals one
bit; confirmed contacts feed a four-factor risk score.
"""

from .devicelog import (BroadcastRecord, DeviceLog, ExchangeRecord,
                        validate_timestamp)
from .edgeserver import (DEFAULT_PORT, EdgeServer, ObfuscatedStore,
                         RelayEnvelope, StoredRecord, UploadReceipt)
from .errors import CoavoidError
from .filtering import (RecombinedRecord, dedupe_policy, filter_and_recombine,
                        parse_upload_lines, to_upload_lines)
from .finematch import (DEFAULT_SIZES, TOY_SIZES, CoarseHit, CoarseResult,
                        Decision, DiameterPair, EncryptedAnchor,
                        FineGrainParams, FixedPointCodec, ReplaySuspect,
                        SessionChannel, SignedAnnouncement, UserResponse,
                        VerificationLog, WormholeSuspect, check_constraints,
                        coarse_match, decide, decision_quantity,
                        derive_session_id, encrypt_anchor, gen_params,
                        gen_secrets, make_announcement, make_diameter_pair,
                        respond, verify_announcement)
from .geocell import (DEFAULT_RESOLUTION, CellDigest, CellIndex, GeoPoint,
                      HexGrid, cell_index, hide_location, neighbors)
from .keysched import (INTERVALS_PER_DAY, RETENTION_DAYS, DailyTracingKey,
                       KeyStore, RollingProximityIdentifier, derive_day_rpis,
                       derive_rpi, derive_rpik, interval_of, new_dtk)
from .riskscore import (RiskFactors, derive_factors, risk_score, should_warn)

__version__ = "1.0.0"

__all__ = [
    "BroadcastRecord", "CellDigest", "CellIndex", "CoarseHit", "CoarseResult",
    "CoavoidError", "DailyTracingKey", "Decision", "DeviceLog",
    "DiameterPair", "EdgeServer", "EncryptedAnchor", "ExchangeRecord",
    "FineGrainParams", "FixedPointCodec", "GeoPoint", "HexGrid", "KeyStore",
    "ObfuscatedStore", "RecombinedRecord", "RelayEnvelope", "ReplaySuspect",
    "RiskFactors", "RollingProximityIdentifier", "SessionChannel",
    "SignedAnnouncement", "StoredRecord", "UploadReceipt", "UserResponse",
    "VerificationLog", "WormholeSuspect",
    "DEFAULT_PORT", "DEFAULT_RESOLUTION", "DEFAULT_SIZES",
    "INTERVALS_PER_DAY", "RETENTION_DAYS", "TOY_SIZES",
    "cell_index", "check_constraints", "coarse_match", "decide",
    "decision_quantity", "dedupe_policy", "derive_day_rpis", "derive_factors",
    "derive_rpi", "derive_rpik", "derive_session_id", "encrypt_anchor",
    "filter_and_recombine", "gen_params", "gen_secrets", "hide_location",
    "interval_of", "make_announcement", "make_diameter_pair", "neighbors",
    "new_dtk", "parse_upload_lines", "respond", "risk_score", "should_warn",
    "to_upload_lines", "validate_timestamp", "verify_announcement",
]

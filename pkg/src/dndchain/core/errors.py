"""Exception hierarchy for dndchain.

Validators raise ``ValidatorRejected`` with a ``RejectReason``; everything else raises
one of the concrete subclasses below.
"""

from enum import Enum
from typing import Optional


class RejectReason(str, Enum):
    """Business-rule failures reported by transaction validators."""

    MALFORMED_ARGS = "MalformedArgs"
    ROLE_FORBIDDEN = "RoleForbidden"
    # membership
    DUPLICATE_IDENTITY = "DuplicateIdentity"
    VERIFICATION_FAILED = "VerificationFailed"
    REGULATOR_DB_UNAVAILABLE = "RegulatorDbUnavailable"
    UNKNOWN_PARTICIPANT = "UnknownParticipant"
    # headers and entities
    DUPLICATE_ENTITY = "DuplicateEntity"
    UNKNOWN_ENTITY = "UnknownEntity"
    UNVERIFIED_ENTITY = "UnverifiedEntity"
    BAD_FORMAT = "BadFormat"
    DUPLICATE_HEADER = "DuplicateHeader"
    LOOKALIKE_HEADER = "LookalikeHeader"
    UNKNOWN_HEADER = "UnknownHeader"
    NOT_OWNER = "NotOwner"
    UNKNOWN_TELEMARKETER = "UnknownTelemarketer"
    NOT_DELEGATED = "NotDelegated"
    # templates
    MALFORMED_PLACEHOLDERS = "MalformedPlaceholders"
    MISSING_CONSENT_CLAUSE = "MissingConsentClause"
    UNREGISTERED_TEMPLATE = "UnregisteredTemplate"
    WRONG_TEMPLATE_KIND = "WrongTemplateKind"
    # preferences and consent
    UNKNOWN_CATEGORY = "UnknownCategory"
    WRONG_OPERATOR = "WrongOperator"
    UNKNOWN_OPERATOR = "UnknownOperator"
    NO_PENDING_REQUEST = "NoPendingRequest"
    NO_ACTIVE_CONSENT = "NoActiveConsent"
    CONSENT_CLOSED = "ConsentClosed"
    OTP_MISMATCH = "OtpMismatch"
    OTP_EXPIRED = "OtpExpired"
    # scrubbing
    STALE_STATE_HASH = "StaleStateHash"
    BAD_TOKEN_SIGNATURE = "BadTokenSignature"
    COUNTS_INCONSISTENT = "CountsInconsistent"
    DUPLICATE_TOKEN = "DuplicateToken"
    # campaigns
    TOKEN_NOT_ON_CHAIN = "TokenNotOnChain"
    TOKEN_HEADER_MISMATCH = "TokenHeaderMismatch"
    TOKEN_TEMPLATE_MISMATCH = "TokenTemplateMismatch"
    TOKEN_ALREADY_CONSUMED = "TokenAlreadyConsumed"
    NOT_TOKEN_OWNER = "NotTokenOwner"
    DUPLICATE_CAMPAIGN = "DuplicateCampaign"
    UNKNOWN_CAMPAIGN = "UnknownCampaign"
    NOT_CAMPAIGN_LEG = "NotCampaignLeg"
    LEG_ALREADY_REPORTED = "LegAlreadyReported"
    COUNTS_EXCEED_FILE = "CountsExceedFile"
    BAD_REPORT_SIGNATURE = "BadReportSignature"
    # complaints
    DUPLICATE_COMPLAINT = "DuplicateComplaint"
    NOT_ON_WATCHLIST = "NotOnWatchList"
    THRESHOLD_NOT_REACHED = "ThresholdNotReached"
    ACTION_NOT_ESCALATING = "ActionNotEscalating"


class DndChainError(Exception):
    """Base error for every dndchain failure."""


class ConfigInvalid(DndChainError):
    """Configuration or scenario file failed validation."""


class IoFailure(DndChainError):
    """A report, dump or store file could not be read or written."""


class CodecError(DndChainError):
    """Bytes do not decode under the canonical encoding."""


# ledger

class UnknownIdentity(DndChainError):
    """Proposer or endorser is not an admitted, live participant."""


class StaleNonce(DndChainError):
    """Proposal nonce is not above the proposer's last nonce."""


class ValidatorRejected(DndChainError):
    """A transaction validator refused to endorse."""

    def __init__(self, reason: RejectReason, detail: str = ""):
        self.reason = RejectReason(reason)
        self.detail = detail
        message = self.reason.value if not detail else f"{self.reason.value}: {detail}"
        super().__init__(message)


class MismatchedReadWriteSets(DndChainError):
    """Endorsements for one proposal disagree on the read-write set digest."""


class EndorsementFailed(DndChainError):
    """Not enough endorsements could be gathered to satisfy the policy."""


class BrokenChain(DndChainError):
    """Block does not extend the local chain tip."""

    def __init__(self, message: str, height: Optional[int] = None):
        self.height = height
        super().__init__(message)


class NodeUnavailable(DndChainError):
    """The in-process network could not reach a node."""


# membership

class RegulatorDbUnavailable(DndChainError):
    """Regulator registry is in a simulated outage."""


class DuplicateIdentity(DndChainError):
    """Identity id or public key is already admitted."""


class VerificationFailed(DndChainError):
    """Registration self-signature or regulator lookup failed."""


# registries

class MalformedNumber(DndChainError):
    """Phone number does not normalize to 91 followed by 10 digits."""


# scrubbing

class GapDetected(DndChainError):
    """Mirror index received a block that skips a height."""


class StaleIndex(DndChainError):
    """Mirror index lags the committed chain."""


class BatchTooSmall(DndChainError):
    """Scrub request is below the minimum batch size."""


class UnresolvedOperator(DndChainError):
    """No operator could be found for a number."""


class DigestMismatch(DndChainError):
    """Decrypted file does not match its committed digest."""


class BadSignature(DndChainError):
    """A scrubber or operator signature failed verification."""


class TokenNotOnChain(DndChainError):
    """No committed ScrubResult matches the token."""


# campaign

class TemplateMismatch(DndChainError):
    """Message instance does not match the registered template."""


class OutsideWindow(DndChainError):
    """Promotional delivery attempted outside the permitted hours."""


class MalformedSender(DndChainError):
    """Complaint sender is neither a header nor a 10-digit number."""


class InsufficientEvidence(DndChainError):
    """No candidate campaign and no delivery trace for a complaint."""


# harness

class DivisionWindowEmpty(DndChainError):
    """A metrics window has zero message volume."""


class NodeCrashUnhandled(DndChainError):
    """A node raised outside any scripted fault."""

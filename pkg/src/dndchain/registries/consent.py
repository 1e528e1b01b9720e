"""Header-scoped consent: request with a one-time code, grant, revoke.

Status only moves requested -> granted -> revoked (a grant may be skipped); revoked is
final. A fresh request while still ``requested`` replaces the code without a new history
entry.
"""

import hmac
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Tuple

import numpy as np

from dndchain.core.errors import RejectReason
from dndchain.ledger.codec import encode
from dndchain.ledger.contract import TxContext, contract
from dndchain.ledger.types import TxType
from dndchain.membership.crypto import keyed_digest
from dndchain.registries.headers import check_header_format, entity_key, header_key, is_delegated
from dndchain.registries.subscribers import is_hashed_key
from dndchain.registries.templates import TemplateKind, template_key

logger = logging.getLogger(__name__)


class ConsentStatus(str, Enum):
    REQUESTED = "requested"
    GRANTED = "granted"
    REVOKED = "revoked"


class ConsentChannel(str, Enum):
    OTP = "otp"
    LINK = "link"


def consent_key(hashed_key: str, header: str) -> str:
    return f"consent/{hashed_key}/{header}"


def otp_digest(secret: bytes, hashed_key: str, header: str, code: str) -> str:
    return keyed_digest(secret, encode(["consent-otp", hashed_key, header, code])).hex()


def issue_code(rng: np.random.Generator, channel: ConsentChannel, digits: int = 6) -> str:
    if ConsentChannel(channel) == ConsentChannel.LINK:
        return rng.bytes(16).hex()
    return f"{int(rng.integers(0, 10 ** digits)):0{digits}d}"


@dataclass(frozen=True)
class ConsentRecord:
    key: str
    header: str
    status: ConsentStatus
    consent_template_id: str
    channel: ConsentChannel
    otp_expiry: int
    history: Tuple[Tuple[str, int], ...]

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "ConsentRecord":
        return cls(
            record["key"],
            record["header"],
            ConsentStatus(record["status"]),
            record["consent_template_id"],
            ConsentChannel(record["channel"]),
            record["otp_expiry"],
            tuple((status, tick) for status, tick in record["history"]),
        )


def _subject(ctx: TxContext) -> Tuple[str, str]:
    hashed_key = ctx.args.get("hashed_key")
    if not is_hashed_key(hashed_key):
        ctx.reject(RejectReason.MALFORMED_ARGS, "hashed_key must be a 64-character hex digest")
    return hashed_key, check_header_format(ctx.args.get("header"))


@contract(TxType.REQUEST_CONSENT)
def request_consent_validator(ctx: TxContext) -> None:
    hashed_key, header = _subject(ctx)
    template_id = ctx.arg("consent_template_id")
    template = ctx.get_record(template_key(template_id))
    if template is None or template["header"] != header:
        ctx.reject(RejectReason.UNREGISTERED_TEMPLATE, template_id)
    if template["kind"] != TemplateKind.CONSENT.value:
        ctx.reject(RejectReason.WRONG_TEMPLATE_KIND, f"{template_id} is {template['kind']}")
    header_record = ctx.get_record(header_key(header))
    if header_record is None:
        ctx.reject(RejectReason.UNKNOWN_HEADER, header)
    if not is_delegated(header_record, ctx.proposer):
        entity = ctx.get_record(entity_key(header_record["owner_pe"]))
        if entity is None or entity["proxy"] != ctx.proposer:
            ctx.reject(RejectReason.NOT_DELEGATED, f"{ctx.proposer} for {header}")
    try:
        channel = ConsentChannel(ctx.arg("channel"))
    except ValueError:
        ctx.reject(RejectReason.MALFORMED_ARGS, "channel must be otp or link")
    existing = ctx.get_record(consent_key(hashed_key, header))
    if existing is not None:
        if existing["status"] != ConsentStatus.REQUESTED.value:
            ctx.reject(RejectReason.CONSENT_CLOSED, f"consent is {existing['status']}")
        history = existing["history"]
    else:
        history = [[ConsentStatus.REQUESTED.value, ctx.tick]]
    ctx.put_record(
        consent_key(hashed_key, header),
        {
            "key": hashed_key,
            "header": header,
            "status": ConsentStatus.REQUESTED.value,
            "consent_template_id": template_id,
            "channel": channel.value,
            "otp_hash": ctx.arg("otp_hash"),
            "otp_expiry": ctx.tick + ctx.config.registry.otp_ttl,
            "history": history,
        },
    )


@contract(TxType.GRANT_CONSENT)
def grant_consent_validator(ctx: TxContext) -> None:
    hashed_key, header = _subject(ctx)
    record = ctx.get_record(consent_key(hashed_key, header))
    if record is None or record["status"] != ConsentStatus.REQUESTED.value:
        ctx.reject(RejectReason.NO_PENDING_REQUEST, f"no pending request for {header}")
    if ctx.tick > record["otp_expiry"]:
        ctx.reject(RejectReason.OTP_EXPIRED, f"code expired at tick {record['otp_expiry']}")
    presented = otp_digest(ctx.config.crypto.key_bytes, hashed_key, header, ctx.arg("code"))
    if not hmac.compare_digest(presented, record["otp_hash"]):
        ctx.reject(RejectReason.OTP_MISMATCH)
    ctx.put_record(
        consent_key(hashed_key, header),
        {
            **record,
            "status": ConsentStatus.GRANTED.value,
            "otp_hash": "",
            "history": [*record["history"], [ConsentStatus.GRANTED.value, ctx.tick]],
        },
    )


@contract(TxType.REVOKE_CONSENT)
def revoke_consent_validator(ctx: TxContext) -> None:
    hashed_key, header = _subject(ctx)
    record = ctx.get_record(consent_key(hashed_key, header))
    if record is None or record["status"] == ConsentStatus.REVOKED.value:
        ctx.reject(RejectReason.NO_ACTIVE_CONSENT, f"nothing to revoke for {header}")
    ctx.put_record(
        consent_key(hashed_key, header),
        {
            **record,
            "status": ConsentStatus.REVOKED.value,
            "otp_hash": "",
            "history": [*record["history"], [ConsentStatus.REVOKED.value, ctx.tick]],
        },
    )


def request_consent(
    gateway,
    header: str,
    hashed_key: str,
    consent_template_id: str,
    rng: np.random.Generator,
    channel: ConsentChannel = ConsentChannel.OTP,
) -> Tuple[str, str]:
    """Propose a consent request. Returns (tx_id, code); the code goes to the subscriber only."""
    config = gateway.peer.config
    code = issue_code(rng, channel, config.registry.otp_digits)
    tx_id = gateway.submit(
        TxType.REQUEST_CONSENT,
        {
            "hashed_key": hashed_key,
            "header": header,
            "consent_template_id": consent_template_id,
            "channel": ConsentChannel(channel).value,
            "otp_hash": otp_digest(config.crypto.key_bytes, hashed_key, header, code),
        },
    )
    return tx_id, code


def grant_consent(gateway, hashed_key: str, header: str, code: str) -> str:
    return gateway.submit(TxType.GRANT_CONSENT, {"hashed_key": hashed_key, "header": header, "code": code})


def revoke_consent(gateway, hashed_key: str, header: str) -> str:
    return gateway.submit(TxType.REVOKE_CONSENT, {"hashed_key": hashed_key, "header": header})


def lookup_consent(state, hashed_key: str, header: str) -> Optional[ConsentRecord]:
    record = state.record(consent_key(hashed_key, header))
    return None if record is None else ConsentRecord.from_record(record)

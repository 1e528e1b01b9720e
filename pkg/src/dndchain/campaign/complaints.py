"""Complaint registration and RTM/UTM classification."""

import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Tuple

from dndchain.core.errors import MalformedNumber, MalformedSender, RejectReason
from dndchain.ledger.codec import encode
from dndchain.ledger.contract import TxContext, contract
from dndchain.ledger.types import TxType
from dndchain.membership.crypto import digest
from dndchain.registries.headers import header_key
from dndchain.registries.subscribers import is_hashed_key, normalize_number, subscriber_key

logger = logging.getLogger(__name__)

_DISPLAY_HEADER = re.compile(r"^([A-Z]{2})-([A-Z0-9]{6})$")
_BARE_HEADER = re.compile(r"^[A-Z0-9]{6}$")


class ComplaintClass(str, Enum):
    RTM = "RTM"
    UTM = "UTM"


class Verdict(str, Enum):
    PENDING = "pending"
    VIOLATION = "violation"
    COMPLIANT = "compliant"
    UNREGISTERED_SENDER = "unregistered_sender"


class SenderKind(str, Enum):
    HEADER = "header"
    NUMBER = "number"


def complaint_key(complaint_id: str) -> str:
    return f"complaint/{complaint_id}"


def watch_key(hashed_key: str) -> str:
    return f"watch/{hashed_key}"


def parse_sender(sender: str) -> Tuple[SenderKind, str]:
    """Split a complaint sender into a bare header or a normalized number.

    ``VM-STABAN`` and ``STABAN`` both give the header ``STABAN``.
    """
    text = str(sender).strip()
    match = _DISPLAY_HEADER.match(text.upper())
    if match:
        return SenderKind.HEADER, match.group(2)
    if _BARE_HEADER.match(text.upper()) and not text.isdigit():
        return SenderKind.HEADER, text.upper()
    try:
        return SenderKind.NUMBER, normalize_number(text)
    except MalformedNumber as exc:
        raise MalformedSender(f"sender {sender!r} is neither a header nor a phone number") from exc


def complaint_id_for(subscriber: str, sender: str, message_text: str, tick: int) -> str:
    return "CPL-" + digest(encode([subscriber, sender, message_text, tick]))[:8].hex()


@dataclass(frozen=True)
class Complaint:
    complaint_id: str
    subscriber: str
    sender: str  # bare header, or the hashed key of a sending number
    sender_kind: SenderKind
    message_text: str
    received_tick: int
    complaint_class: ComplaintClass
    verdict: Verdict
    filed_by: str = ""

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "Complaint":
        return cls(
            record["complaint_id"],
            record["subscriber"],
            record["sender"],
            SenderKind(record["sender_kind"]),
            record["message_text"],
            record["received_tick"],
            ComplaintClass(record["class"]),
            Verdict(record["verdict"]),
            record.get("filed_by", ""),
        )

    @property
    def is_rtm(self) -> bool:
        return self.complaint_class == ComplaintClass.RTM


@contract(TxType.COMPLAINT_FILED)
def complaint_filed_validator(ctx: TxContext) -> None:
    complaint_id = ctx.arg("complaint_id")
    subscriber = ctx.arg("subscriber")
    sender = ctx.arg("sender")
    message_text = ctx.arg("message_text")
    received_tick = ctx.arg("received_tick", int)
    if not is_hashed_key(subscriber):
        ctx.reject(RejectReason.MALFORMED_ARGS, "subscriber must be a hashed key")
    try:
        kind = SenderKind(ctx.arg("sender_kind"))
    except ValueError:
        ctx.reject(RejectReason.MALFORMED_ARGS, "sender_kind")
    if ctx.get(complaint_key(complaint_id)) is not None:
        ctx.reject(RejectReason.DUPLICATE_COMPLAINT, complaint_id)

    if kind == SenderKind.HEADER:
        if not _BARE_HEADER.match(sender):
            ctx.reject(RejectReason.MALFORMED_ARGS, f"sender header {sender!r}")
        registered = ctx.get(header_key(sender)) is not None
    else:
        if not is_hashed_key(sender):
            ctx.reject(RejectReason.MALFORMED_ARGS, "number senders are carried as hashed keys")
        registered = False
        entry = ctx.get_record(watch_key(sender)) or {"key": sender, "complaint_count": 0, "action": "none"}
        ctx.put_record(
            watch_key(sender),
            {**entry, "complaint_count": entry["complaint_count"] + 1, "last_height": ctx.height},
        )

    complaint_class = ComplaintClass.RTM if registered else ComplaintClass.UTM
    verdict = Verdict.PENDING if registered else Verdict.UNREGISTERED_SENDER
    ctx.put_record(
        complaint_key(complaint_id),
        {
            "complaint_id": complaint_id,
            "subscriber": subscriber,
            "sender": sender,
            "sender_kind": kind.value,
            "message_text": message_text,
            "received_tick": received_tick,
            "class": complaint_class.value,
            "verdict": verdict.value,
            "filed_by": ctx.proposer,
        },
    )


def file_complaint(gateway, subscriber: str, sender: str, message_text: str, tick: int) -> Tuple[str, str]:
    """Propose ComplaintFiled. Number senders are hashed before they reach the ledger.

    Returns (complaint_id, tx_id).
    """
    kind, value = parse_sender(sender)
    if kind == SenderKind.NUMBER:
        value = subscriber_key(value, gateway.peer.config.crypto.key_bytes)
    complaint_id = complaint_id_for(subscriber, value, message_text, tick)
    tx_id = gateway.submit(
        TxType.COMPLAINT_FILED,
        {
            "complaint_id": complaint_id,
            "subscriber": subscriber,
            "sender": value,
            "sender_kind": kind.value,
            "message_text": message_text,
            "received_tick": tick,
        },
    )
    logger.info(f"{gateway.identity_id}: complaint {complaint_id} against {kind.value} sender")
    return complaint_id, tx_id


def lookup_complaint(state, complaint_id: str) -> Optional[Complaint]:
    record = state.record(complaint_key(complaint_id))
    return None if record is None else Complaint.from_record(record)


def committed_complaints(state):
    return [Complaint.from_record(record) for _, record in state.records("complaint/")]

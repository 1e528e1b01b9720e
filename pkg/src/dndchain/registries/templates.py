"""Content templates with ``<%...%>`` placeholder slots."""

import logging
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Any, Dict, List, Optional, Tuple

from dndchain.core.errors import RejectReason, ValidatorRejected
from dndchain.ledger.codec import encode
from dndchain.ledger.contract import TxContext, contract
from dndchain.ledger.types import TxType
from dndchain.membership.crypto import digest
from dndchain.registries.headers import check_header_format, header_key, is_delegated

logger = logging.getLogger(__name__)

SLOT_OPEN = "<%"
SLOT_CLOSE = "%>"
SLOT_PATTERN = r"((?:(?!<%).)+)"

FREQUENCY_CLAUSE = re.compile(
    r"\b\d+\s*(?:sms|messages?|calls?)\s*(?:/|per|a|an|every)\s*(?:day|week|month)\b", re.IGNORECASE
)
CONSENT_CHANNEL = re.compile(r"\b(?:otp|link)\b", re.IGNORECASE)


class TemplateKind(str, Enum):
    PROMOTIONAL = "promotional"
    TRANSACTIONAL = "transactional"
    CONSENT = "consent"


def template_key(template_id: str) -> str:
    return f"template/{template_id}"


def split_template(text: str) -> List[str]:
    """Literal segments around the slots; raises on unbalanced or nested slots."""
    literals, pos = [], 0
    while True:
        opening = text.find(SLOT_OPEN, pos)
        stray = text.find(SLOT_CLOSE, pos)
        if opening == -1:
            if stray != -1:
                raise ValidatorRejected(RejectReason.MALFORMED_PLACEHOLDERS, "unopened slot")
            literals.append(text[pos:])
            return literals
        if stray != -1 and stray < opening:
            raise ValidatorRejected(RejectReason.MALFORMED_PLACEHOLDERS, "unopened slot")
        closing = text.find(SLOT_CLOSE, opening + len(SLOT_OPEN))
        if closing == -1:
            raise ValidatorRejected(RejectReason.MALFORMED_PLACEHOLDERS, "unclosed slot")
        if SLOT_OPEN in text[opening + len(SLOT_OPEN) : closing]:
            raise ValidatorRejected(RejectReason.MALFORMED_PLACEHOLDERS, "nested slot")
        literals.append(text[pos:opening])
        pos = closing + len(SLOT_CLOSE)


def canonical_text(text: str) -> str:
    return (SLOT_OPEN + SLOT_CLOSE).join(split_template(text.strip()))


def template_id_for(header: str, text: str) -> str:
    return digest(encode([header, canonical_text(text)])).hex()


@lru_cache(maxsize=1024)
def _matcher(text: str) -> "re.Pattern[str]":
    literals = split_template(text.strip())
    return re.compile(SLOT_PATTERN.join(re.escape(lit) for lit in literals), re.DOTALL)


def match_template(template_text: str, message: str) -> bool:
    """Literals must match exactly; every slot takes a non-empty string without ``<%``."""
    return _matcher(template_text).fullmatch(message) is not None


def literal_overlap(template_text: str) -> int:
    return sum(len(lit) for lit in split_template(template_text.strip()))


def check_consent_clauses(text: str) -> None:
    if not FREQUENCY_CLAUSE.search(text):
        raise ValidatorRejected(RejectReason.MISSING_CONSENT_CLAUSE, "no frequency clause")
    if not CONSENT_CHANNEL.search(text) or len(split_template(text)) < 2:
        raise ValidatorRejected(RejectReason.MISSING_CONSENT_CLAUSE, "no OTP or link slot")


@dataclass(frozen=True)
class TemplateRecord:
    template_id: str
    header: str
    text: str
    kind: TemplateKind
    registered_tick: int

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "TemplateRecord":
        return cls(
            record["template_id"],
            record["header"],
            record["text"],
            TemplateKind(record["kind"]),
            record["registered_tick"],
        )

    def matches(self, message: str) -> bool:
        return match_template(self.text, message)


def _register(ctx: TxContext, kind: TemplateKind) -> None:
    header = check_header_format(ctx.args.get("header"))
    text = ctx.arg("text")
    header_record = ctx.get_record(header_key(header))
    if header_record is None:
        ctx.reject(RejectReason.UNKNOWN_HEADER, header)
    if not is_delegated(header_record, ctx.proposer):
        ctx.reject(RejectReason.NOT_DELEGATED, f"{ctx.proposer} for {header}")
    split_template(text)
    if kind == TemplateKind.CONSENT:
        check_consent_clauses(text)
    template_id = template_id_for(header, text)
    existing = ctx.get_record(template_key(template_id))
    if existing is not None:
        if existing["kind"] != kind.value:
            ctx.reject(RejectReason.WRONG_TEMPLATE_KIND, f"{template_id} already registered as {existing['kind']}")
        return
    ctx.put_record(
        template_key(template_id),
        {
            "template_id": template_id,
            "header": header,
            "text": text.strip(),
            "kind": kind.value,
            "registered_tick": ctx.tick,
            "registered_by": ctx.proposer,
        },
    )


@contract(TxType.REGISTER_TEMPLATE)
def register_template_validator(ctx: TxContext) -> None:
    try:
        kind = TemplateKind(ctx.arg("kind"))
    except ValueError:
        kind = None
    if kind not in (TemplateKind.PROMOTIONAL, TemplateKind.TRANSACTIONAL):
        ctx.reject(RejectReason.WRONG_TEMPLATE_KIND, "campaign templates are promotional or transactional")
    _register(ctx, kind)


@contract(TxType.REGISTER_CONSENT_TEMPLATE)
def register_consent_template_validator(ctx: TxContext) -> None:
    _register(ctx, TemplateKind.CONSENT)


def register_template(gateway, header: str, text: str, kind: TemplateKind = TemplateKind.PROMOTIONAL) -> Tuple[str, str]:
    """Returns (template_id, tx_id)."""
    tx_type = TxType.REGISTER_CONSENT_TEMPLATE if TemplateKind(kind) == TemplateKind.CONSENT else TxType.REGISTER_TEMPLATE
    arguments = {"header": header, "text": text}
    if tx_type == TxType.REGISTER_TEMPLATE:
        arguments["kind"] = TemplateKind(kind).value
    tx_id = gateway.submit(tx_type, arguments)
    return template_id_for(header, text), tx_id


def lookup_template(state, template_id: str) -> Optional[TemplateRecord]:
    record = state.record(template_key(template_id))
    return None if record is None else TemplateRecord.from_record(record)

"""Principal entities, SMS headers and delegation."""

import logging
import re
from typing import Any, Dict, Iterable, List, Optional

import numpy as np

from dndchain.core.errors import RejectReason, ValidatorRejected
from dndchain.ledger.contract import TxContext, contract
from dndchain.ledger.types import TxType
from dndchain.membership.crypto import digest
from dndchain.membership.identity import Role

logger = logging.getLogger(__name__)

HEADER_PATTERN = re.compile(r"^[A-Z0-9]{6}$")
HEADER_INDEX_KEY = "header-index"

CONFUSABLES = str.maketrans({"0": "O", "1": "I", "L": "I", "5": "S", "8": "B"})


def entity_key(pe_id: str) -> str:
    return f"pe/{pe_id}"


def header_key(header: str) -> str:
    return f"header/{header}"


def principal_entity_id(name: str) -> str:
    return "PE-" + digest(name.strip().lower().encode("utf-8"))[:4].hex().upper()


def check_header_format(header: str) -> str:
    if not isinstance(header, str) or not HEADER_PATTERN.match(header):
        raise ValidatorRejected(RejectReason.BAD_FORMAT, f"header {header!r}")
    return header


def normalize_header(header: str) -> str:
    return header.upper().translate(CONFUSABLES)


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance."""
    table = np.zeros((len(a) + 1, len(b) + 1), dtype=np.int32)
    table[:, 0] = np.arange(len(a) + 1)
    table[0, :] = np.arange(len(b) + 1)
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            table[i, j] = min(
                table[i - 1, j] + 1,
                table[i, j - 1] + 1,
                table[i - 1, j - 1] + (a[i - 1] != b[j - 1]),
            )
    return int(table[len(a), len(b)])


def is_lookalike(candidate: str, existing: str, threshold: int) -> bool:
    return edit_distance(normalize_header(candidate), normalize_header(existing)) <= threshold


def find_lookalike(candidate: str, existing: Iterable[str], threshold: int) -> Optional[str]:
    return next((h for h in existing if is_lookalike(candidate, h, threshold)), None)


def is_delegated(header_record: Optional[Dict[str, Any]], tm_id: str) -> bool:
    return header_record is not None and tm_id in header_record.get("delegated_tms", [])


@contract(TxType.REGISTER_PRINCIPAL_ENTITY)
def register_principal_entity_validator(ctx: TxContext) -> None:
    pe_id = ctx.arg("pe_id")
    name = ctx.arg("name")
    if not pe_id or not name.strip():
        ctx.reject(RejectReason.MALFORMED_ARGS, "entity id and name are required")
    if ctx.get(entity_key(pe_id)) is not None:
        ctx.reject(RejectReason.DUPLICATE_ENTITY, pe_id)
    ctx.put_record(
        entity_key(pe_id),
        {
            "pe_id": pe_id,
            "name": name,
            "documents_ref": ctx.arg("documents_ref"),
            "approved": ctx.arg("approved", bool),
            "proxy": ctx.proposer,
            "registered_tick": ctx.tick,
        },
    )


@contract(TxType.REGISTER_HEADER)
def register_header_validator(ctx: TxContext) -> None:
    header = check_header_format(ctx.args.get("header"))
    pe_id = ctx.arg("pe_id")
    entity = ctx.get_record(entity_key(pe_id))
    if entity is None:
        ctx.reject(RejectReason.UNKNOWN_ENTITY, pe_id)
    if not entity["approved"]:
        ctx.reject(RejectReason.UNVERIFIED_ENTITY, pe_id)
    if entity["proxy"] != ctx.proposer:
        ctx.reject(RejectReason.NOT_OWNER, f"{ctx.proposer} does not act for {pe_id}")
    index: List[str] = (ctx.get_record(HEADER_INDEX_KEY) or {}).get("headers", [])
    if header in index:
        ctx.reject(RejectReason.DUPLICATE_HEADER, header)
    similar = find_lookalike(header, index, ctx.config.registry.lookalike_threshold)
    if similar is not None:
        ctx.reject(RejectReason.LOOKALIKE_HEADER, f"{header} resembles {similar}")
    ctx.put_record(
        header_key(header),
        {"header": header, "owner_pe": pe_id, "delegated_tms": [], "registered_tick": ctx.tick},
    )
    ctx.put_record(HEADER_INDEX_KEY, {"headers": sorted([*index, header])})


@contract(TxType.DELEGATE_HEADER)
def delegate_header_validator(ctx: TxContext) -> None:
    header = check_header_format(ctx.args.get("header"))
    pe_id = ctx.arg("pe_id")
    tm_id = ctx.arg("tm_id")
    record = ctx.get_record(header_key(header))
    if record is None:
        ctx.reject(RejectReason.UNKNOWN_HEADER, header)
    entity = ctx.get_record(entity_key(pe_id))
    if record["owner_pe"] != pe_id or entity is None or entity["proxy"] != ctx.proposer:
        ctx.reject(RejectReason.NOT_OWNER, f"{ctx.proposer} does not own {header}")
    telemarketer = ctx.member(tm_id)
    if telemarketer is None or telemarketer["role"] != Role.TELEMARKETER.value:
        ctx.reject(RejectReason.UNKNOWN_TELEMARKETER, tm_id)
    delegated = sorted(set(record["delegated_tms"]) | {tm_id})
    ctx.put_record(header_key(header), {**record, "delegated_tms": delegated})


def register_principal_entity(
    gateway, name: str, documents_ref: str, approved: bool = True, pe_id: Optional[str] = None
) -> str:
    pe_id = pe_id or principal_entity_id(name)
    return gateway.submit(
        TxType.REGISTER_PRINCIPAL_ENTITY,
        {"pe_id": pe_id, "name": name, "documents_ref": documents_ref, "approved": approved},
    )


def register_header(gateway, pe_id: str, header: str) -> str:
    return gateway.submit(TxType.REGISTER_HEADER, {"pe_id": pe_id, "header": header})


def delegate_header(gateway, pe_id: str, header: str, tm_id: str) -> str:
    return gateway.submit(TxType.DELEGATE_HEADER, {"pe_id": pe_id, "header": header, "tm_id": tm_id})

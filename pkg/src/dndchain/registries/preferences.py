"""Subscriber preference registry keyed by the hashed number."""

from dataclasses import dataclass
from typing import Any, Dict, Iterable, Optional, Tuple, Union

from dndchain.core.errors import RejectReason
from dndchain.ledger.contract import TxContext, contract
from dndchain.ledger.types import TxType
from dndchain.membership.identity import Role
from dndchain.registries.categories import PreferenceMode, blocked_set_for
from dndchain.registries.subscribers import is_hashed_key


def preference_key(hashed_key: str) -> str:
    return f"pref/{hashed_key}"


@dataclass(frozen=True)
class PreferenceRecord:
    key: str
    operator: str
    mode: PreferenceMode
    blocked: Tuple[str, ...]
    updated_tick: int = 0
    submitted_height: int = 0

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "PreferenceRecord":
        return cls(
            record["key"],
            record["operator"],
            PreferenceMode(record["mode"]),
            tuple(record["blocked"]),
            record.get("updated_tick", 0),
            record.get("submitted_height", 0),
        )


@contract(TxType.UPDATE_PREFERENCE)
def update_preference_validator(ctx: TxContext) -> None:
    hashed_key = ctx.args.get("hashed_key")
    if not is_hashed_key(hashed_key):
        ctx.reject(RejectReason.MALFORMED_ARGS, "hashed_key must be a 64-character hex digest")
    operator = ctx.arg("operator")
    proposer = ctx.member(ctx.proposer)
    if proposer["role"] == Role.OPERATOR.value and operator != ctx.proposer:
        ctx.reject(RejectReason.WRONG_OPERATOR, f"{ctx.proposer} proposing for {operator}")
    owner = ctx.member(operator)
    if owner is None or owner["role"] != Role.OPERATOR.value:
        ctx.reject(RejectReason.UNKNOWN_OPERATOR, operator)
    existing = ctx.get_record(preference_key(hashed_key))
    if existing is not None and existing["operator"] != operator:
        ctx.reject(RejectReason.WRONG_OPERATOR, f"number belongs to {existing['operator']}")
    try:
        mode = PreferenceMode(ctx.arg("mode"))
    except ValueError:
        ctx.reject(RejectReason.MALFORMED_ARGS, f"mode {ctx.args.get('mode')!r}")
    blocked = blocked_set_for(mode, ctx.arg("blocked", list))
    ctx.put_record(
        preference_key(hashed_key),
        {
            "key": hashed_key,
            "operator": operator,
            "mode": mode.value,
            "blocked": blocked,
            "updated_tick": ctx.tick,
            "submitted_height": ctx.args.get("submitted_height", ctx.height),
        },
    )


def update_preference(
    gateway,
    hashed_key: str,
    operator: str,
    mode: Union[PreferenceMode, str],
    blocked_categories: Iterable[Union[str, int]] = (),
) -> str:
    return gateway.submit(
        TxType.UPDATE_PREFERENCE,
        {
            "hashed_key": hashed_key,
            "operator": operator,
            "mode": PreferenceMode(mode).value,
            "blocked": list(blocked_categories),
            "submitted_height": gateway.peer.height,
        },
    )


def lookup_preference(state, hashed_key: str) -> Optional[PreferenceRecord]:
    record = state.record(preference_key(hashed_key))
    return None if record is None else PreferenceRecord.from_record(record)

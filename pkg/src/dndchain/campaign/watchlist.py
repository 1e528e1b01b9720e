"""Per-number UTM complaint counters and degraded-service escalation."""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Sequence

from dndchain.campaign.complaints import watch_key
from dndchain.core.errors import RejectReason
from dndchain.ledger.contract import TxContext, contract
from dndchain.ledger.types import TxType

logger = logging.getLogger(__name__)


class ServiceAction(str, Enum):
    NONE = "none"
    THROTTLED = "throttled"
    DEGRADED = "degraded"
    TERMINATED = "terminated"

    @property
    def level(self) -> int:
        return _LEVELS.index(self)


_LEVELS = [ServiceAction.NONE, ServiceAction.THROTTLED, ServiceAction.DEGRADED, ServiceAction.TERMINATED]


def action_for_count(count: int, thresholds: Sequence[int]) -> ServiceAction:
    """Step function over the configured thresholds (T1, T2, T3)."""
    level = sum(1 for threshold in thresholds[:3] if count >= threshold)
    return _LEVELS[level]


@dataclass(frozen=True)
class WatchListEntry:
    key: str
    complaint_count: int
    last_height: int
    action: ServiceAction

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "WatchListEntry":
        return cls(record["key"], record["complaint_count"], record.get("last_height", -1), ServiceAction(record["action"]))


@contract(TxType.DEGRADED_SERVICE)
def degraded_service_validator(ctx: TxContext) -> None:
    hashed_key = ctx.arg("hashed_key")
    try:
        action = ServiceAction(ctx.arg("action"))
    except ValueError:
        ctx.reject(RejectReason.MALFORMED_ARGS, "action")
    record = ctx.get_record(watch_key(hashed_key))
    if record is None:
        ctx.reject(RejectReason.NOT_ON_WATCHLIST, hashed_key[:12])
    entry = WatchListEntry.from_record(record)
    if action.level <= entry.action.level:
        ctx.reject(RejectReason.ACTION_NOT_ESCALATING, f"{entry.action.value} -> {action.value}")
    reached = action_for_count(entry.complaint_count, ctx.config.campaign.thresholds)
    if action.level > reached.level:
        ctx.reject(RejectReason.THRESHOLD_NOT_REACHED, f"{entry.complaint_count} complaints allow {reached.value}")
    ctx.put_record(watch_key(hashed_key), {**record, "action": action.value, "action_tick": ctx.tick})


def lookup_watch_entry(state, hashed_key: str) -> Optional[WatchListEntry]:
    record = state.record(watch_key(hashed_key))
    return None if record is None else WatchListEntry.from_record(record)


def update_watchlist(gateway, hashed_key: str) -> Optional[str]:
    """Propose DegradedService when the committed count crossed a new threshold."""
    entry = lookup_watch_entry(gateway.peer.state, hashed_key)
    if entry is None:
        return None
    target = action_for_count(entry.complaint_count, gateway.peer.config.campaign.thresholds)
    if target.level <= entry.action.level:
        return None
    logger.info(f"{gateway.identity_id}: escalating {hashed_key[:12]} to {target.value} after {entry.complaint_count} complaints")
    return gateway.submit(TxType.DEGRADED_SERVICE, {"hashed_key": hashed_key, "action": target.value})

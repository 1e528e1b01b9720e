"""Operator-side campaign queue and the observer's watch-list monitor."""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from dndchain.campaign.campaigns import (
    DeliveryReport,
    execute_campaign,
    in_delivery_window,
    lookup_campaign,
    report_campaign_status,
    simulate_delivery,
)
from dndchain.campaign.complaints import SenderKind
from dndchain.campaign.trace import DeliveryRow
from dndchain.campaign.watchlist import ServiceAction, update_watchlist
from dndchain.core.errors import (
    BadSignature,
    DigestMismatch,
    DndChainError,
    IoFailure,
    OutsideWindow,
    TemplateMismatch,
    TokenNotOnChain,
)
from dndchain.ledger.types import Block, TxType
from dndchain.membership.crypto import KeyPair
from dndchain.scrubbing.files import FileStore
from dndchain.scrubbing.service import ScrubToken, scrub_key

logger = logging.getLogger(__name__)

RowSink = Callable[[Sequence[DeliveryRow]], None]


@dataclass(frozen=True)
class QueuedCampaign:
    campaign_id: str
    message: str
    raw_numbers: Optional[Tuple[str, ...]] = None
    legacy: bool = False


class OperatorDesk:
    """One operator's delivery queue. Campaigns wait here until committed and inside the window."""

    def __init__(
        self,
        operator_id: str,
        keypair: KeyPair,
        peer,
        gateway,
        store: FileStore,
        rng: np.random.Generator,
        sink: RowSink,
    ):
        self.operator_id = operator_id
        self.keypair = keypair
        self.peer = peer
        self.gateway = gateway
        self.store = store
        self.rng = rng
        self.sink = sink
        self.queue: List[QueuedCampaign] = []
        self.service_actions: Dict[str, ServiceAction] = {}
        self.reports: Dict[str, DeliveryReport] = {}
        peer.subscribe(self._on_commit)

    def _on_commit(self, block: Block) -> None:
        for _, envelope in block.valid_transactions():
            if envelope.payload.tx_type == TxType.DEGRADED_SERVICE:
                args = envelope.payload.arguments()
                self.service_actions[args["hashed_key"]] = ServiceAction(args["action"])

    def enqueue(self, campaign_id: str, message: str, raw_numbers: Optional[Sequence[str]] = None) -> None:
        raw = None if raw_numbers is None else tuple(raw_numbers)
        self.queue.append(QueuedCampaign(campaign_id, message, raw))

    def enqueue_legacy(self, campaign_id: str, message: str, numbers: Sequence[str]) -> None:
        """Pre-mandate traffic: a raw list with no token and nothing on chain."""
        self.queue.append(QueuedCampaign(campaign_id, message, tuple(numbers), legacy=True))

    def is_terminated(self, hashed_key: str) -> bool:
        return self.service_actions.get(hashed_key) == ServiceAction.TERMINATED

    def step(self, tick: int) -> int:
        """Deliver whatever is ready; returns the number of campaigns handled."""
        waiting: List[QueuedCampaign] = []
        handled = 0
        for item in self.queue:
            done = self._deliver_legacy(item, tick) if item.legacy else self._deliver(item, tick)
            if done:
                handled += 1
            else:
                waiting.append(item)
        self.queue = waiting
        return handled

    def _deliver_legacy(self, item: QueuedCampaign, tick: int) -> bool:
        if not in_delivery_window(tick, self.peer.config.campaign):
            return False
        rows = simulate_delivery(
            item.campaign_id, self.operator_id, item.raw_numbers, tick,
            self.peer.config.campaign.delivery_success_prob, self.rng, self.peer.config.crypto.key_bytes,
        )
        self.sink(rows)
        return True

    def _deliver(self, item: QueuedCampaign, tick: int) -> bool:
        state = self.peer.state
        campaign = lookup_campaign(state, item.campaign_id)
        if campaign is None:
            return False
        if self.operator_id not in campaign.operators or campaign.leg_report(self.operator_id) is not None:
            return True
        token = ScrubToken.from_args(state.record(scrub_key(campaign.token_id)))
        try:
            execution = execute_campaign(
                self.operator_id,
                self.keypair,
                campaign,
                item.message,
                token=token,
                state=state,
                store=self.store,
                config=self.peer.config,
                rng=self.rng,
                tick=tick,
                raw_numbers=item.raw_numbers,
            )
        except OutsideWindow:
            return False
        except (TemplateMismatch, TokenNotOnChain, BadSignature, DigestMismatch, IoFailure) as exc:
            logger.warning(f"{self.operator_id}: refusing {item.campaign_id}: {exc}")
            reason = type(exc).__name__
            report = DeliveryReport.create(
                self.keypair, item.campaign_id, self.operator_id, 0, 0, tick, outcome="rejected", reason=reason
            )
        else:
            self.sink(execution.rows)
            report = execution.report
        self.reports[item.campaign_id] = report
        try:
            report_campaign_status(self.gateway, report)
        except DndChainError as exc:
            logger.warning(f"{self.operator_id}: status report for {item.campaign_id} not accepted: {exc}")
        return True


class WatchListMonitor:
    """Observer role: escalates numbers whose committed complaint count crossed a threshold."""

    def __init__(self, gateway, peer):
        self.gateway = gateway
        self.peer = peer
        self._pending: Dict[str, None] = {}
        self._in_flight: Dict[str, str] = {}
        peer.subscribe(self._on_commit)

    def _on_commit(self, block: Block) -> None:
        for _, envelope in block.valid_transactions():
            if envelope.payload.tx_type != TxType.COMPLAINT_FILED:
                continue
            args = envelope.payload.arguments()
            if args["sender_kind"] == SenderKind.NUMBER.value:
                self._pending[args["sender"]] = None

    def step(self) -> List[str]:
        submitted = []
        for hashed_key in sorted(self._pending):
            tx_id = self._in_flight.get(hashed_key)
            if tx_id is not None and self.gateway.outcome(tx_id) is None:
                continue
            del self._pending[hashed_key]
            try:
                tx_id = update_watchlist(self.gateway, hashed_key)
            except DndChainError as exc:
                logger.info(f"watch-list update for {hashed_key[:12]} not proposed: {exc}")
                continue
            if tx_id is not None:
                self._in_flight[hashed_key] = tx_id
                submitted.append(tx_id)
        return submitted

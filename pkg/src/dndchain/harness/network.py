"""In-process network: reliable and ordered unless a scripted fault says otherwise."""

import heapq
import logging
from typing import Any, Dict, List, Sequence, Tuple

from dndchain.core.errors import NodeUnavailable
from dndchain.harness.scenario import FaultKind, FaultSpec
from dndchain.ledger.orderer import OrderingService
from dndchain.ledger.types import Block, Envelope

logger = logging.getLogger(__name__)


class FaultPlan:
    def __init__(self, faults: Sequence[FaultSpec] = ()):
        self.faults = list(faults)

    def active(self, node_id: str, kind: FaultKind, tick: int) -> bool:
        return self.find(node_id, kind, tick) is not None

    def find(self, node_id: str, kind: FaultKind, tick: int):
        return next((f for f in self.faults if f.node == node_id and f.kind == kind and f.active(tick)), None)


class InProcessNetwork:
    """Routes RPCs between nodes and carries blocks from the orderer to every node."""

    def __init__(self, orderer: OrderingService, faults: FaultPlan):
        self.orderer = orderer
        self.faults = faults
        self.now = 0
        self.nodes: Dict[str, Any] = {}
        self._in_transit: List[Tuple[int, str, int, Block]] = []
        self.dropped = 0

    def register(self, node) -> None:
        self.nodes[node.node_id] = node

    def node_ids(self) -> List[str]:
        return sorted(self.nodes)

    def is_up(self, node_id: str) -> bool:
        return node_id in self.nodes and not self.faults.active(node_id, FaultKind.CRASH, self.now)

    def call(self, source: str, target: str, method: str, *args: Any) -> Any:
        if not self.is_up(target):
            raise NodeUnavailable(f"{target} is unreachable from {source}")
        return self.nodes[target].handle(method, *args)

    def order(self, envelope: Envelope) -> None:
        self.orderer.submit(envelope, self.now)

    def broadcast(self, blocks: Sequence[Block]) -> None:
        for node_id in self.node_ids():
            for block in blocks:
                if not self.is_up(node_id) or self.faults.active(node_id, FaultKind.DROP_BLOCKS, self.now):
                    self.dropped += 1
                    logger.info(f"block {block.height} dropped on the way to {node_id}")
                    continue
                delay = self.faults.find(node_id, FaultKind.DELAY_BLOCKS, self.now)
                if delay is not None:
                    heapq.heappush(self._in_transit, (self.now + delay.delay, node_id, block.height, block))
                    logger.debug(f"block {block.height} to {node_id} delayed {delay.delay} ticks")
                    continue
                self.nodes[node_id].receive(block)

    def deliver_due(self) -> int:
        """Hand over delayed blocks whose time has come, in (due, node, height) order."""
        delivered = 0
        while self._in_transit and self._in_transit[0][0] <= self.now:
            _, node_id, _, block = heapq.heappop(self._in_transit)
            if self.is_up(node_id):
                self.nodes[node_id].receive(block)
                delivered += 1
            else:
                self.dropped += 1
        return delivered

    @property
    def in_transit(self) -> int:
        return len(self._in_transit)

    def in_transit_for(self, node_id: str) -> int:
        return sum(1 for _, target, _, _ in self._in_transit if target == node_id)

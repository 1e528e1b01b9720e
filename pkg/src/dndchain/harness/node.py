"""A consortium member: peer, gateway and the services its role runs."""

import logging
from typing import Any, Optional

from dndchain.campaign.desk import OperatorDesk, RowSink, WatchListMonitor
from dndchain.core.config import ChainConfig
from dndchain.core.errors import BrokenChain, DndChainError, NodeUnavailable
from dndchain.core.rng import derive_rng
from dndchain.ledger.gateway import Gateway
from dndchain.ledger.peer import Peer
from dndchain.ledger.types import Block
from dndchain.membership.crypto import KeyPair
from dndchain.membership.identity import RegulatorDb, Role
from dndchain.scrubbing.files import FileStore
from dndchain.scrubbing.service import ScrubbingService

logger = logging.getLogger(__name__)


class Node:
    def __init__(
        self,
        node_id: str,
        role: Role,
        keypair: KeyPair,
        config: ChainConfig,
        network,
        *,
        seed: int,
        regulator: Optional[RegulatorDb] = None,
        store: Optional[FileStore] = None,
        sink: Optional[RowSink] = None,
        region: str = "",
    ):
        self.node_id = node_id
        self.role = Role(role)
        self.region = region
        self.keypair = keypair
        self.network = network
        self.peer = Peer(node_id, keypair, config, regulator)
        self.gateway = Gateway(node_id, keypair, self.peer, network)
        self.rng = derive_rng(seed, "node", node_id)
        self.scrubbing: Optional[ScrubbingService] = None
        self.desk: Optional[OperatorDesk] = None
        self.monitor: Optional[WatchListMonitor] = None
        self._behind = False
        if self.role == Role.SCRUBBER:
            self.scrubbing = ScrubbingService(node_id, keypair, self.peer, self.gateway, store, derive_rng(seed, "scrub", node_id))
        elif self.role == Role.OPERATOR:
            self.desk = OperatorDesk(
                node_id, keypair, self.peer, self.gateway, store, derive_rng(seed, "delivery", node_id), sink
            )
        elif self.role == Role.OBSERVER:
            self.monitor = WatchListMonitor(self.gateway, self.peer)
        network.register(self)

    @property
    def display_prefix(self) -> str:
        letters = "".join(c for c in self.region.upper() if c.isalpha())
        return (letters + "XX")[:2]

    def handle(self, method: str, *args: Any) -> Any:
        if method == "endorse":
            return self.peer.endorse(*args)
        if method == "blocks_from":
            return self.peer.blocks_from(*args)
        if method == "height":
            return self.peer.height
        if method == "scrub" and self.scrubbing is not None:
            return self.scrubbing.handle(*args)
        if method == "deliver" and self.desk is not None:
            return self.desk.enqueue(*args)
        if method == "deliver_legacy" and self.desk is not None:
            return self.desk.enqueue_legacy(*args)
        raise NodeUnavailable(f"{self.node_id} does not serve {method}")

    def receive(self, block: Block) -> None:
        if block.height <= self.peer.height:
            return
        if block.height > self.peer.height + 1:
            self._behind = True
            self.sync()
            if block.height != self.peer.height + 1:
                return
        try:
            self.peer.validate_and_commit(block)
        except BrokenChain as exc:
            logger.warning(f"{self.node_id}: rejected block {block.height}: {exc}")
            self._behind = True

    def sync(self, target_height: Optional[int] = None) -> int:
        """Fetch and re-validate missing blocks from the first reachable peer that has them."""
        committed = 0
        for other in self.network.node_ids():
            if other == self.node_id:
                continue
            try:
                if self.network.call(self.node_id, other, "height") <= self.peer.height:
                    continue
                blocks = self.network.call(self.node_id, other, "blocks_from", self.peer.height + 1)
                committed += self.peer.catch_up(blocks)
            except NodeUnavailable:
                continue
            except BrokenChain as exc:
                logger.warning(f"{self.node_id}: blocks from {other} failed validation: {exc}")
                continue
            if target_height is None or self.peer.height >= target_height:
                break
        self._behind = target_height is not None and self.peer.height < target_height
        return committed

    def step(self, tick: int, chain_height: int) -> None:
        if self.peer.height < chain_height and (self._behind or self.network.in_transit_for(self.node_id) == 0):
            self.sync(chain_height)
        self.gateway.flush_retries()
        if self.desk is not None:
            self.desk.step(tick)
        if self.monitor is not None:
            self.monitor.step()

    def submit_safely(self, label: str, submit, *args, **kwargs) -> Any:
        """Run a client helper, logging instead of raising when the network refuses it."""
        try:
            return submit(self.gateway, *args, **kwargs)
        except DndChainError as exc:
            logger.warning(f"{self.node_id}: {label} refused: {exc}")
            return None

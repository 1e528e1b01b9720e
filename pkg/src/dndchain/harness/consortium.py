"""Boot a consortium over the in-process network and advance it tick by tick."""

import logging
from typing import Dict, Iterable, List, Optional, Sequence

from dndchain.campaign.trace import DeliveryRow
from dndchain.core.config import ChainConfig
from dndchain.core.errors import NodeCrashUnhandled
from dndchain.core.rng import derive_rng
from dndchain.harness.network import FaultPlan, InProcessNetwork
from dndchain.harness.node import Node
from dndchain.harness.scenario import FaultSpec, NodeSpec
from dndchain.ledger.chain import make_genesis_block
from dndchain.ledger.orderer import BatchConfig, SoloOrderer
from dndchain.ledger.types import Block
from dndchain.membership.crypto import KeyPair
from dndchain.membership.identity import ParticipantIdentity, RegulatorDb, Role
from dndchain.scrubbing.files import FileStore

logger = logging.getLogger(__name__)


def identity_keypair(seed: int, node_id: str) -> KeyPair:
    return KeyPair(derive_rng(seed, "identity", node_id).bytes(32))


class Consortium:
    def __init__(
        self,
        config: ChainConfig,
        nodes: Sequence[NodeSpec],
        *,
        seed: int = 0,
        faults: Iterable[FaultSpec] = (),
        regulator: Optional[RegulatorDb] = None,
        store_root: Optional[str] = None,
    ):
        self.config = config
        self.seed = seed
        self.regulator = regulator if regulator is not None else RegulatorDb()
        self.store = FileStore(store_root or config.scrub.store_root)
        self.trace: List[DeliveryRow] = []
        identities = [
            ParticipantIdentity.from_keypair(spec.id, spec.role, identity_keypair(seed, spec.id), spec.region)
            for spec in nodes
        ]
        self.genesis = make_genesis_block(identities, config)
        self.orderer = SoloOrderer(BatchConfig.from_ledger(config.ledger), self.genesis)
        self.network = InProcessNetwork(self.orderer, FaultPlan(faults))
        self.nodes: Dict[str, Node] = {}
        for spec in sorted(nodes, key=lambda s: s.id):
            self._spawn(spec.id, spec.role, spec.region)

    def _spawn(self, node_id: str, role: Role, region: str = "") -> Node:
        node = Node(
            node_id,
            role,
            identity_keypair(self.seed, node_id),
            self.config,
            self.network,
            seed=self.seed,
            regulator=self.regulator,
            store=self.store,
            sink=self.trace.extend,
            region=region,
        )
        node.peer.validate_and_commit(self.genesis)
        self.nodes[node_id] = node
        return node

    def add_node(self, node_id: str, role: Role = Role.TELEMARKETER, region: str = "") -> Node:
        """Start a node outside genesis; it becomes a member once its admission commits."""
        node = self._spawn(node_id, role, region)
        node.sync(self.chain_height)
        return node

    @property
    def now(self) -> int:
        return self.network.now

    @property
    def chain_height(self) -> int:
        return self.orderer.height

    def node(self, node_id: str) -> Node:
        return self.nodes[node_id]

    def by_role(self, role: Role) -> List[Node]:
        return [self.nodes[i] for i in sorted(self.nodes) if self.nodes[i].role == Role(role)]

    def is_up(self, node_id: str) -> bool:
        return self.network.is_up(node_id)

    def begin_tick(self, tick: int) -> None:
        self.network.now = tick
        self.network.deliver_due()
        for node_id in sorted(self.nodes):
            if not self.network.is_up(node_id):
                continue
            try:
                self.nodes[node_id].step(tick, self.chain_height)
            except Exception as exc:
                raise NodeCrashUnhandled(f"{node_id} failed at tick {tick}: {exc}") from exc

    def end_tick(self, force: bool = False) -> List[Block]:
        blocks = self.orderer.cut(self.now, force)
        self.network.broadcast(blocks)
        return blocks

    def advance(self, ticks: int = 1) -> None:
        for _ in range(ticks):
            self.end_tick()
            self.begin_tick(self.now + 1)

    @property
    def idle(self) -> bool:
        if self.orderer.pending_count or self.network.in_transit:
            return False
        for node_id, node in self.nodes.items():
            if not self.is_up(node_id):
                continue
            if node.gateway.pending or node.peer.height < self.chain_height:
                return False
            if node.desk is not None and any(not item.legacy for item in node.desk.queue):
                return False
        return True

    def settle(self, max_ticks: int = 200) -> int:
        """Advance until every proposal has committed everywhere; returns ticks used."""
        for used in range(max_ticks):
            if self.idle:
                return used
            self.end_tick(force=True)
            self.begin_tick(self.now + 1)
        if not self.idle:
            logger.warning(f"consortium not idle after {max_ticks} ticks")
        return max_ticks

    @property
    def blocks(self) -> List[Block]:
        """Committed chain of the most advanced node."""
        best = max(sorted(self.nodes), key=lambda i: self.nodes[i].peer.height)
        return list(self.nodes[best].peer.chain)

import logging
from dataclasses import dataclass
from typing import List, Protocol, Sequence, Tuple

from dndchain.core.config import LedgerConfig
from dndchain.ledger.types import Block, Envelope

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BatchConfig:
    max_batch_size: int = 10
    batch_timeout: int = 2

    @classmethod
    def from_ledger(cls, ledger: LedgerConfig) -> "BatchConfig":
        return cls(ledger.max_batch_size, ledger.batch_timeout)


@dataclass(frozen=True)
class PendingTx:
    arrival: int
    envelope: Envelope

    @property
    def order_key(self) -> Tuple[int, str, int]:
        payload = self.envelope.payload
        return (self.arrival, payload.proposer, payload.nonce)


def order_and_cut_block(
    pending: Sequence[PendingTx],
    batch: BatchConfig,
    height: int,
    prev_hash: bytes,
    now: int,
    force: bool = False,
) -> Tuple[List[Block], List[PendingTx]]:
    """Cut full batches, then a partial one once its oldest entry has waited ``batch_timeout``.

    Returns the new blocks and the still-pending remainder.
    """
    queue = sorted(pending, key=lambda p: p.order_key)
    blocks: List[Block] = []
    while len(queue) >= batch.max_batch_size or (
        queue and (force or now - queue[0].arrival >= batch.batch_timeout)
    ):
        chunk, queue = queue[: batch.max_batch_size], queue[batch.max_batch_size :]
        block = Block.cut(height, prev_hash, [p.envelope for p in chunk])
        blocks.append(block)
        height, prev_hash = height + 1, block.block_hash
    return blocks, queue


class OrderingService(Protocol):
    def submit(self, envelope: Envelope, arrival: int) -> None: ...

    def cut(self, now: int, force: bool = False) -> List[Block]: ...

    @property
    def pending_count(self) -> int: ...


class SoloOrderer:
    """Single logical orderer; a replicated service would satisfy the same protocol."""

    def __init__(self, batch: BatchConfig, genesis: Block):
        self.batch = batch
        self._pending: List[PendingTx] = []
        self._height = genesis.height
        self._tip = genesis.block_hash

    @property
    def pending_count(self) -> int:
        return len(self._pending)

    @property
    def height(self) -> int:
        return self._height

    def submit(self, envelope: Envelope, arrival: int) -> None:
        self._pending.append(PendingTx(arrival, envelope))

    def cut(self, now: int, force: bool = False) -> List[Block]:
        blocks, self._pending = order_and_cut_block(
            self._pending, self.batch, self._height + 1, self._tip, now, force
        )
        if blocks:
            self._height = blocks[-1].height
            self._tip = blocks[-1].block_hash
            logger.debug(f"orderer cut {len(blocks)} block(s) up to height {self._height}")
        return blocks

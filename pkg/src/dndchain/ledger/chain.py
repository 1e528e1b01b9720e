"""Genesis construction, chain integrity checks and the ledger dump file."""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

from dndchain.core.config import ChainConfig
from dndchain.core.errors import CodecError, IoFailure
from dndchain.core.fileio import atomic_write_bytes
from dndchain.ledger.contract import execute
from dndchain.ledger.state import WorldState
from dndchain.ledger.types import (
    GENESIS_PROPOSER,
    Block,
    Envelope,
    TransactionPayload,
    TxType,
    compute_commit_hash,
)
from dndchain.membership.contracts import genesis_arguments
from dndchain.membership.crypto import ZERO_DIGEST
from dndchain.membership.identity import ParticipantIdentity

logger = logging.getLogger(__name__)

DUMP_MAGIC = b"TLCH"
DUMP_VERSION = 0x01
_LENGTH = struct.Struct(">I")


def make_genesis_block(identities: Iterable[ParticipantIdentity], config: ChainConfig) -> Block:
    payload = TransactionPayload.build(
        TxType.GENESIS, genesis_arguments(identities, config), GENESIS_PROPOSER, 0, 0
    )
    rwset = execute(WorldState(), payload, config)
    return Block.cut(0, ZERO_DIGEST, [Envelope(payload, b"", rwset)])


@dataclass(frozen=True)
class ChainReport:
    ok: bool
    first_bad_height: Optional[int] = None
    reason: str = ""
    length: int = 0


def verify_chain(blocks: Sequence[Block]) -> ChainReport:
    """Walk hash links, recompute block and commit hashes."""
    prev_hash, prev_commit = ZERO_DIGEST, ZERO_DIGEST
    for expected_height, block in enumerate(blocks):
        if block.height != expected_height:
            return ChainReport(False, expected_height, "height out of sequence", len(blocks))
        if block.prev_hash != prev_hash:
            return ChainReport(False, expected_height, "prev_hash does not link", len(blocks))
        if block.block_hash != block.expected_hash():
            return ChainReport(False, expected_height, "block hash mismatch", len(blocks))
        if len(block.validity_flags) != len(block.transactions) or block.commit_hash != compute_commit_hash(
            prev_commit, block.block_hash, block.validity_flags
        ):
            return ChainReport(False, expected_height, "commit hash mismatch", len(blocks))
        prev_hash, prev_commit = block.block_hash, block.commit_hash
    return ChainReport(True, None, "", len(blocks))


def verify_raw(raw_blocks: Sequence[bytes]) -> ChainReport:
    """Like ``verify_chain`` but over serialized blocks; undecodable bytes fail at their height."""
    blocks: List[Block] = []
    for height, raw in enumerate(raw_blocks):
        try:
            blocks.append(Block.from_bytes(raw))
        except CodecError as exc:
            report = verify_chain(blocks)
            if not report.ok:
                return report
            return ChainReport(False, height, f"undecodable block: {exc}", len(raw_blocks))
    return verify_chain(blocks)


def serialize_ledger(blocks: Iterable[Block]) -> bytes:
    parts = [DUMP_MAGIC, bytes([DUMP_VERSION])]
    for block in blocks:
        raw = block.to_bytes()
        parts.append(_LENGTH.pack(len(raw)))
        parts.append(raw)
    return b"".join(parts)


def split_ledger(data: bytes) -> List[bytes]:
    """Split a dump into per-block byte strings without decoding them."""
    if data[:4] != DUMP_MAGIC or len(data) < 5:
        raise CodecError("not a ledger dump")
    if data[4] != DUMP_VERSION:
        raise CodecError(f"unsupported dump version {data[4]}")
    raw, offset = [], 5
    while offset < len(data):
        if offset + _LENGTH.size > len(data):
            raise CodecError("truncated length prefix")
        (length,) = _LENGTH.unpack_from(data, offset)
        offset += _LENGTH.size
        if offset + length > len(data):
            raise CodecError("truncated block")
        raw.append(data[offset : offset + length])
        offset += length
    return raw


def dump_ledger(blocks: Iterable[Block], path: Union[str, Path]) -> None:
    atomic_write_bytes(path, serialize_ledger(blocks))
    logger.info(f"ledger written to {path}")


def read_ledger_bytes(path: Union[str, Path]) -> List[bytes]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return split_ledger(data)


def load_ledger(path: Union[str, Path]) -> List[Block]:
    return [Block.from_bytes(raw) for raw in read_ledger_bytes(path)]

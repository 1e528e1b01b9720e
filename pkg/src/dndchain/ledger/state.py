"""Versioned key-value world state."""

import bisect
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Iterator, List, Optional, Tuple

from dndchain.ledger.codec import decode, encode
from dndchain.ledger.types import GENESIS_PROPOSER, KVWrite, Version
from dndchain.membership.crypto import digest

EMPTY_STATE_HASH = digest(b"")


def entry_digest(key: str, value: bytes, version: Version) -> bytes:
    return digest(encode([key, value, version.height, version.tx_index]))


@dataclass(frozen=True)
class StateEntry:
    value: bytes
    version: Version
    digest: bytes = field(default=b"", compare=False)


class WorldState:
    """Committed entries keyed by namespaced string keys. Height -1 means nothing committed."""

    def __init__(self):
        self._entries: Dict[str, StateEntry] = {}
        self._keys: List[str] = []  # sorted
        self.height = -1

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def get(self, key: str) -> Optional[StateEntry]:
        return self._entries.get(key)

    def value(self, key: str) -> Optional[bytes]:
        entry = self._entries.get(key)
        return None if entry is None else entry.value

    def record(self, key: str) -> Optional[Any]:
        raw = self.value(key)
        return None if raw is None else decode(raw)

    def version(self, key: str) -> Optional[Version]:
        entry = self._entries.get(key)
        return None if entry is None else entry.version

    def keys(self, prefix: str = "") -> List[str]:
        if not prefix:
            return list(self._keys)
        start = bisect.bisect_left(self._keys, prefix)
        end = start
        while end < len(self._keys) and self._keys[end].startswith(prefix):
            end += 1
        return self._keys[start:end]

    def items(self, prefix: str = "") -> Iterator[Tuple[str, StateEntry]]:
        for key in self.keys(prefix):
            yield key, self._entries[key]

    def records(self, prefix: str) -> Iterator[Tuple[str, Any]]:
        for key, entry in self.items(prefix):
            yield key, decode(entry.value)

    def apply(self, writes: Iterable[KVWrite], version: Version) -> None:
        for write in writes:
            if write.value is None:
                if self._entries.pop(write.key, None) is not None:
                    del self._keys[bisect.bisect_left(self._keys, write.key)]
            else:
                if write.key not in self._entries:
                    bisect.insort(self._keys, write.key)
                self._entries[write.key] = StateEntry(
                    write.value, version, entry_digest(write.key, write.value, version)
                )

    def copy(self) -> "WorldState":
        clone = WorldState()
        clone._entries = dict(self._entries)
        clone._keys = list(self._keys)
        clone.height = self.height
        return clone

    def state_hash(self) -> bytes:
        return state_hash(self)


def state_hash(state: WorldState) -> bytes:
    """SHA-256 over per-entry digests in key order; the empty state hashes like b""."""
    entries = state._entries
    return digest(b"".join(entries[key].digest for key in state._keys))


def nonce_key(proposer: str) -> str:
    return f"nonce/{proposer}"


def apply_transaction(state: WorldState, envelope, height: int, index: int) -> None:
    """Apply one valid transaction's writes plus its proposer nonce at (height, index)."""
    version = Version(height, index)
    state.apply(envelope.rwset.writes, version)
    if envelope.payload.proposer != GENESIS_PROPOSER:
        state.apply([KVWrite(nonce_key(envelope.payload.proposer), encode(envelope.payload.nonce))], version)


def replay_state(blocks: Iterable, upto: Optional[int] = None) -> WorldState:
    """Rebuild world state from committed blocks, stopping after height ``upto``."""
    state = WorldState()
    for block in blocks:
        if upto is not None and block.height > upto:
            break
        for index, envelope in block.valid_transactions():
            apply_transaction(state, envelope, block.height, index)
        state.height = block.height
    return state

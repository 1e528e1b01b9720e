"""In-memory mirror of the preference and consent registries, fed by commit events."""

import logging
from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, Iterable, Mapping, Set, Tuple

from dndchain.core.errors import GapDetected
from dndchain.ledger.codec import decode
from dndchain.ledger.state import WorldState
from dndchain.ledger.types import Block
from dndchain.registries.categories import PreferenceMode, category_blocked
from dndchain.registries.consent import ConsentStatus

logger = logging.getLogger(__name__)

PREF_PREFIX = "pref/"
CONSENT_PREFIX = "consent/"


@dataclass(frozen=True)
class IndexEntry:
    mode: PreferenceMode
    blocked: Tuple[str, ...]
    operator: str

    @classmethod
    def from_record(cls, record: dict) -> "IndexEntry":
        return cls(PreferenceMode(record["mode"]), tuple(record["blocked"]), record["operator"])


@dataclass(frozen=True)
class IndexSnapshot:
    """Read-only view pinned at one height."""

    height: int
    pref: Mapping[str, IndexEntry]
    consent: Mapping[Tuple[str, str], str]


class MirrorIndex:
    def __init__(self):
        self.pref: Dict[str, IndexEntry] = {}
        self.consent: Dict[Tuple[str, str], str] = {}
        self.height = -1

    @classmethod
    def from_state(cls, state: WorldState) -> "MirrorIndex":
        """Full rescan of committed state."""
        index = cls()
        for key, entry in state.items(PREF_PREFIX):
            index.pref[key[len(PREF_PREFIX):]] = IndexEntry.from_record(decode(entry.value))
        for key, entry in state.items(CONSENT_PREFIX):
            index.consent[_consent_subject(key)] = decode(entry.value)["status"]
        index.height = state.height
        return index

    def snapshot(self) -> IndexSnapshot:
        return IndexSnapshot(self.height, MappingProxyType(dict(self.pref)), MappingProxyType(dict(self.consent)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MirrorIndex):
            return NotImplemented
        return (self.height, self.pref, self.consent) == (other.height, other.pref, other.consent)


def _consent_subject(key: str) -> Tuple[str, str]:
    hashed_key, header = key[len(CONSENT_PREFIX):].split("/", 1)
    return hashed_key, header


def mirror_apply(index: MirrorIndex, block: Block) -> MirrorIndex:
    """Apply one committed block. Re-applying an old block is a no-op."""
    if block.height <= index.height:
        return index
    if block.height != index.height + 1:
        raise GapDetected(f"index at {index.height} received block {block.height}")
    for _, envelope in block.valid_transactions():
        for write in envelope.rwset.writes:
            if write.key.startswith(PREF_PREFIX):
                hashed_key = write.key[len(PREF_PREFIX):]
                if write.value is None:
                    index.pref.pop(hashed_key, None)
                else:
                    index.pref[hashed_key] = IndexEntry.from_record(decode(write.value))
            elif write.key.startswith(CONSENT_PREFIX):
                subject = _consent_subject(write.key)
                if write.value is None:
                    index.consent.pop(subject, None)
                else:
                    index.consent[subject] = decode(write.value)["status"]
    index.height = block.height
    return index


def is_deliverable(
    hashed_key: str,
    header: str,
    category: str,
    index,
    consent_overrides_full_block: bool = True,
) -> bool:
    """Consent for the header, or an open mode with the category unblocked. No record is open."""
    entry = index.pref.get(hashed_key)
    if index.consent.get((hashed_key, header)) == ConsentStatus.GRANTED.value:
        if consent_overrides_full_block or entry is None or entry.mode != PreferenceMode.FULLY_BLOCKED:
            return True
    if entry is None:
        return True
    if entry.mode == PreferenceMode.FULLY_BLOCKED:
        return False
    return not category_blocked(category, entry.blocked)


def excluded_keys(index, header: str, category: str, consent_overrides_full_block: bool = True) -> Set[str]:
    """C: hashed keys a campaign for (header, category) must not reach."""
    blocked = {
        key
        for key, entry in index.pref.items()
        if entry.mode == PreferenceMode.FULLY_BLOCKED or category_blocked(category, entry.blocked)
    }
    consented = {
        key
        for (key, consent_header), status in index.consent.items()
        if consent_header == header and status == ConsentStatus.GRANTED.value
    }
    if not consent_overrides_full_block:
        consented = {k for k in consented if k not in index.pref or index.pref[k].mode != PreferenceMode.FULLY_BLOCKED}
    return blocked - consented


def partition(keys: Iterable[str], excluded: Set[str]) -> Tuple[Set[str], Set[str]]:
    """S = L - C and its complement within L."""
    keys = set(keys)
    return keys - excluded, keys & excluded

"""Ledger value types. All are frozen and carry their own canonical wire form."""

from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Any, Dict, List, Optional, Tuple

from dndchain.core.errors import CodecError
from dndchain.ledger.codec import decode, encode
from dndchain.membership.crypto import ZERO_DIGEST, digest

GENESIS_PROPOSER = "genesis"


class TxType(str, Enum):
    GENESIS = "Genesis"
    REGISTER_TELEMARKETER = "RegisterTelemarketer"
    REVOKE_IDENTITY = "RevokeIdentity"
    REGISTER_PRINCIPAL_ENTITY = "RegisterPrincipalEntity"
    REGISTER_HEADER = "RegisterHeader"
    DELEGATE_HEADER = "DelegateHeader"
    REGISTER_TEMPLATE = "RegisterTemplate"
    REGISTER_CONSENT_TEMPLATE = "RegisterConsentTemplate"
    UPDATE_PREFERENCE = "UpdatePreference"
    REQUEST_CONSENT = "RequestConsent"
    GRANT_CONSENT = "GrantConsent"
    REVOKE_CONSENT = "RevokeConsent"
    SCRUB_RESULT = "ScrubResult"
    CAMPAIGN_INIT = "CampaignInit"
    CAMPAIGN_STATUS = "CampaignStatus"
    COMPLAINT_FILED = "ComplaintFiled"
    DEGRADED_SERVICE = "DegradedService"


class TxValidationCode(IntEnum):
    VALID = 0
    UNKNOWN_IDENTITY = 1
    BAD_PROPOSER_SIGNATURE = 2
    ROLE_FORBIDDEN = 3
    STALE_NONCE = 4
    BAD_ENDORSEMENT = 5
    ENDORSEMENT_POLICY_FAILURE = 6
    MVCC_READ_CONFLICT = 7


@dataclass(frozen=True, order=True)
class Version:
    height: int
    tx_index: int

    def to_wire(self) -> List[int]:
        return [self.height, self.tx_index]

    @classmethod
    def from_wire(cls, wire: Optional[List[int]]) -> Optional["Version"]:
        return None if wire is None else cls(int(wire[0]), int(wire[1]))


@dataclass(frozen=True)
class TransactionPayload:
    tx_type: TxType
    args: bytes
    proposer: str
    nonce: int
    timestamp: int

    @classmethod
    def build(
        cls, tx_type: TxType, arguments: Dict[str, Any], proposer: str, nonce: int, timestamp: int
    ) -> "TransactionPayload":
        return cls(TxType(tx_type), encode(arguments), proposer, nonce, timestamp)

    def arguments(self) -> Dict[str, Any]:
        value = decode(self.args)
        if not isinstance(value, dict):
            raise CodecError("transaction arguments must be a mapping")
        return value

    def to_wire(self) -> list:
        return [self.tx_type.value, self.args, self.proposer, self.nonce, self.timestamp]

    @classmethod
    def from_wire(cls, wire: list) -> "TransactionPayload":
        tx_type, args, proposer, nonce, timestamp = wire
        return cls(TxType(tx_type), args, proposer, nonce, timestamp)

    def to_bytes(self) -> bytes:
        return encode(self.to_wire())

    def digest(self) -> bytes:
        return digest(self.to_bytes())

    @property
    def tx_id(self) -> str:
        return self.digest().hex()


@dataclass(frozen=True)
class Proposal:
    payload: TransactionPayload
    signature: bytes

    @property
    def tx_id(self) -> str:
        return self.payload.tx_id


@dataclass(frozen=True)
class KVRead:
    key: str
    version: Optional[Version]


@dataclass(frozen=True)
class KVWrite:
    key: str
    value: Optional[bytes]  # None deletes

    @property
    def is_delete(self) -> bool:
        return self.value is None


@dataclass(frozen=True)
class ReadWriteSet:
    reads: Tuple[KVRead, ...] = ()
    writes: Tuple[KVWrite, ...] = ()

    def __post_init__(self):
        for entries in (self.reads, self.writes):
            keys = [entry.key for entry in entries]
            if len(keys) != len(set(keys)):
                raise ValueError("read-write set keys must be unique")

    def to_wire(self) -> list:
        return [
            [[r.key, None if r.version is None else r.version.to_wire()] for r in self.reads],
            [[w.key, w.value] for w in self.writes],
        ]

    @classmethod
    def from_wire(cls, wire: list) -> "ReadWriteSet":
        reads, writes = wire
        return cls(
            tuple(KVRead(key, Version.from_wire(version)) for key, version in reads),
            tuple(KVWrite(key, value) for key, value in writes),
        )

    def to_bytes(self) -> bytes:
        return encode(self.to_wire())

    def digest(self) -> bytes:
        return digest(self.to_bytes())


def endorsement_message(payload_digest: bytes, rwset_digest: bytes) -> bytes:
    return payload_digest + rwset_digest


@dataclass(frozen=True)
class Endorsement:
    endorser: str
    rwset_digest: bytes
    signature: bytes

    def to_wire(self) -> list:
        return [self.endorser, self.rwset_digest, self.signature]

    @classmethod
    def from_wire(cls, wire: list) -> "Endorsement":
        return cls(*wire)


@dataclass(frozen=True)
class Envelope:
    """A proposal with its read-write set and endorsements, as ordered into blocks."""

    payload: TransactionPayload
    signature: bytes
    rwset: ReadWriteSet
    endorsements: Tuple[Endorsement, ...] = ()

    @property
    def tx_id(self) -> str:
        return self.payload.tx_id

    def to_wire(self) -> list:
        return [
            self.payload.to_wire(),
            self.signature,
            self.rwset.to_wire(),
            [e.to_wire() for e in self.endorsements],
        ]

    @classmethod
    def from_wire(cls, wire: list) -> "Envelope":
        payload, signature, rwset, endorsements = wire
        return cls(
            TransactionPayload.from_wire(payload),
            signature,
            ReadWriteSet.from_wire(rwset),
            tuple(Endorsement.from_wire(e) for e in endorsements),
        )


def compute_block_hash(height: int, prev_hash: bytes, transactions: Tuple[Envelope, ...]) -> bytes:
    return digest(encode([height, prev_hash, [tx.to_wire() for tx in transactions]]))


def compute_commit_hash(prev_commit_hash: bytes, block_hash: bytes, flags: Tuple[int, ...]) -> bytes:
    return digest(prev_commit_hash + block_hash + bytes(flags))


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    transactions: Tuple[Envelope, ...]
    block_hash: bytes
    validity_flags: Tuple[int, ...] = field(default=())
    commit_hash: bytes = b""

    @classmethod
    def cut(cls, height: int, prev_hash: bytes, transactions) -> "Block":
        transactions = tuple(transactions)
        return cls(height, prev_hash, transactions, compute_block_hash(height, prev_hash, transactions))

    @property
    def is_genesis(self) -> bool:
        return self.height == 0 and self.prev_hash == ZERO_DIGEST

    def expected_hash(self) -> bytes:
        return compute_block_hash(self.height, self.prev_hash, self.transactions)

    def uncommitted(self) -> "Block":
        return replace(self, validity_flags=(), commit_hash=b"")

    def valid_transactions(self) -> List[Tuple[int, Envelope]]:
        return [
            (index, tx)
            for index, (tx, flag) in enumerate(zip(self.transactions, self.validity_flags))
            if flag == TxValidationCode.VALID
        ]

    def to_wire(self) -> list:
        return [
            self.height,
            self.prev_hash,
            [tx.to_wire() for tx in self.transactions],
            self.block_hash,
            list(self.validity_flags),
            self.commit_hash,
        ]

    def to_bytes(self) -> bytes:
        return encode(self.to_wire())

    @classmethod
    def from_bytes(cls, data: bytes) -> "Block":
        try:
            height, prev_hash, txs, block_hash, flags, commit_hash = decode(data)
            if not isinstance(height, int) or not isinstance(flags, list):
                raise CodecError("malformed block header")
            if any(not isinstance(f, int) or not 0 <= f <= 255 for f in flags):
                raise CodecError("validity flags must be byte values")
            return cls(
                height,
                prev_hash,
                tuple(Envelope.from_wire(tx) for tx in txs),
                block_hash,
                tuple(flags),
                commit_hash,
            )
        except CodecError:
            raise
        except (TypeError, ValueError, KeyError, IndexError, AttributeError) as exc:
            raise CodecError(f"malformed block: {exc}") from exc

import logging
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple

from dndchain.core.config import ChainConfig
from dndchain.core.errors import (
    BadSignature,
    BrokenChain,
    RejectReason,
    StaleNonce,
    UnknownIdentity,
    ValidatorRejected,
)
from dndchain.ledger.contract import execute, load_contracts
from dndchain.ledger.policy import EndorsementPolicy, build_policies
from dndchain.ledger.state import (
    WorldState,
    apply_transaction,
    nonce_key,
    replay_state,
)
from dndchain.ledger.types import (
    Block,
    Endorsement,
    Envelope,
    Proposal,
    ReadWriteSet,
    TxType,
    TxValidationCode,
    compute_commit_hash,
    endorsement_message,
)
from dndchain.membership.contracts import POLICY_KEY, member_key
from dndchain.membership.crypto import ZERO_DIGEST, KeyPair, verify
from dndchain.membership.identity import ParticipantIdentity, may_propose

logger = logging.getLogger(__name__)

CommitListener = Callable[[Block], None]


@dataclass(frozen=True)
class CommitResult:
    block: Block
    state_hash: bytes

    @property
    def flags(self) -> Tuple[int, ...]:
        return self.block.validity_flags

    @property
    def valid_count(self) -> int:
        return sum(1 for f in self.flags if f == TxValidationCode.VALID)


class Peer:
    """One node's copy of the ledger: endorses proposals and validates and commits blocks."""

    def __init__(self, identity_id: str, keypair: KeyPair, config: ChainConfig, regulator: Any = None):
        load_contracts()
        self.identity_id = identity_id
        self.keypair = keypair
        self.config = config
        self.regulator = regulator
        self.state = WorldState()
        self.chain: List[Block] = []
        self._state_hashes: List[bytes] = []
        self._listeners: List[CommitListener] = []
        self._members: Optional[Dict[str, ParticipantIdentity]] = None
        self._policies: Optional[Dict[TxType, EndorsementPolicy]] = None

    @property
    def height(self) -> int:
        return self.state.height

    @property
    def tip_hash(self) -> bytes:
        return self.chain[-1].block_hash if self.chain else ZERO_DIGEST

    @property
    def commit_tip(self) -> bytes:
        return self.chain[-1].commit_hash if self.chain else ZERO_DIGEST

    def subscribe(self, listener: CommitListener) -> None:
        self._listeners.append(listener)

    # membership and policy views over committed state

    def member(self, participant_id: str) -> Optional[ParticipantIdentity]:
        return self._member_table().get(participant_id)

    def members(self) -> Dict[str, str]:
        """Live participant id -> role value."""
        return {pid: identity.role.value for pid, identity in self._member_table().items()}

    def _member_table(self) -> Dict[str, ParticipantIdentity]:
        if self._members is None:
            table = {}
            for key, entry in self.state.items("member/"):
                record = self.state.record(key)
                if not record.get("revoked"):
                    table[record["id"]] = ParticipantIdentity.from_record(record, entry.version.height)
            self._members = table
        return self._members

    def policy(self, tx_type: TxType) -> EndorsementPolicy:
        if self._policies is None:
            record = self.state.record(POLICY_KEY) or {}
            self._policies = build_policies(
                record.get("by_type", self.config.ledger.policies),
                record.get("default", self.config.ledger.default_policy),
            )
        return self._policies[TxType(tx_type)]

    def committed_nonce(self, proposer: str) -> int:
        value = self.state.record(nonce_key(proposer))
        return -1 if value is None else value

    def state_hash(self) -> bytes:
        return self._state_hashes[-1] if self._state_hashes else self.state.state_hash()

    def state_hash_at(self, height: int) -> Optional[bytes]:
        if 0 <= height < len(self._state_hashes):
            return self._state_hashes[height]
        return None

    def state_at(self, height: int) -> WorldState:
        if height >= self.height:
            return self.state.copy()
        return replay_state(self.chain, upto=height)

    def blocks_from(self, height: int) -> List[Block]:
        return list(self.chain[max(height, 0) :])

    # endorsement

    def check_proposal(self, proposal: Proposal) -> ParticipantIdentity:
        payload = proposal.payload
        proposer = self.member(payload.proposer)
        if proposer is None:
            raise UnknownIdentity(f"{payload.proposer} is not an admitted participant")
        if not verify(proposer.public_key, payload.digest(), proposal.signature):
            raise BadSignature(f"proposal signature from {payload.proposer} does not verify")
        if payload.tx_type == TxType.GENESIS or not may_propose(proposer.role, payload.tx_type):
            raise ValidatorRejected(
                RejectReason.ROLE_FORBIDDEN, f"{proposer.role.value} may not propose {payload.tx_type.value}"
            )
        if payload.nonce <= self.committed_nonce(payload.proposer):
            raise StaleNonce(f"nonce {payload.nonce} already used by {payload.proposer}")
        return proposer

    def endorse(self, proposal: Proposal) -> Tuple[Endorsement, ReadWriteSet]:
        """Simulate the proposal against committed state and sign the result."""
        self.check_proposal(proposal)
        rwset = execute(self.state, proposal.payload, self.config, self.state_hash_at, self.regulator)
        rwset_digest = rwset.digest()
        signature = self.keypair.sign(endorsement_message(proposal.payload.digest(), rwset_digest))
        return Endorsement(self.identity_id, rwset_digest, signature), rwset

    # commit

    def validate_and_commit(self, block: Block) -> CommitResult:
        if block.height != self.height + 1:
            raise BrokenChain(
                f"block {block.height} does not follow local height {self.height}", block.height
            )
        if block.prev_hash != self.tip_hash:
            raise BrokenChain(f"block {block.height} prev_hash does not match tip", block.height)
        if block.block_hash != block.expected_hash():
            raise BrokenChain(f"block {block.height} hash does not match contents", block.height)

        if block.height == 0:
            flags = self._validate_genesis(block)
        else:
            flags = []
            for index, envelope in enumerate(block.transactions):
                code = self._validate_envelope(envelope)
                if code == TxValidationCode.VALID:
                    self._apply(envelope, block.height, index)
                else:
                    logger.info(
                        f"{self.identity_id}: tx {envelope.tx_id[:12]} "
                        f"({envelope.payload.tx_type.value}) invalid at height {block.height}: {code.name}"
                    )
                flags.append(code)
        flags = tuple(int(f) for f in flags)
        if block.validity_flags and block.validity_flags != flags:
            logger.warning(f"{self.identity_id}: recomputed flags differ from received block {block.height}")

        self.state.height = block.height
        committed = replace(
            block,
            validity_flags=flags,
            commit_hash=compute_commit_hash(self.commit_tip, block.block_hash, flags),
        )
        self.chain.append(committed)
        state_hash = self.state.state_hash()
        self._state_hashes.append(state_hash)
        logger.debug(f"{self.identity_id}: committed block {block.height} ({len(flags)} txs)")
        for listener in self._listeners:
            listener(committed)
        return CommitResult(committed, state_hash)

    def catch_up(self, blocks: Iterable[Block]) -> int:
        """Re-validate and commit any blocks above the local height."""
        committed = 0
        for block in sorted(blocks, key=lambda b: b.height):
            if block.height <= self.height:
                continue
            self.validate_and_commit(block.uncommitted())
            committed += 1
        if committed:
            logger.info(f"{self.identity_id}: caught up {committed} blocks to height {self.height}")
        return committed

    def _apply(self, envelope: Envelope, height: int, index: int) -> None:
        apply_transaction(self.state, envelope, height, index)
        for write in envelope.rwset.writes:
            if write.key.startswith("member/"):
                self._members = None
            elif write.key == POLICY_KEY:
                self._policies = None

    def _validate_genesis(self, block: Block) -> List[int]:
        if block.prev_hash != ZERO_DIGEST or len(block.transactions) != 1:
            raise BrokenChain("genesis block must hold exactly one transaction", 0)
        envelope = block.transactions[0]
        if envelope.payload.tx_type != TxType.GENESIS:
            raise BrokenChain("first block is not a genesis block", 0)
        expected = execute(WorldState(), envelope.payload, self.config)
        if expected.digest() != envelope.rwset.digest():
            raise BrokenChain("genesis writes do not match its arguments", 0)
        self._apply(envelope, 0, 0)
        return [TxValidationCode.VALID]

    def _validate_envelope(self, envelope: Envelope) -> TxValidationCode:
        payload = envelope.payload
        proposer = self.member(payload.proposer)
        if proposer is None:
            return TxValidationCode.UNKNOWN_IDENTITY
        payload_digest = payload.digest()
        if not verify(proposer.public_key, payload_digest, envelope.signature):
            return TxValidationCode.BAD_PROPOSER_SIGNATURE
        if payload.tx_type == TxType.GENESIS or not may_propose(proposer.role, payload.tx_type):
            return TxValidationCode.ROLE_FORBIDDEN
        if payload.nonce <= self.committed_nonce(payload.proposer):
            return TxValidationCode.STALE_NONCE

        rwset_digest = envelope.rwset.digest()
        message = endorsement_message(payload_digest, rwset_digest)
        endorsers = set()
        for endorsement in envelope.endorsements:
            endorser = self.member(endorsement.endorser)
            if endorser is None:
                continue
            if endorsement.rwset_digest != rwset_digest or not verify(
                endorser.public_key, message, endorsement.signature
            ):
                return TxValidationCode.BAD_ENDORSEMENT
            endorsers.add(endorsement.endorser)
        if not self.policy(payload.tx_type).rule.evaluate(endorsers, self.members()):
            return TxValidationCode.ENDORSEMENT_POLICY_FAILURE

        for read in envelope.rwset.reads:
            if self.state.version(read.key) != read.version:
                return TxValidationCode.MVCC_READ_CONFLICT
        return TxValidationCode.VALID

"""Client side of the ledger: nonces, signing, endorsement collection and retries."""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Protocol, Tuple

from dndchain.core.errors import (
    BadSignature,
    DndChainError,
    EndorsementFailed,
    MismatchedReadWriteSets,
    NodeUnavailable,
    StaleNonce,
    UnknownIdentity,
    ValidatorRejected,
)
from dndchain.ledger.peer import Peer
from dndchain.ledger.policy import endorsement_order, evaluate_policy
from dndchain.ledger.types import (
    Block,
    Endorsement,
    Envelope,
    Proposal,
    ReadWriteSet,
    TransactionPayload,
    TxType,
    TxValidationCode,
)
from dndchain.membership.crypto import KeyPair

logger = logging.getLogger(__name__)


class Network(Protocol):
    @property
    def now(self) -> int: ...

    def call(self, source: str, target: str, method: str, *args: Any) -> Any: ...

    def order(self, envelope: Envelope) -> None: ...


@dataclass
class _InFlight:
    tx_type: TxType
    arguments: Dict[str, Any]
    attempt: int


class Gateway:
    def __init__(self, identity_id: str, keypair: KeyPair, peer: Peer, network: Network):
        self.identity_id = identity_id
        self.keypair = keypair
        self.peer = peer
        self.network = network
        self._next_nonce = 0
        self._last_proposed = -1
        self._in_flight: Dict[str, _InFlight] = {}
        self._retry_queue: List[Tuple[str, _InFlight]] = []
        self.outcomes: Dict[str, TxValidationCode] = {}
        self.retried: Dict[str, str] = {}
        peer.subscribe(self._on_commit)

    @property
    def max_retries(self) -> int:
        return self.peer.config.ledger.max_retries

    def next_payload(self, tx_type: TxType, arguments: Dict[str, Any]) -> TransactionPayload:
        nonce = max(self._next_nonce, self._last_proposed + 1, self.peer.committed_nonce(self.identity_id) + 1)
        self._next_nonce = nonce + 1
        return TransactionPayload.build(tx_type, arguments, self.identity_id, nonce, self.network.now)

    def propose_transaction(self, payload: TransactionPayload) -> Proposal:
        if payload.proposer != self.identity_id or self.peer.member(payload.proposer) is None:
            raise UnknownIdentity(f"{payload.proposer} is not an admitted participant")
        floor = max(self._last_proposed, self.peer.committed_nonce(payload.proposer))
        if payload.nonce <= floor:
            raise StaleNonce(f"nonce {payload.nonce} is not above {floor}")
        self._last_proposed = payload.nonce
        return Proposal(payload, self.keypair.sign(payload.digest()))

    def endorse_proposal(self, proposal: Proposal) -> Envelope:
        """Ask policy candidates in id order until one consistent group satisfies the policy."""
        tx_type = proposal.payload.tx_type
        policy = self.peer.policy(tx_type)
        members = self.peer.members()
        groups: Dict[bytes, Tuple[ReadWriteSet, List[Endorsement]]] = {}
        rejection: Optional[ValidatorRejected] = None
        for node_id in endorsement_order(policy, members):
            try:
                endorsement, rwset = self.network.call(self.identity_id, node_id, "endorse", proposal)
            except ValidatorRejected as exc:
                rejection = rejection or exc
                logger.info(f"{node_id} withheld endorsement of {tx_type.value}: {exc}")
                continue
            except (NodeUnavailable, StaleNonce, UnknownIdentity, BadSignature) as exc:
                logger.info(f"{node_id} could not endorse {tx_type.value}: {exc}")
                continue
            rwset_, endorsements = groups.setdefault(endorsement.rwset_digest, (rwset, []))
            endorsements.append(endorsement)
            if evaluate_policy(policy, endorsements, members):
                return Envelope(proposal.payload, proposal.signature, rwset_, tuple(endorsements))
        if rejection is not None:
            raise rejection
        if len(groups) > 1:
            raise MismatchedReadWriteSets(f"{tx_type.value}: endorsers returned divergent read-write sets")
        raise EndorsementFailed(f"{tx_type.value}: policy {policy.expression} not satisfied")

    def submit(self, tx_type: TxType, arguments: Dict[str, Any], attempt: int = 0) -> str:
        """Propose, endorse and hand to the orderer. Returns the transaction id."""
        proposal = self.propose_transaction(self.next_payload(tx_type, arguments))
        envelope = self.endorse_proposal(proposal)
        self.network.order(envelope)
        self._in_flight[envelope.tx_id] = _InFlight(TxType(tx_type), arguments, attempt)
        return envelope.tx_id

    def _on_commit(self, block: Block) -> None:
        for envelope, flag in zip(block.transactions, block.validity_flags):
            flight = self._in_flight.pop(envelope.tx_id, None)
            if flight is None:
                continue
            code = TxValidationCode(flag)
            self.outcomes[envelope.tx_id] = code
            if code == TxValidationCode.MVCC_READ_CONFLICT and flight.attempt < self.max_retries:
                self._retry_queue.append((envelope.tx_id, flight))

    def flush_retries(self) -> List[str]:
        """Re-propose transactions lost to read conflicts, with fresh nonces."""
        queue, self._retry_queue = self._retry_queue, []
        resubmitted = []
        for old_id, flight in queue:
            try:
                new_id = self.submit(flight.tx_type, flight.arguments, flight.attempt + 1)
            except DndChainError as exc:
                logger.info(f"{self.identity_id}: retry of {flight.tx_type.value} abandoned: {exc}")
                continue
            self.retried[old_id] = new_id
            resubmitted.append(new_id)
        return resubmitted

    def resolve(self, tx_id: str) -> str:
        while tx_id in self.retried:
            tx_id = self.retried[tx_id]
        return tx_id

    def outcome(self, tx_id: str) -> Optional[TxValidationCode]:
        """Final validation code, following retries; None while still pending."""
        final = self.resolve(tx_id)
        if final != tx_id or tx_id not in self.outcomes:
            return self.outcomes.get(final)
        code = self.outcomes[tx_id]
        if code == TxValidationCode.MVCC_READ_CONFLICT and any(tx_id == old for old, _ in self._retry_queue):
            return None
        return code

    @property
    def pending(self) -> int:
        return len(self._in_flight) + len(self._retry_queue)

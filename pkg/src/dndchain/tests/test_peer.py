from dataclasses import replace

import pytest

from dndchain.core.errors import BrokenChain, RejectReason, StaleNonce, UnknownIdentity, ValidatorRejected
from dndchain.ledger.types import Envelope, Proposal, ReadWriteSet, TransactionPayload, TxType, TxValidationCode
from dndchain.registries.categories import PreferenceMode
from dndchain.registries.preferences import lookup_preference, update_preference
from dndchain.registries.subscribers import subscriber_key


def flag_of(consortium, tx_id):
    for block in consortium.blocks:
        for envelope, flag in zip(block.transactions, block.validity_flags):
            if envelope.tx_id == tx_id:
                return TxValidationCode(flag)
    return None


@pytest.fixture
def key(config):
    return subscriber_key("9000000001", config.crypto.key_bytes)


class TestEndorsedCommit:
    def test_valid_transaction_reaches_every_peer(self, consortium, gw, key):
        tx_id = update_preference(gw("OP-A"), key, "OP-A", PreferenceMode.FULLY_BLOCKED)
        consortium.settle()
        assert flag_of(consortium, tx_id) == TxValidationCode.VALID
        assert gw("OP-A").outcome(tx_id) == TxValidationCode.VALID
        hashes = {node.peer.state_hash() for node in consortium.nodes.values()}
        assert len(hashes) == 1
        assert lookup_preference(consortium.node("OBS-1").peer.state, key).mode == PreferenceMode.FULLY_BLOCKED

    def test_validator_rejection_surfaces_reason(self, gw, key):
        """OP-A may not file a preference on behalf of OP-B"""
        with pytest.raises(ValidatorRejected) as info:
            update_preference(gw("OP-A"), key, "OP-B", PreferenceMode.FULLY_BLOCKED)
        assert info.value.reason == RejectReason.WRONG_OPERATOR

    def test_unknown_proposer_refused_by_gateway(self, gw):
        gateway = gw("OP-A")
        payload = TransactionPayload.build(TxType.UPDATE_PREFERENCE, {}, "GHOST", 5, 0)
        with pytest.raises(UnknownIdentity):
            gateway.propose_transaction(payload)

    def test_reused_nonce_refused_by_gateway(self, gw):
        gateway = gw("OP-A")
        payload = gateway.next_payload(TxType.UPDATE_PREFERENCE, {})
        gateway.propose_transaction(payload)
        with pytest.raises(StaleNonce):
            gateway.propose_transaction(payload)


class TestValidationFlags:
    def test_mvcc_conflict_is_retried(self, consortium, gw, key):
        """Two writes endorsed against the same version: the second conflicts, then succeeds on retry"""
        first = update_preference(gw("OP-A"), key, "OP-A", PreferenceMode.FULLY_BLOCKED)
        second = update_preference(gw("OP-A"), key, "OP-A", PreferenceMode.PARTIAL, [4])
        consortium.settle()
        assert flag_of(consortium, first) == TxValidationCode.VALID
        assert flag_of(consortium, second) == TxValidationCode.MVCC_READ_CONFLICT
        assert gw("OP-A").resolve(second) != second
        assert gw("OP-A").outcome(second) == TxValidationCode.VALID
        record = lookup_preference(consortium.node("OP-B").peer.state, key)
        assert record.mode == PreferenceMode.PARTIAL

    def test_replayed_envelope_is_stale(self, consortium, gw, key):
        gateway = gw("OP-A")
        payload = gateway.next_payload(
            TxType.UPDATE_PREFERENCE,
            {"hashed_key": key, "operator": "OP-A", "mode": "fully_blocked", "blocked": []},
        )
        envelope = gateway.endorse_proposal(gateway.propose_transaction(payload))
        consortium.network.order(envelope)
        consortium.network.order(envelope)
        consortium.settle()
        flags = list(consortium.blocks[-1].validity_flags)
        assert flags == [TxValidationCode.VALID, TxValidationCode.STALE_NONCE]

    def test_role_forbidden_without_endorsement(self, consortium, gw, key):
        """A telemarketer ordering a preference update directly is flagged, not applied"""
        gateway = gw("TM-1")
        payload = gateway.next_payload(
            TxType.UPDATE_PREFERENCE,
            {"hashed_key": key, "operator": "OP-A", "mode": "fully_blocked", "blocked": []},
        )
        proposal = Proposal(payload, gateway.keypair.sign(payload.digest()))
        consortium.network.order(Envelope(proposal.payload, proposal.signature, ReadWriteSet()))
        consortium.settle()
        assert flag_of(consortium, payload.tx_id) == TxValidationCode.ROLE_FORBIDDEN
        assert lookup_preference(consortium.node("OP-A").peer.state, key) is None

    def test_unknown_identity_and_bad_signature(self, consortium, gw):
        ghost = TransactionPayload.build(TxType.UPDATE_PREFERENCE, {}, "GHOST", 1, 0)
        consortium.network.order(Envelope(ghost, b"\x00" * 64, ReadWriteSet()))
        forged = TransactionPayload.build(TxType.UPDATE_PREFERENCE, {}, "OP-B", 1, 0)
        consortium.network.order(Envelope(forged, b"\x00" * 64, ReadWriteSet()))
        consortium.settle()
        assert flag_of(consortium, ghost.tx_id) == TxValidationCode.UNKNOWN_IDENTITY
        assert flag_of(consortium, forged.tx_id) == TxValidationCode.BAD_PROPOSER_SIGNATURE

    def test_missing_endorsements_fail_policy(self, consortium, gw, key):
        gateway = gw("OP-A")
        payload = gateway.next_payload(
            TxType.UPDATE_PREFERENCE,
            {"hashed_key": key, "operator": "OP-A", "mode": "fully_blocked", "blocked": []},
        )
        envelope = gateway.endorse_proposal(gateway.propose_transaction(payload))
        consortium.network.order(replace(envelope, endorsements=envelope.endorsements[:1]))
        consortium.settle()
        assert flag_of(consortium, payload.tx_id) == TxValidationCode.ENDORSEMENT_POLICY_FAILURE


class TestBlockAcceptance:
    def test_out_of_sequence_block(self, consortium):
        peer = consortium.node("OBS-1").peer
        genesis = consortium.blocks[0]
        with pytest.raises(BrokenChain):
            peer.validate_and_commit(genesis)

    def test_block_hash_must_match_contents(self, consortium, gw, key):
        update_preference(gw("OP-A"), key, "OP-A", PreferenceMode.FULLY_BLOCKED)
        consortium.end_tick(force=True)
        peer = consortium.node("OBS-1").peer
        block = peer.chain[-1]
        assert block.height == 1
        forged = replace(block.uncommitted(), height=2, prev_hash=peer.tip_hash)
        with pytest.raises(BrokenChain):
            peer.validate_and_commit(forged)

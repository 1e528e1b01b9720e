import pytest

from dndchain.core.errors import ConfigInvalid, RejectReason, UnknownIdentity, ValidatorRejected
from dndchain.harness.consortium import identity_keypair
from dndchain.membership.contracts import admit_participant, revoke_participant
from dndchain.membership.crypto import KeyPair
from dndchain.membership.identity import (
    ParticipantIdentity,
    RegulatorDb,
    Role,
    TelemarketerRegistration,
    load_genesis,
    may_propose,
    write_genesis,
)
from dndchain.ledger.types import TxType
from dndchain.registries.headers import entity_key, register_principal_entity


def registration_for(node, receipt="RCPT-1"):
    return TelemarketerRegistration.create(node.node_id, receipt, node.keypair)


class TestAdmission:
    def test_regulator_listed_telemarketer_joins(self, consortium, gw):
        newcomer = consortium.add_node("TM-NEW")
        admit_participant(gw("OP-A"), registration_for(newcomer))
        consortium.settle()
        for node_id in ("OP-B", "OBS-1", "TM-NEW"):
            member = consortium.node(node_id).peer.member("TM-NEW")
            assert member is not None and member.role == Role.TELEMARKETER
        register_principal_entity(newcomer.gateway, "Newcomer Ltd", "docs://newcomer", pe_id="PE-NEWCOMER")
        consortium.settle()
        assert consortium.node("OP-A").peer.state.record(entity_key("PE-NEWCOMER")) is not None

    def test_wrong_receipt(self, consortium, gw):
        newcomer = consortium.add_node("TM-NEW")
        with pytest.raises(ValidatorRejected) as info:
            admit_participant(gw("OP-A"), registration_for(newcomer, "RCPT-9"))
        assert info.value.reason == RejectReason.VERIFICATION_FAILED

    def test_forged_self_signature(self, consortium, gw):
        newcomer = consortium.add_node("TM-NEW")
        genuine = registration_for(newcomer)
        forged = TelemarketerRegistration(
            genuine.tm_id, genuine.payment_receipt, genuine.public_key, genuine.encryption_key, bytes(64)
        )
        with pytest.raises(ValidatorRejected) as info:
            admit_participant(gw("OP-A"), forged)
        assert info.value.reason == RejectReason.VERIFICATION_FAILED

    def test_reused_key(self, consortium, gw):
        """A listed id presenting an existing member's key is a duplicate"""
        stolen = identity_keypair(consortium.seed, "TM-1")
        with pytest.raises(ValidatorRejected) as info:
            admit_participant(gw("OP-A"), TelemarketerRegistration.create("TM-NEW", "RCPT-1", stolen))
        assert info.value.reason == RejectReason.DUPLICATE_IDENTITY

    def test_regulator_outage(self, consortium, gw, regulator):
        newcomer = consortium.add_node("TM-NEW")
        regulator.outage = True
        with pytest.raises(ValidatorRejected) as info:
            admit_participant(gw("OP-A"), registration_for(newcomer))
        assert info.value.reason == RejectReason.REGULATOR_DB_UNAVAILABLE

    def test_unadmitted_node_cannot_propose(self, consortium):
        newcomer = consortium.add_node("TM-NEW")
        with pytest.raises(UnknownIdentity):
            register_principal_entity(newcomer.gateway, "Early Bird", "docs://early")


class TestRevocation:
    def test_revoked_member_loses_rights(self, consortium, gw):
        revoke_participant(gw("OP-A"), "TM-2")
        consortium.settle()
        assert consortium.node("OP-B").peer.member("TM-2") is None
        with pytest.raises(UnknownIdentity):
            register_principal_entity(gw("TM-2"), "Gone Ltd", "docs://gone")

    def test_unknown_participant(self, gw):
        with pytest.raises(ValidatorRejected) as info:
            revoke_participant(gw("OP-A"), "TM-NOBODY")
        assert info.value.reason == RejectReason.UNKNOWN_PARTICIPANT


@pytest.mark.parametrize(
    "role, tx_type, allowed",
    [
        (Role.OPERATOR, TxType.UPDATE_PREFERENCE, True),
        (Role.TELEMARKETER, TxType.UPDATE_PREFERENCE, False),
        (Role.TELEMARKETER, TxType.CAMPAIGN_INIT, True),
        (Role.SCRUBBER, TxType.SCRUB_RESULT, True),
        (Role.SCRUBBER, TxType.CAMPAIGN_INIT, False),
        (Role.OBSERVER, TxType.DEGRADED_SERVICE, True),
        (Role.OPERATOR, TxType.GENESIS, False),
    ],
)
def test_propose_rights(role, tx_type, allowed):
    assert may_propose(role, tx_type) is allowed


class TestRegulatorDb:
    def test_from_csv(self, tmp_path):
        path = tmp_path / "regulator.csv"
        path.write_text("tm_id,receipt\nTM-GAMMA,RCPT-0003\n")
        db = RegulatorDb.from_csv(path)
        assert len(db) == 1
        assert db.verify("TM-GAMMA", "RCPT-0003")
        assert not db.verify("TM-GAMMA", "RCPT-0004")

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "regulator.csv"
        path.write_text("id,code\nA,B\n")
        with pytest.raises(ConfigInvalid):
            RegulatorDb.from_csv(path)


def test_genesis_file_round_trip(tmp_path):
    identities = [
        ParticipantIdentity.from_keypair("OP-A", Role.OPERATOR, KeyPair(bytes([1]) * 32), "VM"),
        ParticipantIdentity.from_keypair("SCRUB-1", Role.SCRUBBER, KeyPair(bytes([2]) * 32)),
    ]
    path = tmp_path / "genesis.yaml"
    write_genesis(path, identities)
    assert load_genesis(path) == identities


def test_bad_genesis_file(tmp_path):
    path = tmp_path / "genesis.yaml"
    path.write_text("identities:\n  - id: OP-A\n    role: emperor\n")
    with pytest.raises(ConfigInvalid):
        load_genesis(path)

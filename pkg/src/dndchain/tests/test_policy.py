import pytest

from dndchain.core.config import DEFAULT_POLICIES
from dndchain.core.errors import ConfigInvalid, MismatchedReadWriteSets
from dndchain.ledger.policy import (
    AllOf,
    AtLeast,
    EndorsementPolicy,
    Majority,
    Rule,
    build_policies,
    endorsement_order,
    evaluate_policy,
    parse_policy,
)
from dndchain.ledger.types import Endorsement, TxType

MEMBERS = {
    "OP-A": "operator",
    "OP-B": "operator",
    "SCRUB-1": "scrubber",
    "OBS-1": "observer",
    "TM-1": "telemarketer",
    "TM-2": "telemarketer",
}


def endorsements(*ids, rwset=b"\x01" * 32):
    return [Endorsement(i, rwset, b"") for i in ids]


def policy(expression, tx_type=TxType.UPDATE_PREFERENCE):
    return EndorsementPolicy(tx_type, parse_policy(expression), expression)


class TestParser:
    def test_simple_rules(self):
        assert parse_policy("MAJORITY") == Majority()
        assert parse_policy("majority()") == Majority()
        assert parse_policy("ALL(operator)") == AllOf("operator")
        assert parse_policy("ANY(role=observer)") == AtLeast(1, "observer")
        assert parse_policy("AT_LEAST(2, operator)") == AtLeast(2, "operator")

    def test_default_expressions_parse(self):
        for expression in DEFAULT_POLICIES.values():
            parse_policy(expression)

    @pytest.mark.parametrize(
        "expression",
        ["", "ALL", "ALL(operator", "AT_LEAST(x, operator)", "NONE(operator)", "MAJORITY MAJORITY", "AND(ALL(operator),)"],
    )
    def test_rejects_malformed(self, expression):
        with pytest.raises(ConfigInvalid):
            parse_policy(expression)


class TestEvaluation:
    def test_majority_needs_more_than_half(self):
        assert not evaluate_policy(policy("MAJORITY"), endorsements("OP-A", "OP-B", "SCRUB-1"), MEMBERS)
        assert evaluate_policy(policy("MAJORITY"), endorsements("OP-A", "OP-B", "SCRUB-1", "OBS-1"), MEMBERS)

    def test_registration_policy(self):
        """Headers need every telemarketer, an observer and an operator"""
        rule = policy(DEFAULT_POLICIES["RegisterHeader"], TxType.REGISTER_HEADER)
        assert evaluate_policy(rule, endorsements("TM-1", "TM-2", "OBS-1", "OP-B"), MEMBERS)
        assert not evaluate_policy(rule, endorsements("TM-1", "OBS-1", "OP-B"), MEMBERS)
        assert not evaluate_policy(rule, endorsements("TM-1", "TM-2", "OP-A", "OP-B"), MEMBERS)

    def test_or_and_identity(self):
        rule = policy("OR(ID(SCRUB-1), ALL(operator))")
        assert evaluate_policy(rule, endorsements("SCRUB-1"), MEMBERS)
        assert evaluate_policy(rule, endorsements("OP-A", "OP-B"), MEMBERS)
        assert not evaluate_policy(rule, endorsements("OP-A"), MEMBERS)

    def test_non_members_do_not_count(self):
        assert not evaluate_policy(policy("ANY(operator)"), endorsements("OP-Z"), MEMBERS)

    def test_disagreeing_rwsets(self):
        mixed = endorsements("OP-A") + endorsements("OP-B", rwset=b"\x02" * 32)
        with pytest.raises(MismatchedReadWriteSets):
            evaluate_policy(policy("ALL(operator)"), mixed, MEMBERS)


def test_endorsement_order_is_sorted_candidates():
    rule = policy("AND(ALL(telemarketer), ANY(observer))")
    assert list(endorsement_order(rule, MEMBERS)) == ["OBS-1", "TM-1", "TM-2"]


def test_build_policies_covers_every_type():
    policies = build_policies(DEFAULT_POLICIES, "MAJORITY")
    assert set(policies) == set(TxType)
    assert policies[TxType.CAMPAIGN_INIT].expression == "MAJORITY"
    assert policies[TxType.REGISTER_HEADER].expression == DEFAULT_POLICIES["RegisterHeader"]


def test_rule_is_abstract():
    with pytest.raises(TypeError):
        Rule()

    class HalfDone(Rule):
        def evaluate(self, endorsers, members):
            return True

    with pytest.raises(TypeError):
        HalfDone()
    assert Majority().evaluate({"OP-A"}, {"OP-A": "operator"})

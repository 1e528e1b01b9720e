"""End-to-end runs of the bundled scenarios."""

from pathlib import Path

import numpy as np
import pytest

from dndchain.campaign.campaigns import lookup_campaign
from dndchain.campaign.complaints import Verdict
from dndchain.campaign.trace import LEGACY_PREFIX, read_trace
from dndchain.core.config import ChainConfig
from dndchain.harness.reports import load_reports, read_verdicts
from dndchain.harness.scenario import load_scenario, parse_scenario
from dndchain.harness.simulator import Simulation, SubscriberBook, instantiate, run_scenario
from dndchain.ledger.chain import load_ledger, serialize_ledger, verify_chain
from dndchain.registries.categories import PreferenceMode
from dndchain.registries.preferences import lookup_preference
from dndchain.registries.subscribers import subscriber_key
from dndchain.registries.templates import TemplateKind, lookup_template, match_template

from .conftest import PROMO_TEXT

SCENARIOS = Path(__file__).parents[3] / "scenarios"


def scenario(name):
    return load_scenario(SCENARIOS / f"{name}.json")


@pytest.fixture(scope="module")
def honest():
    sim = Simulation(scenario("honest"))
    return sim, sim.run()


@pytest.fixture(scope="module")
def fault_run():
    return run_scenario(scenario("fault"))


class TestSubscriberBook:
    def test_numbers_follow_operator_prefixes(self):
        book = SubscriberBook.generate(30, ["OP-B", "OP-A", "OP-C"], seed=3, secret=b"k" * 32)
        assert len(book) == 30
        assert len(set(book.numbers)) == 30
        assert all(len(n) == 10 and n.isdigit() for n in book.numbers)
        for number, operator in zip(book.numbers, book.operators):
            assert book.prefix_table[number[:2]] == operator
        assert book.operators[:3] == ["OP-A", "OP-B", "OP-C"]

    def test_keys_are_hashed(self):
        secret = b"k" * 32
        book = SubscriberBook.generate(5, ["OP-A"], seed=3, secret=secret)
        assert book.keys == [subscriber_key(n, secret) for n in book.numbers]
        assert book.index[book.keys[4]] == 4

    def test_seeded(self):
        first = SubscriberBook.generate(20, ["OP-A", "OP-B"], seed=9, secret=b"k" * 32)
        again = SubscriberBook.generate(20, ["OP-A", "OP-B"], seed=9, secret=b"k" * 32)
        other = SubscriberBook.generate(20, ["OP-A", "OP-B"], seed=10, secret=b"k" * 32)
        assert first.numbers == again.numbers
        assert first.numbers != other.numbers


def test_instantiate_fills_every_slot():
    message = instantiate(PROMO_TEXT, np.random.default_rng(0))
    assert "<%" not in message
    assert match_template(PROMO_TEXT, message)


def test_empty_workload():
    quiet = parse_scenario(
        {
            "nodes": [
                {"id": "OP-A", "role": "operator"},
                {"id": "SCRUB-1", "role": "scrubber"},
                {"id": "OBS-1", "role": "observer"},
            ],
            "end_tick": 3,
        }
    )
    result = Simulation(quiet).run()
    assert len(result.blocks) == 1
    assert result.trace == []
    assert result.verdicts == []
    assert result.report.is_empty


class TestHonestRun:
    def test_chain_verifies(self, honest):
        _, result = honest
        assert verify_chain(result.blocks).ok

    def test_no_violations(self, honest):
        _, result = honest
        assert result.verdicts
        assert result.violations == []
        assert any(v.verdict == Verdict.UNREGISTERED_SENDER for v in result.verdicts)

    def test_no_raw_numbers_on_ledger(self, honest):
        sim, result = honest
        data = result.ledger_bytes
        for number in [*sim.book.numbers, "9812340000"]:
            assert number.encode() not in data

    def test_promotions_skip_blocked_subscribers(self, honest):
        sim, result = honest
        state = sim.consortium.node("OBS-1").peer.state
        consented = {sim.book.keys[i] for i in range(1, 6)}
        promotional = 0
        for row in result.trace:
            campaign = lookup_campaign(state, row.campaign_id)
            if campaign is None or lookup_template(state, campaign.template_id).kind != TemplateKind.PROMOTIONAL:
                continue
            promotional += 1
            preference = lookup_preference(state, row.hashed_key)
            if preference is not None and row.hashed_key not in consented:
                assert preference.mode != PreferenceMode.FULLY_BLOCKED
        assert promotional > 0


class TestFaultRun:
    def test_bypass_is_attributed(self, fault_run):
        assert fault_run.violations
        assert {v.operator for v in fault_run.violations} == {"OP-ROGUE"}

    def test_deterministic(self, fault_run):
        again = run_scenario(scenario("fault"))
        assert again.ledger_digest == fault_run.ledger_digest
        assert again.trace == fault_run.trace

    def test_seed_changes_run(self, fault_run):
        reseeded = scenario("fault").model_copy(update={"seed": 24})
        assert run_scenario(reseeded).ledger_digest != fault_run.ledger_digest

    def test_outputs_written(self, tmp_path, fault_run):
        result = run_scenario(scenario("fault"), tmp_path)
        assert serialize_ledger(load_ledger(tmp_path / "ledger.dump")) == fault_run.ledger_bytes
        assert read_trace(tmp_path / "trace.csv") == fault_run.trace
        verdicts = read_verdicts(tmp_path / "verdicts.csv")
        assert len(verdicts) == len(result.verdicts)
        assert (verdicts["verdict"] == "violation").sum() == len(result.violations)
        assert load_reports(tmp_path).equals(result.report)


def test_scrub_success_rate():
    result = run_scenario(scenario("scrub_rate"))
    scrub = result.report.scrub_success
    assert len(scrub) == 1
    assert (scrub["submitted"][0], scrub["delivered"][0]) == (10_000, 9_900)
    assert scrub["success_rate"][0] == 99.0


def test_enforcement_cuts_complaints():
    spec = scenario("enforcement")
    result = run_scenario(spec)
    frame = result.report.complaints_per_million
    busy = frame[(frame["messages"] > 0) & (frame["end_tick"] <= spec.end_tick)]
    before = busy[busy["end_tick"] < spec.enforcement_tick]
    after = busy[busy["start_tick"] >= spec.enforcement_tick]
    assert len(before) and len(after)
    assert before["rtm_complaints"].sum() > 0
    assert (after["rtm_per_million"] < before["rtm_per_million"].mean()).all()
    assert after[after["start_tick"] >= 120]["rtm_complaints"].sum() == 0
    # p2p volume and its complaints are flat per window
    assert busy["utm_per_million"].is_monotonic_increasing
    assert after["utm_per_million"].min() > before["utm_per_million"].max()
    assert result.violations
    assert all(v.campaign_id.startswith(LEGACY_PREFIX) for v in result.violations)


def test_config_overrides_scenario_parameters():
    config = ChainConfig.from_dict({"campaign": {"delivery_success_prob": 0.5}})
    result = run_scenario(scenario("scrub_rate"), config=config)
    assert result.report.scrub_success["success_rate"][0] < 99.0

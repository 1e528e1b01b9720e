import json
from pathlib import Path

import pytest

from dndchain.core.errors import ConfigInvalid
from dndchain.harness.scenario import (
    CampaignEvent,
    FaultKind,
    PreferenceEvent,
    load_scenario,
    parse_scenario,
    scenario_schema,
)
from dndchain.membership.identity import Role

SCENARIOS = Path(__file__).parents[3] / "scenarios"


def minimal(**extra):
    data = {
        "nodes": [
            {"id": "OP-A", "role": "operator"},
            {"id": "SCRUB-1", "role": "scrubber"},
            {"id": "OBS-1", "role": "observer"},
            {"id": "TM-1", "role": "telemarketer"},
        ],
        "subscribers": {"count": 10},
    }
    data.update(extra)
    return data


def test_minimal_defaults():
    scenario = parse_scenario(minimal())
    assert scenario.seed == 0
    assert scenario.end_tick == 48
    assert scenario.workload == []
    assert scenario.operators == ["OP-A"]
    assert scenario.node("TM-1").role == Role.TELEMARKETER
    assert scenario.node("TM-9") is None


def test_workload_is_discriminated():
    scenario = parse_scenario(
        minimal(
            workload=[
                {"tick": 2, "kind": "preference", "subscriber": 3, "mode": "fully_blocked"},
                {"tick": 5, "kind": "campaign", "tm": "TM-1", "header": "STABAN", "template": "offer", "category": "Banking"},
            ]
        )
    )
    preference, campaign = scenario.workload
    assert isinstance(preference, PreferenceEvent)
    assert isinstance(campaign, CampaignEvent)
    assert campaign.audience is None


@pytest.mark.parametrize(
    "change",
    [
        {"nodes": [{"id": "OP-A", "role": "operator"}, {"id": "OP-A", "role": "scrubber"}, {"id": "OBS-1", "role": "observer"}]},
        {"nodes": [{"id": "SCRUB-1", "role": "scrubber"}, {"id": "OBS-1", "role": "observer"}]},
        {"nodes": [{"id": "OP-A", "role": "operator"}, {"id": "OBS-1", "role": "observer"}]},
        {"nodes": [{"id": "OP-A", "role": "operator"}, {"id": "SCRUB-1", "role": "scrubber"}]},
        {"fault_injections": [{"node": "OP-Z", "kind": "crash", "start": 1, "end": 2}]},
        {"fault_injections": [{"node": "OP-A", "kind": "crash", "start": 5, "end": 2}]},
        {"workload": [{"tick": 1, "kind": "preference", "subscriber": 10, "mode": "fully_blocked"}]},
        {"workload": [{"tick": 1, "kind": "consent", "tm": "TM-1", "header": "H", "template": "t", "subscribers": [1, 12]}]},
        {"workload": [{"tick": 1, "kind": "teleport"}]},
        {"workload": [{"tick": -1, "kind": "complaint", "subscriber": 1, "sender": "VM-STABAN", "message": "m"}]},
        {"subscribers": {"count": 4, "fully_blocked": 3, "partially_blocked": 2}},
        {"workload": [{"tick": 1, "kind": "campaign", "tm": "TM-1", "header": "H", "template": "t", "category": 1, "complaint_rate": 1.5}]},
    ],
)
def test_invalid_scenarios(change):
    with pytest.raises(ConfigInvalid):
        parse_scenario(minimal(**change))


def test_fault_may_name_a_later_telemarketer():
    scenario = parse_scenario(
        minimal(
            workload=[{"tick": 0, "kind": "register_telemarketer", "tm_id": "TM-NEW", "receipt": "R", "sponsor": "OP-A"}],
            fault_injections=[{"node": "TM-NEW", "kind": "crash", "start": 4, "end": 6}],
        )
    )
    fault = scenario.fault_injections[0]
    assert fault.kind == FaultKind.CRASH
    assert fault.active(4) and fault.active(6) and not fault.active(7)


@pytest.mark.parametrize("name", ["honest", "fault", "scrub_rate", "enforcement", "demo"])
def test_bundled_scenarios_load(name):
    scenario = load_scenario(SCENARIOS / f"{name}.json")
    assert scenario.operators
    assert all(event.tick <= scenario.end_tick for event in scenario.workload)


def test_load_errors(tmp_path):
    with pytest.raises(ConfigInvalid):
        load_scenario(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{nodes: ")
    with pytest.raises(ConfigInvalid):
        load_scenario(broken)


def test_schema_is_json():
    schema = scenario_schema()
    assert "nodes" in schema["properties"]
    assert "workload" in schema["properties"]
    json.dumps(schema)

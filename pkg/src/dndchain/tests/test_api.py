import httpx
import numpy as np
import pytest
from fastapi.testclient import TestClient

from dndchain.api.app import create_app
from dndchain.harness.consortium import Consortium
from dndchain.harness.scenario import FaultKind, FaultSpec
from dndchain.registries.consent import grant_consent, request_consent
from dndchain.registries.subscribers import subscriber_key

from .conftest import NODES


@pytest.fixture
def client(consortium):
    return TestClient(create_app(consortium))


def advance(client):
    response = client.post("/ticks", json={"ticks": 1})
    assert response.status_code == 200
    return response.json()


def test_health(client):
    assert client.get("/health").json() == {"status": "healthy"}


def test_chain_head(client):
    head = client.get("/chain").json()
    assert head["height"] == 0
    assert len(head["tip"]) == 64
    assert set(head["members"]) >= {"OP-A", "OP-B", "SCRUB-1", "OBS-1"}


class TestPreferences:
    def test_register_and_lookup(self, client):
        response = client.post("/preferences", json={"number": "+91 90000 00001", "mode": "partial", "categories": [1]})
        assert response.status_code == 202
        assert response.json()["operator"] == "OP-A"
        head = advance(client)
        assert head["height"] >= 1
        found = client.post("/preferences/lookup", json={"number": "09000000001"}).json()
        assert found == {"operator": "OP-A", "mode": "partial", "blocked": ["Banking"]}

    def test_routed_by_prefix(self, client):
        response = client.post("/preferences", json={"number": "9100000001", "mode": "fully_blocked"})
        assert response.json()["operator"] == "OP-B"

    def test_unknown_number(self, client):
        assert client.post("/preferences/lookup", json={"number": "9000000077"}).status_code == 404

    def test_malformed_number(self, client):
        response = client.post("/preferences", json={"number": "12-34", "mode": "fully_blocked"})
        assert response.status_code == 422
        assert response.json()["error"] == "MalformedNumber"

    def test_rejected_by_endorsers(self, client):
        response = client.post("/preferences", json={"number": "9000000001", "mode": "partial", "categories": [99]})
        assert response.status_code == 409
        assert response.json()["error"] == "ValidatorRejected"

    def test_operator_down(self, config, tmp_path):
        crash = FaultSpec(node="OP-B", kind=FaultKind.CRASH, start=0, end=10)
        consortium = Consortium(config, NODES, seed=7, faults=[crash], store_root=str(tmp_path / "store"))
        client = TestClient(create_app(consortium))
        response = client.post("/preferences", json={"number": "9100000001", "mode": "fully_blocked"})
        assert response.status_code == 503


def test_consent_lookup_and_revoke(client, consortium, gw, staban, config):
    key = subscriber_key("9000000003", config.crypto.key_bytes)
    _, code = request_consent(gw("TM-1"), "STABAN", key, staban["consent"], np.random.default_rng(2))
    consortium.settle()
    grant_consent(gw("TM-1"), key, "STABAN", code)
    consortium.settle()

    consents = client.post("/consents/lookup", json={"number": "9000000003"}).json()
    assert [(c["header"], c["status"]) for c in consents] == [("STABAN", "granted")]
    response = client.post("/consents/revoke", json={"number": "9000000003", "header": "STABAN"})
    assert response.status_code == 202
    advance(client)
    consents = client.post("/consents/lookup", json={"number": "9000000003"}).json()
    assert consents[0]["status"] == "revoked"
    assert [entry[0] for entry in consents[0]["history"]] == ["requested", "granted", "revoked"]
    assert client.post("/consents/revoke", json={"number": "9000000003", "header": "HRBFIN"}).status_code == 404


class TestComplaints:
    def test_file_and_read_back(self, client):
        response = client.post(
            "/complaints", json={"number": "9000000002", "sender": "VM-GHOSTS", "message": "Win a prize"}
        )
        assert response.status_code == 202
        complaint_id = response.json()["complaint_id"]
        advance(client)
        complaint = client.get(f"/complaints/{complaint_id}").json()
        assert complaint["class"] == "UTM"
        assert complaint["sender_kind"] == "header"
        verdicts = client.get("/verdicts").json()
        assert [(v["complaint_id"], v["verdict"]) for v in verdicts] == [(complaint_id, "unregistered_sender")]
        assert client.get("/verdicts", params={"only_violations": True}).json() == []

    def test_malformed_sender(self, client):
        response = client.post("/complaints", json={"number": "9000000002", "sender": "AB-CD", "message": "x"})
        assert response.status_code == 422
        assert response.json()["error"] == "MalformedSender"

    def test_unknown_complaint(self, client):
        assert client.get("/complaints/cmp-missing").status_code == 404


@pytest.mark.asyncio
async def test_async_client(consortium):
    transport = httpx.ASGITransport(app=create_app(consortium))
    async with httpx.AsyncClient(transport=transport, base_url="http://dndchain") as client:
        response = await client.post("/preferences", json={"number": "9000000004", "mode": "fully_blocked"})
        assert response.status_code == 202
        await client.post("/ticks", json={"ticks": 2})
        found = await client.post("/preferences/lookup", json={"number": "9000000004"})
        assert found.json()["mode"] == "fully_blocked"

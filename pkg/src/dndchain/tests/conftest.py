import pytest

from dndchain.campaign.campaigns import submit_campaign
from dndchain.core.config import ChainConfig
from dndchain.harness.consortium import Consortium
from dndchain.harness.scenario import NodeSpec
from dndchain.membership.identity import RegulatorDb, Role
from dndchain.registries.categories import PreferenceMode
from dndchain.registries.headers import delegate_header, register_header, register_principal_entity
from dndchain.registries.preferences import update_preference
from dndchain.registries.subscribers import subscriber_key
from dndchain.registries.templates import TemplateKind, register_template
from dndchain.scrubbing.service import ScrubRequest

NODES = [
    NodeSpec(id="OP-A", role=Role.OPERATOR, region="VM"),
    NodeSpec(id="OP-B", role=Role.OPERATOR, region="AD"),
    NodeSpec(id="SCRUB-1", role=Role.SCRUBBER),
    NodeSpec(id="OBS-1", role=Role.OBSERVER),
    NodeSpec(id="TM-1", role=Role.TELEMARKETER),
    NodeSpec(id="TM-2", role=Role.TELEMARKETER),
]

PROMO_TEXT = "Dear customer, a <%offer%> is waiting on your card ending <%card%>. Reply STOP to opt out"
PROMO_MESSAGE = "Dear customer, a cashback offer is waiting on your card ending 4321. Reply STOP to opt out"
TXN_TEXT = "Your one time password is <%code%>. Do not share it"
CONSENT_TEXT = "STABAN would like to send you up to 2 messages per week. Share OTP <%code%> to agree"


def make_numbers(count: int, prefix: str = "90", start: int = 0):
    """10-digit national numbers under ``prefix``."""
    width = 10 - len(prefix)
    return [f"{prefix}{i:0{width}d}" for i in range(start, start + count)]


def make_config(**sections) -> ChainConfig:
    overrides = {
        "scrub": {"min_batch_size": 5, "prefix_table": {"90": "OP-A", "91": "OP-B"}, "default_operator": "OP-A"},
        "ledger": {"batch_timeout": 1},
    }
    for name, values in sections.items():
        overrides[name] = {**overrides.get(name, {}), **values}
    return ChainConfig.from_dict(overrides)


@pytest.fixture
def config():
    return make_config()


@pytest.fixture
def regulator():
    return RegulatorDb([("TM-NEW", "RCPT-1"), ("TM-LATE", "RCPT-2")])


@pytest.fixture
def consortium(config, regulator, tmp_path):
    return Consortium(config, NODES, seed=7, regulator=regulator, store_root=str(tmp_path / "store"))


@pytest.fixture
def gw(consortium):
    """Gateway of a node by id."""
    return lambda node_id: consortium.node(node_id).gateway


def register_staban(consortium):
    """STABAN registered to TM-1 with a promotional, a transactional and a consent template."""
    tm = consortium.node("TM-1").gateway
    register_principal_entity(tm, "State Bank", "docs://state-bank", pe_id="PE-STATEBANK")
    consortium.settle()
    register_header(tm, "PE-STATEBANK", "STABAN")
    consortium.settle()
    delegate_header(tm, "PE-STATEBANK", "STABAN", "TM-1")
    consortium.settle()
    promo, _ = register_template(tm, "STABAN", PROMO_TEXT, TemplateKind.PROMOTIONAL)
    txn, _ = register_template(tm, "STABAN", TXN_TEXT, TemplateKind.TRANSACTIONAL)
    consent, _ = register_template(tm, "STABAN", CONSENT_TEXT, TemplateKind.CONSENT)
    consortium.settle()
    return {"header": "STABAN", "pe_id": "PE-STATEBANK", "promo": promo, "txn": txn, "consent": consent}


@pytest.fixture
def staban(consortium):
    return register_staban(consortium)


CAMPAIGN_NUMBERS = make_numbers(6, "90") + make_numbers(2, "91", start=6)


@pytest.fixture
def delivered_campaign(consortium, gw, staban, config):
    """A promotional STABAN campaign scrubbed against three opt-outs and delivered by both operators.

    Keys 0 and 1 (OP-A) and 6 (OP-B) are excluded; the other five numbers receive the message.
    """
    keys = [subscriber_key(n, config.crypto.key_bytes) for n in CAMPAIGN_NUMBERS]
    update_preference(gw("OP-A"), keys[0], "OP-A", PreferenceMode.FULLY_BLOCKED)
    update_preference(gw("OP-A"), keys[1], "OP-A", PreferenceMode.PARTIAL, ["Banking"])
    update_preference(gw("OP-B"), keys[6], "OP-B", PreferenceMode.FULLY_BLOCKED)
    consortium.settle()
    request = ScrubRequest("TM-1", "STABAN", staban["promo"], "Banking", tuple(CAMPAIGN_NUMBERS))
    token = consortium.network.call("TM-1", "SCRUB-1", "scrub", request)
    consortium.settle()
    campaign_id, _ = submit_campaign(gw("TM-1"), token, "STABAN", staban["promo"])
    consortium.settle()
    for operator in ("OP-A", "OP-B"):
        consortium.network.call("TM-1", operator, "deliver", campaign_id, PROMO_MESSAGE)
    consortium.settle()
    return {"campaign_id": campaign_id, "token": token, "keys": keys}

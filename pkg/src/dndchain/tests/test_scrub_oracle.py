"""Scrubbing checked end to end against a truth table of the deliverability rule.

The rule, written out independently of the mirror index:

    consent granted for the header      -> deliverable
    no preference record                -> deliverable
    fully_blocked                       -> not deliverable
    fully_open                          -> deliverable
    partial                             -> deliverable unless the campaign category
                                           equals a blocked path or lies below one
"""

import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from dndchain.harness.consortium import Consortium
from dndchain.registries.categories import PreferenceMode
from dndchain.registries.consent import grant_consent, request_consent, revoke_consent
from dndchain.registries.preferences import update_preference
from dndchain.registries.subscribers import subscriber_key
from dndchain.scrubbing.mirror import MirrorIndex, is_deliverable
from dndchain.scrubbing.service import ScrubRequest
from dndchain.scrubbing.verify import verify_scrub_token

from .conftest import NODES, make_config, make_numbers, register_staban

HEADER = "STABAN"
PATHS = ["Banking", "RealEstate", "Education", "Health", "ConsumerGoods", "Communication", "Tourism"]
SUB_PATHS = ["Health/Pharmacy", "Banking/Cards", "Tourism/Cruises"]
CAMPAIGN_CATEGORIES = PATHS + SUB_PATHS


def truth_table(pref, consent, category):
    if consent == "granted":
        return True
    if pref is None:
        return True
    mode, blocked = pref
    if mode == "fully_blocked":
        return False
    if mode == "fully_open":
        return True
    return not any(category == path or category.startswith(path + "/") for path in blocked)


def owner_of(number):
    return "OP-A" if number.startswith("90") else "OP-B"


def random_preference(rng):
    mode = rng.choice(["none", "fully_open", "fully_blocked", "partial"])
    if mode == "none":
        return None
    if mode != "partial":
        return mode, ()
    count = int(rng.integers(1, 4))
    return mode, tuple(sorted(set(rng.choice(PATHS + SUB_PATHS, size=count).tolist())))


def apply_consents(consortium, keys, statuses, template_id, rng):
    tm = consortium.node("TM-1").gateway
    codes = {}
    for key, status in zip(keys, statuses):
        if status != "none":
            _, codes[key] = request_consent(tm, HEADER, key, template_id, rng)
    consortium.settle()
    for key, status in zip(keys, statuses):
        if status in ("granted", "revoked"):
            grant_consent(tm, key, HEADER, codes[key])
    consortium.settle()
    for key, status in zip(keys, statuses):
        if status == "revoked":
            revoke_consent(tm, key, HEADER)
    consortium.settle()


@pytest.mark.parametrize("seed", range(8))
def test_scrub_matches_truth_table(consortium, staban, config, seed):
    rng = np.random.default_rng(seed)
    numbers = make_numbers(14, "90") + make_numbers(10, "91", start=14)
    keys = [subscriber_key(n, config.crypto.key_bytes) for n in numbers]

    prefs = [random_preference(rng) for _ in numbers]
    for number, key, pref in zip(numbers, keys, prefs):
        if pref is not None:
            owner = owner_of(number)
            update_preference(consortium.node(owner).gateway, key, owner, pref[0], list(pref[1]))
    consortium.settle()
    # a second round of updates for some numbers; the later one must win
    for i in rng.choice(len(numbers), size=6, replace=False):
        pref = random_preference(rng)
        if pref is not None:
            owner = owner_of(numbers[i])
            update_preference(consortium.node(owner).gateway, keys[i], owner, pref[0], list(pref[1]))
            prefs[i] = pref
    consortium.settle()
    statuses = rng.choice(["none", "requested", "granted", "revoked"], size=len(numbers)).tolist()
    apply_consents(consortium, keys, statuses, staban["consent"], np.random.default_rng(seed + 100))

    category = str(rng.choice(CAMPAIGN_CATEGORIES))
    request = ScrubRequest("TM-1", HEADER, staban["promo"], category, tuple(numbers))
    token = consortium.network.call("TM-1", "SCRUB-1", "scrub", request)
    consortium.settle()

    delivered = set()
    for operator in token.operators:
        node = consortium.node(operator)
        delivered |= set(verify_scrub_token(operator, token, node.peer.state, node.keypair, consortium.store).numbers)
    expected = {
        "91" + number
        for number, pref, status in zip(numbers, prefs, statuses)
        if truth_table(pref, status, category)
    }
    assert delivered == expected
    assert token.counts == (len(numbers), len(expected), len(numbers) - len(expected))


@pytest.fixture(scope="module")
def shared(tmp_path_factory):
    """One consortium reused across generated examples; each example takes fresh numbers."""
    config = make_config()
    consortium = Consortium(config, NODES, seed=11, store_root=str(tmp_path_factory.mktemp("store")))
    return consortium, register_staban(consortium), itertools.count(500)


preference_events = st.tuples(
    st.just("pref"),
    st.sampled_from(list(PreferenceMode)),
    st.lists(st.sampled_from(PATHS + SUB_PATHS), max_size=3, unique=True),
)
consent_events = st.tuples(st.just("consent"), st.sampled_from(["request", "grant", "revoke"]), st.just([]))
histories = st.lists(st.tuples(st.integers(0, 1), st.one_of(preference_events, consent_events)), min_size=1, max_size=10)


@settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(histories, st.sampled_from(CAMPAIGN_CATEGORIES))
def test_latest_event_wins(shared, history, category):
    consortium, staban, numbers = shared
    secret = consortium.config.crypto.key_bytes
    subjects = make_numbers(2, "90", start=next(numbers) * 2)
    keys = [subscriber_key(n, secret) for n in subjects]
    prefs = [None, None]
    consents = ["none", "none"]
    codes = {}
    rng = np.random.default_rng(len(history))
    operator = consortium.node("OP-A").gateway
    tm = consortium.node("TM-1").gateway

    for who, (kind, action, blocked) in history:
        key = keys[who]
        if kind == "pref":
            update_preference(operator, key, "OP-A", action, blocked)
            prefs[who] = (action.value, tuple(blocked) if action == PreferenceMode.PARTIAL else ())
        elif action == "request" and consents[who] in ("none", "requested"):
            _, codes[who] = request_consent(tm, HEADER, key, staban["consent"], rng)
            consents[who] = "requested"
        elif action == "grant" and consents[who] == "requested":
            grant_consent(tm, key, HEADER, codes[who])
            consents[who] = "granted"
        elif action == "revoke" and consents[who] in ("requested", "granted"):
            revoke_consent(tm, key, HEADER)
            consents[who] = "revoked"
        else:
            continue
        consortium.settle()

    index = consortium.node("SCRUB-1").scrubbing.index
    assert index == MirrorIndex.from_state(consortium.node("SCRUB-1").peer.state)
    for key, pref, consent in zip(keys, prefs, consents):
        assert is_deliverable(key, HEADER, category, index) == truth_table(pref, consent, category)

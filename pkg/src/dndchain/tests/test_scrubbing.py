from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dndchain.core.errors import BatchTooSmall, GapDetected, IoFailure, RejectReason, StaleIndex, TokenNotOnChain, ValidatorRejected
from dndchain.ledger.types import TxType
from dndchain.registries.categories import ALL_CATEGORY_PATHS, PreferenceMode
from dndchain.registries.consent import ConsentStatus, grant_consent, request_consent
from dndchain.registries.preferences import update_preference
from dndchain.registries.subscribers import subscriber_key
from dndchain.scrubbing.files import FileStore, parse_number_file, render_number_file
from dndchain.scrubbing.mirror import IndexEntry, MirrorIndex, excluded_keys, is_deliverable, mirror_apply, partition
from dndchain.scrubbing.service import UNRESOLVED, ScrubRequest, scrub
from dndchain.scrubbing.verify import verify_scrub_token

from .conftest import make_numbers

HEADER = "STABAN"
KEYS = [f"{i:064x}" for i in range(12)]

entries = st.builds(
    IndexEntry,
    mode=st.sampled_from(list(PreferenceMode)),
    blocked=st.lists(st.sampled_from(ALL_CATEGORY_PATHS), max_size=3, unique=True).map(tuple),
    operator=st.just("OP-A"),
)
indexes = st.tuples(
    st.dictionaries(st.sampled_from(KEYS), entries),
    st.dictionaries(
        st.tuples(st.sampled_from(KEYS), st.sampled_from([HEADER, "HRBFIN"])),
        st.sampled_from([s.value for s in ConsentStatus]),
    ),
)


def build_index(pref, consent):
    index = MirrorIndex()
    index.pref.update(pref)
    index.consent.update(consent)
    return index


@settings(max_examples=200)
@given(indexes, st.sampled_from(ALL_CATEGORY_PATHS), st.booleans())
def test_partition_agrees_with_per_key_rule(parts, category, overrides):
    """S = L - C matches the deliverability rule applied one number at a time"""
    index = build_index(*parts)
    deliverable, blocked = partition(KEYS, excluded_keys(index, HEADER, category, overrides))
    assert deliverable | blocked == set(KEYS)
    assert not deliverable & blocked
    for key in KEYS:
        assert (key in deliverable) == is_deliverable(key, HEADER, category, index, overrides)


def test_consent_for_another_header_does_not_help():
    index = build_index(
        {KEYS[0]: IndexEntry(PreferenceMode.FULLY_BLOCKED, ALL_CATEGORY_PATHS, "OP-A")},
        {(KEYS[0], "HRBFIN"): ConsentStatus.GRANTED.value},
    )
    assert not is_deliverable(KEYS[0], HEADER, "Banking", index)
    assert is_deliverable(KEYS[0], "HRBFIN", "Banking", index)
    assert not is_deliverable(KEYS[0], "HRBFIN", "Banking", index, consent_overrides_full_block=False)


def test_unknown_numbers_are_open():
    assert is_deliverable(KEYS[5], HEADER, "Health", MirrorIndex())


def test_number_file_format():
    data = render_number_file(["919000000002", "919000000001", "919000000002"])
    assert data == b"919000000001\n919000000002\n"
    assert parse_number_file(data) == ["919000000001", "919000000002"]


def test_file_store_addresses_by_content(tmp_path):
    store = FileStore(tmp_path)
    locator = store.put("SCRUB-1", b"blob")
    assert locator.startswith("scrub://SCRUB-1/")
    assert FileStore(tmp_path).get(locator) == b"blob"
    with pytest.raises(IoFailure):
        store.get("scrub://SCRUB-1/missing")


NUMBERS = make_numbers(6, "90") + make_numbers(2, "91", start=6)


@pytest.fixture
def registry(consortium, gw, staban, config):
    """Preferences and one consent over NUMBERS; returns their hashed keys"""
    keys = [subscriber_key(n, config.crypto.key_bytes) for n in NUMBERS]
    update_preference(gw("OP-A"), keys[0], "OP-A", PreferenceMode.FULLY_BLOCKED)
    update_preference(gw("OP-A"), keys[1], "OP-A", PreferenceMode.PARTIAL, ["Banking"])
    update_preference(gw("OP-A"), keys[2], "OP-A", PreferenceMode.PARTIAL, ["Health"])
    update_preference(gw("OP-B"), keys[6], "OP-B", PreferenceMode.FULLY_BLOCKED)
    _, code = request_consent(gw("TM-1"), HEADER, keys[0], staban["consent"], np.random.default_rng(0))
    consortium.settle()
    grant_consent(gw("TM-1"), keys[0], HEADER, code)
    consortium.settle()
    return keys


def request_for(staban, numbers, template="promo", category="Banking"):
    return ScrubRequest("TM-1", HEADER, staban[template], category, tuple(numbers))


class TestScrubService:
    def test_campaign_scrub(self, consortium, staban, registry):
        token = consortium.network.call("TM-1", "SCRUB-1", "scrub", request_for(staban, [*NUMBERS, "12345"]))
        consortium.settle()
        assert token.counts == (9, 6, 3)
        assert token.operators == ["OP-A", "OP-B"]
        assert {leg.operator for leg in token.invalid_files} == {"OP-A", "OP-B", UNRESOLVED}
        assert token.leg("OP-A").lines == 5 and token.leg("OP-B").lines == 1

        operator = consortium.node("OP-A")
        verified = verify_scrub_token("OP-A", token, operator.peer.state, operator.keypair, consortium.store)
        expected = sorted("91" + n for i, n in enumerate(NUMBERS[:6]) if i != 1)
        assert list(verified.numbers) == expected
        assert verified.discrepancies == ()

    def test_transactional_scrub_excludes_nothing(self, consortium, staban, registry):
        token = consortium.network.call("TM-1", "SCRUB-1", "scrub", request_for(staban, NUMBERS, "txn"))
        assert token.counts == (8, 8, 0)

    def test_rescrub_reports_later_opt_out(self, consortium, gw, staban, registry, config):
        token = consortium.network.call("TM-1", "SCRUB-1", "scrub", request_for(staban, NUMBERS))
        consortium.settle()
        update_preference(gw("OP-A"), registry[3], "OP-A", PreferenceMode.FULLY_BLOCKED)
        consortium.settle()
        operator = consortium.node("OP-A")
        verified = verify_scrub_token(
            "OP-A",
            token,
            operator.peer.state,
            operator.keypair,
            consortium.store,
            rescrub_index=MirrorIndex.from_state(operator.peer.state),
            config=config,
        )
        assert verified.discrepancies == (registry[3],)

    def test_token_must_be_committed(self, consortium, staban, registry):
        token = consortium.network.call("TM-1", "SCRUB-1", "scrub", request_for(staban, NUMBERS))
        operator = consortium.node("OP-A")
        with pytest.raises(TokenNotOnChain):
            verify_scrub_token("OP-A", token, operator.peer.state, operator.keypair, consortium.store)

    def test_small_batch(self, consortium, staban):
        with pytest.raises(BatchTooSmall):
            consortium.network.call("TM-1", "SCRUB-1", "scrub", request_for(staban, NUMBERS[:3]))

    @pytest.mark.parametrize(
        "numbers",
        [
            [NUMBERS[0]] * 5,
            [NUMBERS[0], "+91 " + NUMBERS[0], "0" + NUMBERS[0], "91" + NUMBERS[0], NUMBERS[0]],
            [NUMBERS[0], NUMBERS[1], "12-34", "x", "1"],
        ],
        ids=["repeats", "same-number-other-formats", "padded-with-junk"],
    )
    def test_one_subscriber_cannot_fill_a_batch(self, consortium, staban, registry, numbers):
        with pytest.raises(BatchTooSmall):
            consortium.network.call("TM-1", "SCRUB-1", "scrub", request_for(staban, numbers))
        consortium.settle()
        assert consortium.node("SCRUB-1").scrubbing.tokens == {}

    def test_counts_are_distinct_entries(self, consortium, staban, registry):
        padded = [*NUMBERS, *("+91 " + n for n in NUMBERS), "12345", "12345"]
        token = consortium.network.call("TM-1", "SCRUB-1", "scrub", request_for(staban, padded))
        consortium.settle()
        assert token.counts == (9, 6, 3)
        assert token.counts[0] == token.counts[1] + token.counts[2]

    def test_stale_index(self, consortium, staban, config):
        scrubber = consortium.node("SCRUB-1")
        with pytest.raises(StaleIndex):
            scrub(
                request_for(staban, NUMBERS),
                MirrorIndex(),
                scrubber.peer.state,
                scrubber_id="SCRUB-1",
                keypair=scrubber.keypair,
                store=consortium.store,
                config=config,
                rng=np.random.default_rng(0),
            )

    def test_undelegated_telemarketer(self, consortium, staban):
        request = replace(request_for(staban, NUMBERS), tm_id="TM-2")
        with pytest.raises(ValidatorRejected) as info:
            consortium.network.call("TM-2", "SCRUB-1", "scrub", request)
        assert info.value.reason == RejectReason.NOT_DELEGATED

    def test_mirror_tracks_chain(self, consortium, registry):
        scrubber = consortium.node("SCRUB-1")
        assert scrubber.scrubbing.index == MirrorIndex.from_state(scrubber.peer.state)
        assert scrubber.scrubbing.index.consent[(registry[0], HEADER)] == ConsentStatus.GRANTED.value

    def test_mirror_refuses_gaps(self, consortium, registry):
        with pytest.raises(GapDetected):
            mirror_apply(MirrorIndex(), consortium.blocks[2])


class TestScrubResultValidation:
    @pytest.fixture
    def token(self, consortium, staban, registry):
        token = consortium.network.call("TM-1", "SCRUB-1", "scrub", request_for(staban, NUMBERS))
        consortium.settle()
        return token

    def submit(self, consortium, token):
        with pytest.raises(ValidatorRejected) as info:
            consortium.node("SCRUB-1").gateway.submit(TxType.SCRUB_RESULT, token.to_args())
        return info.value.reason

    def test_duplicate(self, consortium, token):
        assert self.submit(consortium, token) == RejectReason.DUPLICATE_TOKEN

    def test_wrong_state_hash(self, consortium, token):
        forged = replace(token, token_id="ab" * 16, state_hash=bytes(32))
        assert self.submit(consortium, forged) == RejectReason.STALE_STATE_HASH

    def test_bad_signature(self, consortium, token):
        forged = replace(token, token_id="ab" * 16)
        assert self.submit(consortium, forged) == RejectReason.BAD_TOKEN_SIGNATURE

    def test_inconsistent_counts(self, consortium, staban, registry, config):
        scrubber = consortium.node("SCRUB-1")
        fresh = scrub(
            request_for(staban, NUMBERS),
            scrubber.scrubbing.index,
            scrubber.peer.state,
            scrubber_id="SCRUB-1",
            keypair=scrubber.keypair,
            store=consortium.store,
            config=config,
            rng=np.random.default_rng(9),
        )
        forged = replace(fresh, counts=(99, 6, 3))
        forged = replace(forged, signature=scrubber.keypair.sign(forged.signing_bytes()))
        assert self.submit(consortium, forged) == RejectReason.COUNTS_INCONSISTENT

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dndchain.core.errors import CodecError
from dndchain.ledger.codec import TAG_INT, TAG_MAP, decode, encode

values = st.recursive(
    st.none()
    | st.booleans()
    | st.integers(min_value=-(2**63), max_value=2**63 - 1)
    | st.binary(max_size=16)
    | st.text(max_size=16),
    lambda children: st.lists(children, max_size=4) | st.dictionaries(st.text(max_size=8), children, max_size=4),
    max_leaves=12,
)


@given(values)
def test_decode_inverts_encode(value):
    """Every supported value survives the canonical encoding"""
    assert decode(encode(value)) == value


def test_integer_layout():
    """Integers are a tag, a 4-byte length and 8 big-endian bytes"""
    assert encode(1) == bytes([TAG_INT, 0, 0, 0, 8]) + (1).to_bytes(8, "big")
    assert encode(-1)[-8:] == b"\xff" * 8


def test_mapping_order_is_canonical():
    """Insertion order does not change the bytes"""
    assert encode({"b": 1, "a": 2}) == encode({"a": 2, "b": 1})
    assert encode({"a": 1})[0] == TAG_MAP


def test_tuples_encode_as_lists():
    assert encode((1, "x")) == encode([1, "x"])


class TestRejections:
    def test_trailing_bytes(self):
        with pytest.raises(CodecError):
            decode(encode(5) + b"\x00")

    def test_unknown_tag(self):
        with pytest.raises(CodecError):
            decode(bytes([0x7F, 0, 0, 0, 0]))

    def test_truncated_payload(self):
        with pytest.raises(CodecError):
            decode(encode("hello")[:-1])

    def test_out_of_order_keys(self):
        """A hand-built map with descending keys is refused"""
        body = encode("b") + encode(1) + encode("a") + encode(2)
        raw = bytes([TAG_MAP]) + len(body).to_bytes(4, "big") + body
        with pytest.raises(CodecError):
            decode(raw)

    def test_floats_unsupported(self):
        with pytest.raises(CodecError):
            encode(1.5)

    def test_integer_range(self):
        with pytest.raises(CodecError):
            encode(2**63)

    def test_non_string_keys(self):
        with pytest.raises(CodecError):
            encode({1: "x"})

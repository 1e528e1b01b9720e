import hashlib

import pytest
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey

from dndchain.core.errors import DigestMismatch
from dndchain.ledger.state import EMPTY_STATE_HASH, WorldState
from dndchain.ledger.types import KVWrite, Version
from dndchain.membership.crypto import KeyPair, decrypt_with, digest, encrypt_for, keyed_digest, verify

# RFC 8032 section 7.1, test 1
ED25519_SEED = bytes.fromhex("9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60")
ED25519_PUBLIC = bytes.fromhex("d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a")
ED25519_SIGNATURE = bytes.fromhex(
    "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e065224901555fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b"
)


@pytest.fixture(scope="module")
def keypair():
    return KeyPair(ED25519_SEED)


def test_ed25519_known_answer(keypair):
    """Signing the empty message reproduces the published vector"""
    assert keypair.public_key == ED25519_PUBLIC
    assert keypair.sign(b"") == ED25519_SIGNATURE
    assert verify(ED25519_PUBLIC, b"", ED25519_SIGNATURE)


def test_verify_rejects_tampering(keypair):
    signature = keypair.sign(b"campaign")
    assert not verify(keypair.public_key, b"campaigns", signature)
    assert not verify(keypair.public_key, b"campaign", bytes(64))
    assert not verify(b"short", b"campaign", signature)


def test_hmac_known_answer():
    """RFC 4231 test case 2"""
    mac = keyed_digest(b"Jefe", b"what do ya want for nothing?")
    assert mac.hex() == "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843"


def test_digest_is_sha256():
    assert digest(b"abc") == hashlib.sha256(b"abc").digest()


def test_empty_state_hash():
    assert EMPTY_STATE_HASH.hex() == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    assert WorldState().state_hash() == EMPTY_STATE_HASH


def test_seed_length_enforced():
    with pytest.raises(ValueError):
        KeyPair(b"\x00" * 31)


class TestFileEncryption:
    @pytest.fixture(scope="class")
    def recipient(self):
        return KeyPair(bytes(range(32)))

    def test_round_trip(self, recipient):
        blob = encrypt_for(recipient.encryption_key, b"919000000001\n")
        assert recipient.decrypt(blob) == b"919000000001\n"

    def test_entropy_makes_output_reproducible(self, recipient):
        entropy = bytes(44)
        assert encrypt_for(recipient.encryption_key, b"x", entropy) == encrypt_for(recipient.encryption_key, b"x", entropy)

    def test_wrong_recipient(self, recipient):
        blob = encrypt_for(recipient.encryption_key, b"secret")
        other = KeyPair(bytes(32))
        with pytest.raises(DigestMismatch):
            other.decrypt(blob)

    def test_short_ciphertext(self):
        with pytest.raises(DigestMismatch):
            decrypt_with(X25519PrivateKey.generate(), b"tiny")


def test_state_hash_uses_ledger_digest(monkeypatch):
    import dndchain.ledger.state as state_module

    assert not hasattr(state_module, "hashlib")
    hashed = []
    monkeypatch.setattr(state_module, "digest", lambda data: hashed.append(data) or digest(data))
    state = WorldState()
    state.apply([KVWrite("pref/a", b"x"), KVWrite("pref/b", b"y")], Version(1, 0))
    expected = digest(b"".join(state.get(key).digest for key in ("pref/a", "pref/b")))
    assert state.state_hash() == expected
    assert len(hashed) == 3

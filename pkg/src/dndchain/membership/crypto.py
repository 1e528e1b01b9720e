"""Hashing, signatures and file encryption.

Every module reaches SHA-256, HMAC and Ed25519 through here.
Files are encrypted with an ephemeral X25519 exchange, HKDF-SHA256 and AES-256-GCM, laid
out as ``ephemeral public key (32) | nonce (12) | ciphertext+tag``.
"""

import hashlib
import hmac
import logging
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from dndchain.core.errors import DigestMismatch

logger = logging.getLogger(__name__)

DIGEST_SIZE = 32
ZERO_DIGEST = bytes(DIGEST_SIZE)
KEY_SIZE = 32
NONCE_SIZE = 12
FILE_KDF_INFO = b"dndchain-operator-file"

_RAW = serialization.Encoding.Raw
_RAW_PUBLIC = serialization.PublicFormat.Raw


def digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def keyed_digest(key: bytes, data: bytes) -> bytes:
    return hmac.new(key, data, hashlib.sha256).digest()


@dataclass(frozen=True)
class KeyPair:
    """Ed25519 signing key plus the X25519 key derived from the same seed."""

    seed: bytes

    def __post_init__(self):
        if len(self.seed) != KEY_SIZE:
            raise ValueError("key seed must be 32 bytes")

    @classmethod
    def from_seed(cls, seed: bytes) -> "KeyPair":
        return cls(bytes(seed))

    @cached_property
    def _signing_key(self) -> Ed25519PrivateKey:
        return Ed25519PrivateKey.from_private_bytes(self.seed)

    @cached_property
    def _exchange_key(self) -> X25519PrivateKey:
        return X25519PrivateKey.from_private_bytes(digest(self.seed + b"x25519"))

    @cached_property
    def public_key(self) -> bytes:
        return self._signing_key.public_key().public_bytes(_RAW, _RAW_PUBLIC)

    @cached_property
    def encryption_key(self) -> bytes:
        return self._exchange_key.public_key().public_bytes(_RAW, _RAW_PUBLIC)

    def sign(self, message: bytes) -> bytes:
        return self._signing_key.sign(message)

    def decrypt(self, blob: bytes) -> bytes:
        return decrypt_with(self._exchange_key, blob)

    def __repr__(self) -> str:
        return f"KeyPair(public_key={self.public_key.hex()[:16]}...)"


def sign(keypair: KeyPair, message: bytes) -> bytes:
    return keypair.sign(message)


def verify(public_key: bytes, message: bytes, signature: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
    except (InvalidSignature, ValueError):
        return False
    return True


def _file_key(shared: bytes) -> bytes:
    return HKDF(algorithm=hashes.SHA256(), length=KEY_SIZE, salt=None, info=FILE_KDF_INFO).derive(
        shared
    )


def encrypt_for(encryption_key: bytes, plaintext: bytes, entropy: Optional[bytes] = None) -> bytes:
    """Encrypt to a recipient's X25519 key. ``entropy`` (44 bytes) makes output reproducible."""
    if entropy is None:
        ephemeral = X25519PrivateKey.generate()
        nonce = os.urandom(NONCE_SIZE)
    else:
        if len(entropy) < KEY_SIZE + NONCE_SIZE:
            raise ValueError("encryption entropy must be at least 44 bytes")
        ephemeral = X25519PrivateKey.from_private_bytes(entropy[:KEY_SIZE])
        nonce = entropy[KEY_SIZE : KEY_SIZE + NONCE_SIZE]
    shared = ephemeral.exchange(X25519PublicKey.from_public_bytes(encryption_key))
    ciphertext = AESGCM(_file_key(shared)).encrypt(nonce, plaintext, None)
    return ephemeral.public_key().public_bytes(_RAW, _RAW_PUBLIC) + nonce + ciphertext


def decrypt_with(private_key: X25519PrivateKey, blob: bytes) -> bytes:
    if len(blob) < KEY_SIZE + NONCE_SIZE + 16:
        raise DigestMismatch("ciphertext too short")
    peer_public = X25519PublicKey.from_public_bytes(blob[:KEY_SIZE])
    nonce = blob[KEY_SIZE : KEY_SIZE + NONCE_SIZE]
    shared = private_key.exchange(peer_public)
    try:
        return AESGCM(_file_key(shared)).decrypt(nonce, blob[KEY_SIZE + NONCE_SIZE :], None)
    except InvalidTag as exc:
        raise DigestMismatch("ciphertext failed authentication") from exc

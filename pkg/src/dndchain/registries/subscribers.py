"""Subscriber number normalization and keyed hashing. Plaintext never leaves this module."""

import re

from dndchain.core.errors import MalformedNumber
from dndchain.membership.crypto import keyed_digest

COUNTRY_CODE = "91"
_SEPARATORS = re.compile(r"[\s\-().]")
_HASHED_KEY = re.compile(r"^[0-9a-f]{64}$")


def normalize_number(phone: str) -> str:
    """``91`` followed by the 10-digit national number."""
    raw = _SEPARATORS.sub("", str(phone).strip())
    international = raw.startswith("+")
    digits = raw[1:] if international else raw
    if not digits.isdigit():
        raise MalformedNumber(f"not a phone number: {phone!r}")
    if international:
        if len(digits) == 12 and digits.startswith(COUNTRY_CODE):
            return digits
    elif len(digits) == 10:
        return COUNTRY_CODE + digits
    elif len(digits) == 11 and digits.startswith("0"):
        return COUNTRY_CODE + digits[1:]
    elif len(digits) == 12 and digits.startswith(COUNTRY_CODE):
        return digits
    raise MalformedNumber(f"cannot normalize {len(digits)}-digit number")


def hash_subscriber(phone: str, key: bytes) -> bytes:
    return keyed_digest(key, normalize_number(phone).encode("ascii"))


def subscriber_key(phone: str, key: bytes) -> str:
    """Hex form used as the registry key."""
    return hash_subscriber(phone, key).hex()


def is_hashed_key(value: object) -> bool:
    return isinstance(value, str) and bool(_HASHED_KEY.match(value))


def national_number(normalized: str) -> str:
    return normalized[len(COUNTRY_CODE):]

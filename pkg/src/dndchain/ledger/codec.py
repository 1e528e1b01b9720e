"""Canonical byte encoding shared by every node.

Each value is written as a one-byte tag, a 4-byte big-endian payload length and the
payload. Integers are 8-byte big-endian two's complement. Mappings must have string keys
and are written in ascending key order, so equal logical values always encode to equal
bytes.
"""

import struct
from typing import Any, Tuple

from dndchain.core.errors import CodecError

TAG_NONE = 0x00
TAG_BOOL = 0x01
TAG_INT = 0x02
TAG_BYTES = 0x03
TAG_STR = 0x04
TAG_LIST = 0x05
TAG_MAP = 0x06

_HEAD = struct.Struct(">BI")
_INT_MIN = -(2**63)
_INT_MAX = 2**63 - 1


def encode(value: Any) -> bytes:
    parts: list = []
    _encode_into(value, parts)
    return b"".join(parts)


def _frame(tag: int, payload: bytes, out: list) -> None:
    out.append(_HEAD.pack(tag, len(payload)))
    out.append(payload)


def _encode_into(value: Any, out: list) -> None:
    if value is None:
        _frame(TAG_NONE, b"", out)
    elif isinstance(value, bool):
        _frame(TAG_BOOL, b"\x01" if value else b"\x00", out)
    elif isinstance(value, int):
        if not _INT_MIN <= value <= _INT_MAX:
            raise CodecError(f"integer out of 64-bit range: {value}")
        _frame(TAG_INT, value.to_bytes(8, "big", signed=True), out)
    elif isinstance(value, (bytes, bytearray, memoryview)):
        _frame(TAG_BYTES, bytes(value), out)
    elif isinstance(value, str):
        _frame(TAG_STR, value.encode("utf-8"), out)
    elif isinstance(value, (list, tuple)):
        inner: list = []
        for item in value:
            _encode_into(item, inner)
        _frame(TAG_LIST, b"".join(inner), out)
    elif isinstance(value, dict):
        inner = []
        for key in sorted(value):
            if not isinstance(key, str):
                raise CodecError(f"mapping keys must be strings, got {type(key).__name__}")
            _encode_into(key, inner)
            _encode_into(value[key], inner)
        _frame(TAG_MAP, b"".join(inner), out)
    else:
        raise CodecError(f"cannot encode {type(value).__name__}")


def decode(data: bytes) -> Any:
    """Decode one value; trailing bytes are an error."""
    data = bytes(data)
    value, offset = _decode_at(data, 0, len(data))
    if offset != len(data):
        raise CodecError(f"{len(data) - offset} trailing bytes")
    return value


def _decode_at(data: bytes, offset: int, limit: int) -> Tuple[Any, int]:
    if offset + _HEAD.size > limit:
        raise CodecError("truncated header")
    tag, length = _HEAD.unpack_from(data, offset)
    start = offset + _HEAD.size
    end = start + length
    if end > limit:
        raise CodecError("truncated payload")
    payload = data[start:end]
    if tag == TAG_NONE:
        if length:
            raise CodecError("non-empty none")
        return None, end
    if tag == TAG_BOOL:
        if payload not in (b"\x00", b"\x01"):
            raise CodecError("bad bool")
        return payload == b"\x01", end
    if tag == TAG_INT:
        if length != 8:
            raise CodecError("integers are 8 bytes")
        return int.from_bytes(payload, "big", signed=True), end
    if tag == TAG_BYTES:
        return payload, end
    if tag == TAG_STR:
        try:
            return payload.decode("utf-8"), end
        except UnicodeDecodeError as exc:
            raise CodecError("bad utf-8") from exc
    if tag == TAG_LIST:
        items = []
        cursor = start
        while cursor < end:
            item, cursor = _decode_at(data, cursor, end)
            items.append(item)
        return items, end
    if tag == TAG_MAP:
        result = {}
        cursor = start
        previous = None
        while cursor < end:
            key, cursor = _decode_at(data, cursor, end)
            if not isinstance(key, str):
                raise CodecError("mapping key is not a string")
            if previous is not None and key <= previous:
                raise CodecError("mapping keys out of canonical order")
            value, cursor = _decode_at(data, cursor, end)
            result[key] = value
            previous = key
        return result, end
    raise CodecError(f"unknown tag {tag:#x}")

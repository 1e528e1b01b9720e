"""Seeded randomness. Every stochastic choice in dndchain draws from here."""

import hashlib
from typing import Union

import numpy as np

Label = Union[str, int, bytes]


def derive_seed(seed: int, *labels: Label) -> int:
    h = hashlib.sha256(int(seed).to_bytes(8, "big", signed=True))
    for label in labels:
        raw = label if isinstance(label, bytes) else str(label).encode("utf-8")
        h.update(len(raw).to_bytes(4, "big"))
        h.update(raw)
    return int.from_bytes(h.digest()[:8], "big")


def derive_rng(seed: int, *labels: Label) -> np.random.Generator:
    """Independent generator for one (seed, purpose) pair."""
    return np.random.default_rng(derive_seed(seed, *labels))


def random_bytes(rng: np.random.Generator, size: int) -> bytes:
    return rng.bytes(size)

"""Per-operator number files and the scrubber's content-addressed store."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

from dndchain.core.errors import IoFailure
from dndchain.core.fileio import atomic_write_bytes
from dndchain.membership.crypto import digest, encrypt_for

logger = logging.getLogger(__name__)

LOCATOR_SCHEME = "scrub://"


def render_number_file(numbers: Iterable[str]) -> bytes:
    """Newline-delimited normalized numbers, ascending."""
    ordered = sorted(set(numbers))
    return "".join(f"{n}\n" for n in ordered).encode("ascii")


def parse_number_file(data: bytes) -> List[str]:
    return [line for line in data.decode("ascii").split("\n") if line]


@dataclass(frozen=True)
class PerOperatorFile:
    operator: str
    ciphertext: bytes
    digest: bytes
    lines: int


def seal_file(operator: str, encryption_key: bytes, numbers: Iterable[str], entropy: Optional[bytes] = None) -> PerOperatorFile:
    plaintext = render_number_file(numbers)
    return PerOperatorFile(
        operator,
        encrypt_for(encryption_key, plaintext, entropy),
        digest(plaintext),
        plaintext.count(b"\n"),
    )


class FileStore:
    """Blobs addressed by ``scrub://<owner>/<sha256 of ciphertext>``; optionally mirrored to disk."""

    def __init__(self, root: Optional[Union[str, Path]] = None):
        self.root = Path(root) if root else None
        self._blobs: Dict[str, bytes] = {}

    def __len__(self) -> int:
        return len(self._blobs)

    def __contains__(self, locator: str) -> bool:
        return locator in self._blobs

    def put(self, owner: str, data: bytes) -> str:
        locator = f"{LOCATOR_SCHEME}{owner}/{digest(data).hex()}"
        self._blobs[locator] = data
        if self.root is not None:
            atomic_write_bytes(self._path(locator), data)
        return locator

    def get(self, locator: str) -> bytes:
        if locator in self._blobs:
            return self._blobs[locator]
        if self.root is not None and self._path(locator).exists():
            try:
                return self._path(locator).read_bytes()
            except OSError as exc:
                raise IoFailure(f"cannot read {locator}: {exc}") from exc
        raise IoFailure(f"no file at {locator}")

    def overwrite(self, locator: str, data: bytes) -> None:
        """Replace a blob in place (fault injection)."""
        self._blobs[locator] = data
        if self.root is not None:
            atomic_write_bytes(self._path(locator), data)

    def _path(self, locator: str) -> Path:
        owner, name = locator[len(LOCATOR_SCHEME):].split("/", 1)
        return self.root / owner / name

    def locators(self) -> Tuple[str, ...]:
        return tuple(sorted(self._blobs))

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Tuple, Union

import pandas as pd
import yaml

from dndchain.core.errors import ConfigInvalid, RegulatorDbUnavailable
from dndchain.ledger.codec import encode
from dndchain.ledger.types import TxType
from dndchain.membership.crypto import KeyPair, verify

logger = logging.getLogger(__name__)


class Role(str, Enum):
    OPERATOR = "operator"
    TELEMARKETER = "telemarketer"
    SCRUBBER = "scrubber"
    OBSERVER = "observer"
    THIRD_PARTY = "third_party"


T = TxType

PROPOSE_RIGHTS: Dict[Role, FrozenSet[TxType]] = {
    Role.OPERATOR: frozenset({
        T.REGISTER_TELEMARKETER, T.REVOKE_IDENTITY, T.UPDATE_PREFERENCE, T.REVOKE_CONSENT,
        T.CAMPAIGN_STATUS, T.REGISTER_PRINCIPAL_ENTITY, T.COMPLAINT_FILED,
    }),
    Role.TELEMARKETER: frozenset({
        T.REGISTER_PRINCIPAL_ENTITY, T.REGISTER_HEADER, T.DELEGATE_HEADER, T.REGISTER_TEMPLATE,
        T.REGISTER_CONSENT_TEMPLATE, T.REQUEST_CONSENT, T.GRANT_CONSENT, T.REVOKE_CONSENT,
        T.CAMPAIGN_INIT,
    }),
    Role.THIRD_PARTY: frozenset({
        T.REGISTER_TELEMARKETER, T.REGISTER_PRINCIPAL_ENTITY, T.REGISTER_HEADER,
        T.DELEGATE_HEADER, T.UPDATE_PREFERENCE, T.REQUEST_CONSENT, T.GRANT_CONSENT,
        T.REVOKE_CONSENT, T.COMPLAINT_FILED,
    }),
    Role.SCRUBBER: frozenset({T.SCRUB_RESULT}),
    Role.OBSERVER: frozenset({T.COMPLAINT_FILED, T.DEGRADED_SERVICE}),
}


def may_propose(role: Union[Role, str], tx_type: TxType) -> bool:
    return TxType(tx_type) in PROPOSE_RIGHTS.get(Role(role), frozenset())


@dataclass(frozen=True)
class ParticipantIdentity:
    id: str
    role: Role
    public_key: bytes
    encryption_key: bytes
    region: str = ""
    admitted_at: int = 0
    revoked: bool = False

    @classmethod
    def from_keypair(cls, participant_id: str, role: Union[Role, str], keypair: KeyPair, region: str = ""):
        return cls(participant_id, Role(role), keypair.public_key, keypair.encryption_key, region)

    def to_record(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "role": self.role.value,
            "public_key": self.public_key,
            "encryption_key": self.encryption_key,
            "region": self.region,
            "revoked": self.revoked,
        }

    @classmethod
    def from_record(cls, record: Dict[str, Any], admitted_at: int = 0) -> "ParticipantIdentity":
        return cls(
            record["id"],
            Role(record["role"]),
            record["public_key"],
            record["encryption_key"],
            record.get("region", ""),
            admitted_at,
            bool(record.get("revoked", False)),
        )


@dataclass(frozen=True)
class TelemarketerRegistration:
    """Regulator-issued id and receipt bound to a self-signed key."""

    tm_id: str
    payment_receipt: str
    public_key: bytes
    encryption_key: bytes
    self_signature: bytes
    role: Role = Role.TELEMARKETER
    region: str = ""

    @staticmethod
    def signing_bytes(tm_id: str, receipt: str, public_key: bytes, encryption_key: bytes) -> bytes:
        return encode(["registration", tm_id, receipt, public_key, encryption_key])

    @classmethod
    def create(
        cls,
        tm_id: str,
        payment_receipt: str,
        keypair: KeyPair,
        role: Role = Role.TELEMARKETER,
        region: str = "",
    ) -> "TelemarketerRegistration":
        message = cls.signing_bytes(tm_id, payment_receipt, keypair.public_key, keypair.encryption_key)
        return cls(
            tm_id,
            payment_receipt,
            keypair.public_key,
            keypair.encryption_key,
            keypair.sign(message),
            Role(role),
            region,
        )

    def self_signature_valid(self) -> bool:
        message = self.signing_bytes(
            self.tm_id, self.payment_receipt, self.public_key, self.encryption_key
        )
        return verify(self.public_key, message, self.self_signature)

    def to_args(self) -> Dict[str, Any]:
        return {
            "tm_id": self.tm_id,
            "payment_receipt": self.payment_receipt,
            "public_key": self.public_key,
            "encryption_key": self.encryption_key,
            "self_signature": self.self_signature,
            "role": self.role.value,
            "region": self.region,
        }

    @classmethod
    def from_args(cls, args: Dict[str, Any]) -> "TelemarketerRegistration":
        return cls(
            args["tm_id"],
            args["payment_receipt"],
            args["public_key"],
            args["encryption_key"],
            args["self_signature"],
            Role(args.get("role", Role.TELEMARKETER.value)),
            args.get("region", ""),
        )


class RegulatorDb:
    """Read-only (tm_id, receipt) table published by the regulator."""

    def __init__(self, entries: Iterable[Tuple[str, str]] = (), outage: bool = False):
        self._entries = {(str(tm), str(receipt)) for tm, receipt in entries}
        self.outage = outage

    def __len__(self) -> int:
        return len(self._entries)

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "RegulatorDb":
        try:
            frame = pd.read_csv(path, dtype=str)
        except (OSError, pd.errors.ParserError) as exc:
            raise ConfigInvalid(f"cannot read regulator fixture {path}: {exc}") from exc
        missing = {"tm_id", "receipt"} - set(frame.columns)
        if missing:
            raise ConfigInvalid(f"regulator fixture {path} lacks columns {sorted(missing)}")
        return cls(zip(frame["tm_id"], frame["receipt"]))

    def verify(self, tm_id: str, receipt: str) -> bool:
        if self.outage:
            raise RegulatorDbUnavailable("regulator registry is unreachable")
        return (tm_id, receipt) in self._entries


def verify_against_regulator_db(db: RegulatorDb, tm_id: str, receipt: str) -> bool:
    return db.verify(tm_id, receipt)


def load_genesis(path: Union[str, Path]) -> List[ParticipantIdentity]:
    """Read bootstrap identities from a YAML genesis file."""
    try:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
        return [
            ParticipantIdentity(
                entry["id"],
                Role(entry["role"]),
                bytes.fromhex(entry["public_key"]),
                bytes.fromhex(entry["encryption_key"]),
                entry.get("region", ""),
            )
            for entry in data.get("identities", [])
        ]
    except (OSError, yaml.YAMLError, KeyError, ValueError) as exc:
        raise ConfigInvalid(f"bad genesis file {path}: {exc}") from exc


def write_genesis(path: Union[str, Path], identities: Iterable[ParticipantIdentity]) -> None:
    data = {
        "identities": [
            {
                "id": identity.id,
                "role": identity.role.value,
                "public_key": identity.public_key.hex(),
                "encryption_key": identity.encryption_key.hex(),
                "region": identity.region,
            }
            for identity in sorted(identities, key=lambda i: i.id)
        ]
    }
    with open(path, "w") as f:
        yaml.safe_dump(data, f, sort_keys=False)


def find_identity(
    identities: Iterable[ParticipantIdentity], participant_id: str
) -> Optional[ParticipantIdentity]:
    return next((i for i in identities if i.id == participant_id), None)

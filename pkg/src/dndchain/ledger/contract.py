"""Validator registry and the execution context handed to validators.

A validator is a pure function of a ``TxContext``: it reads committed state through the
context, raises ``ValidatorRejected`` on a business-rule failure and stages writes. The
reads (with their versions) and writes become the transaction's read-write set.
"""

import importlib
import logging
from typing import Any, Callable, Dict, Mapping, Optional

from dndchain.core.config import ChainConfig
from dndchain.core.errors import CodecError, RejectReason, ValidatorRejected
from dndchain.ledger.codec import decode, encode
from dndchain.ledger.state import WorldState
from dndchain.ledger.types import KVRead, KVWrite, ReadWriteSet, TransactionPayload, TxType, Version

logger = logging.getLogger(__name__)

Validator = Callable[["TxContext"], None]

CONTRACTS: Dict[TxType, Validator] = {}

CONTRACT_MODULES = (
    "dndchain.membership.contracts",
    "dndchain.registries.headers",
    "dndchain.registries.templates",
    "dndchain.registries.preferences",
    "dndchain.registries.consent",
    "dndchain.scrubbing.service",
    "dndchain.campaign.campaigns",
    "dndchain.campaign.complaints",
    "dndchain.campaign.watchlist",
)


def contract(tx_type: TxType) -> Callable[[Validator], Validator]:
    def register(func: Validator) -> Validator:
        CONTRACTS[TxType(tx_type)] = func
        return func

    return register


def load_contracts() -> Mapping[TxType, Validator]:
    for module in CONTRACT_MODULES:
        importlib.import_module(module)
    return CONTRACTS


class TxContext:
    """Simulated execution of one transaction against a committed state."""

    def __init__(
        self,
        state: WorldState,
        payload: TransactionPayload,
        config: ChainConfig,
        state_hash_at: Optional[Callable[[int], Optional[bytes]]] = None,
        regulator: Any = None,
    ):
        self._state = state
        self.payload = payload
        self.config = config
        self.regulator = regulator
        self._state_hash_at = state_hash_at
        self._reads: Dict[str, Optional[Version]] = {}
        self._writes: Dict[str, Optional[bytes]] = {}
        try:
            self.args = payload.arguments()
        except CodecError as exc:
            raise ValidatorRejected(RejectReason.MALFORMED_ARGS, str(exc)) from exc

    @property
    def proposer(self) -> str:
        return self.payload.proposer

    @property
    def tick(self) -> int:
        return self.payload.timestamp

    @property
    def height(self) -> int:
        return self._state.height

    def get(self, key: str) -> Optional[bytes]:
        if key in self._writes:
            return self._writes[key]
        if key not in self._reads:
            self._reads[key] = self._state.version(key)
        return self._state.value(key)

    def get_record(self, key: str) -> Optional[Any]:
        raw = self.get(key)
        return None if raw is None else decode(raw)

    def put(self, key: str, value: bytes) -> None:
        self._writes[key] = value

    def put_record(self, key: str, record: Any) -> None:
        self.put(key, encode(record))

    def delete(self, key: str) -> None:
        self._writes[key] = None

    def member(self, participant_id: str) -> Optional[Dict[str, Any]]:
        record = self.get_record(f"member/{participant_id}")
        if record is None or record.get("revoked"):
            return None
        return record

    def state_hash_at(self, height: int) -> Optional[bytes]:
        return None if self._state_hash_at is None else self._state_hash_at(height)

    def arg(self, name: str, kind: type = str) -> Any:
        value = self.args.get(name)
        if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
            raise ValidatorRejected(RejectReason.MALFORMED_ARGS, f"argument {name!r}")
        return value

    def reject(self, reason: RejectReason, detail: str = "") -> None:
        raise ValidatorRejected(reason, detail)

    def rwset(self) -> ReadWriteSet:
        return ReadWriteSet(
            reads=tuple(KVRead(k, self._reads[k]) for k in sorted(self._reads)),
            writes=tuple(KVWrite(k, self._writes[k]) for k in sorted(self._writes)),
        )


def execute(
    state: WorldState,
    payload: TransactionPayload,
    config: ChainConfig,
    state_hash_at: Optional[Callable[[int], Optional[bytes]]] = None,
    regulator: Any = None,
) -> ReadWriteSet:
    """Run the validator for ``payload`` and return its read-write set."""
    validator = load_contracts().get(payload.tx_type)
    if validator is None:
        raise ValidatorRejected(RejectReason.ROLE_FORBIDDEN, f"no validator for {payload.tx_type.value}")
    ctx = TxContext(state, payload, config, state_hash_at, regulator)
    validator(ctx)
    return ctx.rwset()

"""Scrub requests, tokens and the ScrubResult validator.

A scrub decides against the mirror index at the scrubber's committed height, writes one
encrypted file of deliverable numbers per operator, one encrypted invalid file per
operator for the observer, and anchors the decision on chain with the state hash of that
height. The telemarketer only ever receives the token.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from dndchain.core.config import ChainConfig
from dndchain.core.errors import (
    BatchTooSmall,
    GapDetected,
    MalformedNumber,
    RejectReason,
    StaleIndex,
    UnresolvedOperator,
    ValidatorRejected,
)
from dndchain.ledger.codec import encode
from dndchain.ledger.contract import TxContext, contract
from dndchain.ledger.state import WorldState
from dndchain.ledger.types import Block, TxType
from dndchain.membership.contracts import member_key
from dndchain.membership.crypto import KeyPair, verify
from dndchain.membership.identity import Role
from dndchain.registries.categories import parse_category
from dndchain.registries.headers import header_key, is_delegated
from dndchain.registries.subscribers import national_number, normalize_number, subscriber_key
from dndchain.registries.templates import TemplateKind, template_key
from dndchain.scrubbing.files import FileStore, seal_file
from dndchain.scrubbing.mirror import MirrorIndex, excluded_keys, mirror_apply

logger = logging.getLogger(__name__)

UNRESOLVED = "unresolved"


def scrub_key(token_id: str) -> str:
    return f"scrub/{token_id}"


def token_use_key(token_id: str) -> str:
    return f"tokenuse/{token_id}"


@dataclass(frozen=True)
class ScrubRequest:
    tm_id: str
    header: str
    template_id: str
    category: str
    numbers: Tuple[str, ...]
    requested_at: int = 0


@dataclass(frozen=True)
class OperatorLeg:
    operator: str
    locator: str
    digest: bytes
    lines: int
    signature: bytes

    @staticmethod
    def signing_bytes(token_id: str, operator: str, file_digest: bytes, lines: int) -> bytes:
        return encode(["scrub-file", token_id, operator, file_digest, lines])

    def to_wire(self) -> Dict[str, Any]:
        return {
            "operator": self.operator,
            "locator": self.locator,
            "digest": self.digest,
            "lines": self.lines,
            "signature": self.signature,
        }

    @classmethod
    def from_wire(cls, wire: Dict[str, Any]) -> "OperatorLeg":
        return cls(wire["operator"], wire["locator"], wire["digest"], wire["lines"], wire["signature"])


@dataclass(frozen=True)
class ScrubToken:
    token_id: str
    scrubber_id: str
    tm_id: str
    header: str
    template_id: str
    category: str
    decision_height: int
    state_hash: bytes
    per_operator: Tuple[OperatorLeg, ...]
    counts: Tuple[int, int, int]  # distinct input entries, valid, invalid
    invalid_files: Tuple[OperatorLeg, ...] = ()
    signature: bytes = field(default=b"", compare=False)

    def body(self) -> Dict[str, Any]:
        return {
            "token_id": self.token_id,
            "scrubber_id": self.scrubber_id,
            "tm_id": self.tm_id,
            "header": self.header,
            "template_id": self.template_id,
            "category": self.category,
            "decision_height": self.decision_height,
            "state_hash": self.state_hash,
            "per_operator": [leg.to_wire() for leg in self.per_operator],
            "counts": list(self.counts),
            "invalid_files": [leg.to_wire() for leg in self.invalid_files],
        }

    def signing_bytes(self) -> bytes:
        return encode(["scrub-token", self.body()])

    def to_args(self) -> Dict[str, Any]:
        return {**self.body(), "signature": self.signature}

    @classmethod
    def from_args(cls, args: Dict[str, Any]) -> "ScrubToken":
        return cls(
            args["token_id"],
            args["scrubber_id"],
            args["tm_id"],
            args["header"],
            args["template_id"],
            args["category"],
            args["decision_height"],
            args["state_hash"],
            tuple(OperatorLeg.from_wire(w) for w in args["per_operator"]),
            tuple(args["counts"]),
            tuple(OperatorLeg.from_wire(w) for w in args.get("invalid_files", [])),
            args["signature"],
        )

    @property
    def operators(self) -> List[str]:
        return [leg.operator for leg in self.per_operator]

    def leg(self, operator: str) -> Optional[OperatorLeg]:
        return next((leg for leg in self.per_operator if leg.operator == operator), None)


def resolve_operator(normalized: str, index, config: ChainConfig, hashed_key: str) -> str:
    entry = index.pref.get(hashed_key)
    if entry is not None:
        return entry.operator
    national = national_number(normalized)
    table = config.scrub.prefix_table
    for length in range(len(national), 0, -1):
        operator = table.get(national[:length])
        if operator is not None:
            return operator
    if config.scrub.default_operator:
        return config.scrub.default_operator
    raise UnresolvedOperator("no operator for a number in the batch")


def _check_campaign_subject(record_of, tm_id: str, header: str, template_id: str) -> Dict[str, Any]:
    if not is_delegated(record_of(header_key(header)), tm_id):
        raise ValidatorRejected(RejectReason.NOT_DELEGATED, f"{tm_id} for {header}")
    template = record_of(template_key(template_id))
    if template is None or template["header"] != header:
        raise ValidatorRejected(RejectReason.UNREGISTERED_TEMPLATE, template_id)
    if template["kind"] == TemplateKind.CONSENT.value:
        raise ValidatorRejected(RejectReason.WRONG_TEMPLATE_KIND, "consent templates cannot carry campaigns")
    return template


def _observer_key(state: WorldState, fallback: bytes) -> Tuple[str, bytes]:
    for _, record in state.records("member/"):
        if record["role"] == Role.OBSERVER.value and not record.get("revoked"):
            return record["id"], record["encryption_key"]
    return "", fallback


def scrub(
    request: ScrubRequest,
    index,
    state: WorldState,
    *,
    scrubber_id: str,
    keypair: KeyPair,
    store: FileStore,
    config: ChainConfig,
    rng: np.random.Generator,
) -> ScrubToken:
    """Compute S = L - C for the request and seal it into per-operator files.

    The minimum batch size applies to distinct well-formed numbers. ``counts[0]`` is the
    number of distinct entries, malformed ones included.
    """
    if index.height != state.height:
        raise StaleIndex(f"index at {index.height}, chain at {state.height}")
    template = _check_campaign_subject(state.record, request.tm_id, request.header, request.template_id)
    category = parse_category(request.category)

    secret = config.crypto.key_bytes
    hashed: Dict[str, str] = {}
    malformed: List[str] = []
    for raw in request.numbers:
        try:
            normalized = normalize_number(raw)
        except MalformedNumber:
            malformed.append(str(raw))
            continue
        if normalized not in hashed:
            hashed[normalized] = subscriber_key(normalized, secret)
    if len(hashed) < config.scrub.min_batch_size:
        raise BatchTooSmall(
            f"{len(hashed)} distinct numbers in a list of {len(request.numbers)}, "
            f"minimum {config.scrub.min_batch_size}"
        )

    if template["kind"] == TemplateKind.TRANSACTIONAL.value:
        excluded = set()
    else:
        excluded = excluded_keys(index, request.header, category, config.registry.consent_overrides_full_block)

    valid: Dict[str, List[str]] = {}
    invalid: Dict[str, List[str]] = {}
    for normalized in sorted(hashed):
        key = hashed[normalized]
        operator = resolve_operator(normalized, index, config, key)
        bucket = invalid if key in excluded else valid
        bucket.setdefault(operator, []).append(normalized)
    if malformed:
        invalid.setdefault(UNRESOLVED, []).extend(sorted(set(malformed)))

    token_id = rng.bytes(16).hex()
    legs = []
    for operator in sorted(valid):
        member = state.record(member_key(operator))
        if member is None or member["role"] != Role.OPERATOR.value:
            raise UnresolvedOperator(f"{operator} is not an admitted operator")
        sealed = seal_file(operator, member["encryption_key"], valid[operator], rng.bytes(44))
        locator = store.put(scrubber_id, sealed.ciphertext)
        signature = keypair.sign(OperatorLeg.signing_bytes(token_id, operator, sealed.digest, sealed.lines))
        legs.append(OperatorLeg(operator, locator, sealed.digest, sealed.lines, signature))

    _, observer_key = _observer_key(state, keypair.encryption_key)
    invalid_legs = []
    for operator in sorted(invalid):
        sealed = seal_file(operator, observer_key, invalid[operator], rng.bytes(44))
        locator = store.put(scrubber_id, sealed.ciphertext)
        signature = keypair.sign(OperatorLeg.signing_bytes(token_id, operator, sealed.digest, sealed.lines))
        invalid_legs.append(OperatorLeg(operator, locator, sealed.digest, sealed.lines, signature))

    valid_count = sum(len(v) for v in valid.values())
    invalid_count = sum(len(v) for v in invalid.values())
    token = ScrubToken(
        token_id=token_id,
        scrubber_id=scrubber_id,
        tm_id=request.tm_id,
        header=request.header,
        template_id=request.template_id,
        category=category,
        decision_height=state.height,
        state_hash=state.state_hash(),
        per_operator=tuple(legs),
        counts=(valid_count + invalid_count, valid_count, invalid_count),
        invalid_files=tuple(invalid_legs),
    )
    signed = replace(token, signature=keypair.sign(token.signing_bytes()))
    logger.info(
        f"{scrubber_id}: scrub {token_id[:8]} for {request.tm_id}/{request.header} at height "
        f"{state.height}: {signed.counts[1]} valid of {signed.counts[0]}"
    )
    return signed


@contract(TxType.SCRUB_RESULT)
def scrub_result_validator(ctx: TxContext) -> None:
    try:
        token = ScrubToken.from_args(ctx.args)
    except (KeyError, TypeError, ValueError) as exc:
        ctx.reject(RejectReason.MALFORMED_ARGS, str(exc))
    if token.scrubber_id != ctx.proposer:
        ctx.reject(RejectReason.ROLE_FORBIDDEN, "tokens are proposed by their scrubber")
    scrubber = ctx.member(token.scrubber_id)
    if scrubber is None or scrubber["role"] != Role.SCRUBBER.value:
        ctx.reject(RejectReason.ROLE_FORBIDDEN, f"{token.scrubber_id} is not a scrubber")
    if ctx.get(scrub_key(token.token_id)) is not None:
        ctx.reject(RejectReason.DUPLICATE_TOKEN, token.token_id)
    _check_campaign_subject(ctx.get_record, token.tm_id, token.header, token.template_id)
    parse_category(token.category)
    if token.decision_height > ctx.height or ctx.state_hash_at(token.decision_height) != token.state_hash:
        ctx.reject(RejectReason.STALE_STATE_HASH, f"height {token.decision_height}")
    if not verify(scrubber["public_key"], token.signing_bytes(), token.signature):
        ctx.reject(RejectReason.BAD_TOKEN_SIGNATURE, "token")
    for leg in (*token.per_operator, *token.invalid_files):
        message = OperatorLeg.signing_bytes(token.token_id, leg.operator, leg.digest, leg.lines)
        if not verify(scrubber["public_key"], message, leg.signature):
            ctx.reject(RejectReason.BAD_TOKEN_SIGNATURE, leg.operator)
    total, valid, invalid = token.counts
    if total != valid + invalid or valid != sum(leg.lines for leg in token.per_operator) or invalid != sum(
        leg.lines for leg in token.invalid_files
    ):
        ctx.reject(RejectReason.COUNTS_INCONSISTENT, str(token.counts))
    ctx.put_record(scrub_key(token.token_id), token.to_args())


class ScrubbingService:
    """Scrubber node role: keeps the mirror index current and answers scrub requests."""

    def __init__(self, node_id: str, keypair: KeyPair, peer, gateway, store: FileStore, rng: np.random.Generator):
        self.node_id = node_id
        self.keypair = keypair
        self.peer = peer
        self.gateway = gateway
        self.store = store
        self.rng = rng
        self.index = MirrorIndex.from_state(peer.state)
        self.metering: Counter = Counter()
        self.tokens: Dict[str, ScrubToken] = {}
        peer.subscribe(self._on_commit)

    def _on_commit(self, block: Block) -> None:
        try:
            mirror_apply(self.index, block)
        except GapDetected as exc:
            logger.warning(f"{self.node_id}: {exc}; rebuilding index")
            self.index = MirrorIndex.from_state(self.peer.state)

    def handle(self, request: ScrubRequest) -> ScrubToken:
        token = scrub(
            request,
            self.index,
            self.peer.state,
            scrubber_id=self.node_id,
            keypair=self.keypair,
            store=self.store,
            config=self.peer.config,
            rng=self.rng,
        )
        self.gateway.submit(TxType.SCRUB_RESULT, token.to_args())
        self.metering[request.tm_id] += 1
        self.tokens[token.token_id] = token
        return token

"""Membership validators: genesis bootstrap, admission and key revocation."""

import logging
from typing import Any, Dict, Iterable

from dndchain.core.config import ChainConfig
from dndchain.core.errors import RegulatorDbUnavailable, RejectReason
from dndchain.ledger.contract import TxContext, contract
from dndchain.ledger.types import TxType
from dndchain.membership.identity import ParticipantIdentity, Role, TelemarketerRegistration

logger = logging.getLogger(__name__)

POLICY_KEY = "config/policies"


def member_key(participant_id: str) -> str:
    return f"member/{participant_id}"


def public_key_index(public_key: bytes) -> str:
    return f"memberkey/{public_key.hex()}"


def genesis_arguments(identities: Iterable[ParticipantIdentity], config: ChainConfig) -> Dict[str, Any]:
    return {
        "identities": [i.to_record() for i in sorted(identities, key=lambda i: i.id)],
        "policies": {
            "default": config.ledger.default_policy,
            "by_type": dict(sorted(config.ledger.policies.items())),
        },
    }


@contract(TxType.GENESIS)
def genesis(ctx: TxContext) -> None:
    seen_keys = set()
    for record in ctx.arg("identities", list):
        identity = ParticipantIdentity.from_record(record)
        if ctx.get(member_key(identity.id)) is not None or identity.public_key in seen_keys:
            ctx.reject(RejectReason.DUPLICATE_IDENTITY, identity.id)
        seen_keys.add(identity.public_key)
        ctx.put_record(member_key(identity.id), {**identity.to_record(), "admitted_tick": ctx.tick})
        ctx.put_record(public_key_index(identity.public_key), {"id": identity.id})
    ctx.put_record(POLICY_KEY, ctx.arg("policies", dict))


@contract(TxType.REGISTER_TELEMARKETER)
def register_telemarketer(ctx: TxContext) -> None:
    try:
        registration = TelemarketerRegistration.from_args(ctx.args)
    except (KeyError, ValueError) as exc:
        ctx.reject(RejectReason.MALFORMED_ARGS, str(exc))
    if registration.role not in (Role.TELEMARKETER, Role.THIRD_PARTY):
        ctx.reject(RejectReason.MALFORMED_ARGS, "only telemarketers and third parties join dynamically")
    if not registration.self_signature_valid():
        ctx.reject(RejectReason.VERIFICATION_FAILED, "self-signature does not verify")
    if ctx.regulator is None:
        ctx.reject(RejectReason.REGULATOR_DB_UNAVAILABLE, "node has no regulator registry")
    try:
        known = ctx.regulator.verify(registration.tm_id, registration.payment_receipt)
    except RegulatorDbUnavailable as exc:
        ctx.reject(RejectReason.REGULATOR_DB_UNAVAILABLE, str(exc))
    if not known:
        ctx.reject(RejectReason.VERIFICATION_FAILED, f"{registration.tm_id} not in regulator registry")
    if ctx.get(member_key(registration.tm_id)) is not None:
        ctx.reject(RejectReason.DUPLICATE_IDENTITY, registration.tm_id)
    if ctx.get(public_key_index(registration.public_key)) is not None:
        ctx.reject(RejectReason.DUPLICATE_IDENTITY, "public key already admitted")
    identity = ParticipantIdentity(
        registration.tm_id,
        registration.role,
        registration.public_key,
        registration.encryption_key,
        registration.region,
    )
    ctx.put_record(
        member_key(identity.id),
        {**identity.to_record(), "admitted_tick": ctx.tick, "sponsor": ctx.proposer},
    )
    ctx.put_record(public_key_index(identity.public_key), {"id": identity.id})


@contract(TxType.REVOKE_IDENTITY)
def revoke_identity(ctx: TxContext) -> None:
    participant = ctx.arg("participant")
    record = ctx.get_record(member_key(participant))
    if record is None or record.get("revoked"):
        ctx.reject(RejectReason.UNKNOWN_PARTICIPANT, participant)
    ctx.put_record(member_key(participant), {**record, "revoked": True, "revoked_tick": ctx.tick})


def admit_participant(gateway, registration: TelemarketerRegistration) -> str:
    """Propose a RegisterTelemarketer transaction; returns the transaction id."""
    logger.info(f"{gateway.identity_id} sponsoring admission of {registration.tm_id}")
    return gateway.submit(TxType.REGISTER_TELEMARKETER, registration.to_args())


def revoke_participant(gateway, participant_id: str) -> str:
    return gateway.submit(TxType.REVOKE_IDENTITY, {"participant": participant_id})

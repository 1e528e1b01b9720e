"""Campaign life cycle from a committed scrub token to per-operator delivery reports."""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from dndchain.campaign.trace import DeliveryRow
from dndchain.core.config import CampaignConfig, ChainConfig
from dndchain.core.errors import OutsideWindow, RejectReason, TemplateMismatch
from dndchain.ledger.codec import encode
from dndchain.ledger.contract import TxContext, contract
from dndchain.ledger.state import WorldState
from dndchain.ledger.types import TxType
from dndchain.membership.crypto import KeyPair, verify
from dndchain.registries.subscribers import subscriber_key
from dndchain.registries.templates import TemplateKind, lookup_template
from dndchain.scrubbing.files import FileStore
from dndchain.scrubbing.service import ScrubToken, scrub_key, token_use_key
from dndchain.scrubbing.verify import verify_scrub_token

logger = logging.getLogger(__name__)


class CampaignStatus(str, Enum):
    QUEUED = "queued"
    IN_DELIVERY = "in_delivery"
    COMPLETED = "completed"
    REJECTED = "rejected"


STATUS_RANK = {
    CampaignStatus.QUEUED: 0,
    CampaignStatus.IN_DELIVERY: 1,
    CampaignStatus.COMPLETED: 2,
    CampaignStatus.REJECTED: 2,
}


def campaign_key(campaign_id: str) -> str:
    return f"campaign/{campaign_id}"


def campaign_id_for(token_id: str) -> str:
    return f"CMP-{token_id[:16]}"


@dataclass(frozen=True)
class Campaign:
    campaign_id: str
    tm_id: str
    header: str
    template_id: str
    token_id: str
    category: str
    status: CampaignStatus
    submitted: int
    legs: Tuple[Tuple[str, Optional[Dict[str, Any]]], ...]

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "Campaign":
        return cls(
            record["campaign_id"],
            record["tm_id"],
            record["header"],
            record["template_id"],
            record["token_id"],
            record["category"],
            CampaignStatus(record["status"]),
            record["submitted"],
            tuple(sorted(record["legs"].items())),
        )

    @property
    def operators(self) -> List[str]:
        return [operator for operator, _ in self.legs]

    @property
    def delivered(self) -> int:
        return sum(leg["delivered"] for _, leg in self.legs if leg)

    def leg_report(self, operator: str) -> Optional[Dict[str, Any]]:
        return dict(self.legs).get(operator)


@dataclass(frozen=True)
class DeliveryReport:
    campaign_id: str
    operator: str
    attempted: int
    delivered: int
    outcome: str  # delivered | rejected
    reason: str
    tick: int
    signature: bytes = b""

    def signing_bytes(self) -> bytes:
        return encode(
            ["delivery-report", self.campaign_id, self.operator, self.attempted, self.delivered, self.outcome, self.reason, self.tick]
        )

    @classmethod
    def create(
        cls, keypair: KeyPair, campaign_id: str, operator: str, attempted: int, delivered: int, tick: int,
        outcome: str = "delivered", reason: str = "",
    ) -> "DeliveryReport":
        unsigned = cls(campaign_id, operator, attempted, delivered, outcome, reason, tick)
        return cls(campaign_id, operator, attempted, delivered, outcome, reason, tick, keypair.sign(unsigned.signing_bytes()))

    def verify(self, public_key: bytes) -> bool:
        return verify(public_key, self.signing_bytes(), self.signature)

    def to_args(self) -> Dict[str, Any]:
        return {
            "campaign_id": self.campaign_id,
            "operator": self.operator,
            "attempted": self.attempted,
            "delivered": self.delivered,
            "outcome": self.outcome,
            "reason": self.reason,
            "tick": self.tick,
            "signature": self.signature,
        }

    @classmethod
    def from_args(cls, args: Dict[str, Any]) -> "DeliveryReport":
        return cls(
            args["campaign_id"], args["operator"], args["attempted"], args["delivered"],
            args["outcome"], args["reason"], args["tick"], args["signature"],
        )


@contract(TxType.CAMPAIGN_INIT)
def campaign_init_validator(ctx: TxContext) -> None:
    token_id = ctx.arg("token_id")
    campaign_id = ctx.arg("campaign_id")
    scrub = ctx.get_record(scrub_key(token_id))
    if scrub is None:
        ctx.reject(RejectReason.TOKEN_NOT_ON_CHAIN, token_id)
    if scrub["header"] != ctx.arg("header"):
        ctx.reject(RejectReason.TOKEN_HEADER_MISMATCH, f"token issued for {scrub['header']}")
    if scrub["template_id"] != ctx.arg("template_id"):
        ctx.reject(RejectReason.TOKEN_TEMPLATE_MISMATCH, "token issued for another template")
    if scrub["tm_id"] != ctx.proposer:
        ctx.reject(RejectReason.NOT_TOKEN_OWNER, f"token belongs to {scrub['tm_id']}")
    if ctx.get(token_use_key(token_id)) is not None:
        ctx.reject(RejectReason.TOKEN_ALREADY_CONSUMED, token_id)
    if ctx.get(campaign_key(campaign_id)) is not None:
        ctx.reject(RejectReason.DUPLICATE_CAMPAIGN, campaign_id)
    legs = {leg["operator"]: None for leg in scrub["per_operator"]}
    ctx.put_record(token_use_key(token_id), {"campaign_id": campaign_id, "tick": ctx.tick})
    ctx.put_record(
        campaign_key(campaign_id),
        {
            "campaign_id": campaign_id,
            "tm_id": ctx.proposer,
            "header": scrub["header"],
            "template_id": scrub["template_id"],
            "token_id": token_id,
            "category": scrub["category"],
            "status": (CampaignStatus.QUEUED if legs else CampaignStatus.COMPLETED).value,
            "submitted": scrub["counts"][0],
            "legs": legs,
            "init_tick": ctx.tick,
        },
    )


@contract(TxType.CAMPAIGN_STATUS)
def campaign_status_validator(ctx: TxContext) -> None:
    try:
        report = DeliveryReport.from_args(ctx.args)
    except (KeyError, TypeError) as exc:
        ctx.reject(RejectReason.MALFORMED_ARGS, str(exc))
    if report.operator != ctx.proposer:
        ctx.reject(RejectReason.ROLE_FORBIDDEN, "operators report their own legs")
    record = ctx.get_record(campaign_key(report.campaign_id))
    if record is None:
        ctx.reject(RejectReason.UNKNOWN_CAMPAIGN, report.campaign_id)
    if report.operator not in record["legs"]:
        ctx.reject(RejectReason.NOT_CAMPAIGN_LEG, report.operator)
    if record["legs"][report.operator] is not None:
        ctx.reject(RejectReason.LEG_ALREADY_REPORTED, report.operator)
    scrub = ctx.get_record(scrub_key(record["token_id"]))
    lines = next(leg["lines"] for leg in scrub["per_operator"] if leg["operator"] == report.operator)
    if not 0 <= report.delivered <= report.attempted <= lines:
        ctx.reject(RejectReason.COUNTS_EXCEED_FILE, f"{report.delivered}/{report.attempted} of {lines}")
    if report.outcome not in ("delivered", "rejected"):
        ctx.reject(RejectReason.MALFORMED_ARGS, f"outcome {report.outcome!r}")
    operator = ctx.member(report.operator)
    if operator is None or not report.verify(operator["public_key"]):
        ctx.reject(RejectReason.BAD_REPORT_SIGNATURE, report.operator)
    legs = dict(record["legs"])
    legs[report.operator] = {
        "attempted": report.attempted,
        "delivered": report.delivered,
        "outcome": report.outcome,
        "reason": report.reason,
        "tick": report.tick,
    }
    if all(leg is not None for leg in legs.values()):
        any_delivered = any(leg["outcome"] == "delivered" for leg in legs.values())
        status = CampaignStatus.COMPLETED if any_delivered else CampaignStatus.REJECTED
    else:
        status = CampaignStatus.IN_DELIVERY
    ctx.put_record(campaign_key(report.campaign_id), {**record, "legs": legs, "status": status.value})


def submit_campaign(gateway, token: ScrubToken, header: str, template_id: str) -> Tuple[str, str]:
    """Propose CampaignInit for a committed token. Returns (campaign_id, tx_id)."""
    campaign_id = campaign_id_for(token.token_id)
    tx_id = gateway.submit(
        TxType.CAMPAIGN_INIT,
        {"campaign_id": campaign_id, "token_id": token.token_id, "header": header, "template_id": template_id},
    )
    return campaign_id, tx_id


def lookup_campaign(state: WorldState, campaign_id: str) -> Optional[Campaign]:
    record = state.record(campaign_key(campaign_id))
    return None if record is None else Campaign.from_record(record)


def in_delivery_window(tick: int, config: CampaignConfig) -> bool:
    hour = tick % config.day_ticks
    return config.window_start <= hour < config.window_end


@dataclass(frozen=True)
class CampaignExecution:
    rows: Tuple[DeliveryRow, ...]
    report: DeliveryReport
    discrepancies: Tuple[str, ...] = ()


def simulate_delivery(
    campaign_id: str, operator: str, numbers: Sequence[str], tick: int, success_prob: float,
    rng: np.random.Generator, secret: bytes,
) -> Tuple[DeliveryRow, ...]:
    outcomes = rng.random(len(numbers)) < success_prob
    return tuple(
        DeliveryRow(campaign_id, operator, subscriber_key(number, secret), tick, bool(ok))
        for number, ok in zip(numbers, outcomes)
    )


def execute_campaign(
    operator_id: str,
    keypair: KeyPair,
    campaign: Campaign,
    message: str,
    *,
    token: ScrubToken,
    state: WorldState,
    store: FileStore,
    config: ChainConfig,
    rng: np.random.Generator,
    tick: int,
    rescrub_index=None,
    raw_numbers: Optional[Sequence[str]] = None,
) -> CampaignExecution:
    """Verify the token, check template and hours, deliver and sign a report.

    ``raw_numbers`` skips token verification and delivers the given list as-is.
    """
    template = lookup_template(state, campaign.template_id)
    if template is None or not template.matches(message):
        raise TemplateMismatch(f"message does not match template {campaign.template_id[:8]}")
    if template.kind == TemplateKind.PROMOTIONAL and not in_delivery_window(tick, config.campaign):
        raise OutsideWindow(f"tick {tick} is outside the promotional window")

    discrepancies: Tuple[str, ...] = ()
    if raw_numbers is None:
        verified = verify_scrub_token(
            operator_id, token, state, keypair, store, rescrub_index=rescrub_index, config=config
        )
        numbers, discrepancies = verified.numbers, verified.discrepancies
    else:
        logger.warning(f"{operator_id}: delivering {campaign.campaign_id} without token verification")
        numbers = tuple(sorted(raw_numbers))

    rows = simulate_delivery(
        campaign.campaign_id, operator_id, numbers, tick, config.campaign.delivery_success_prob,
        rng, config.crypto.key_bytes,
    )
    delivered = sum(1 for row in rows if row.delivered)
    report = DeliveryReport.create(keypair, campaign.campaign_id, operator_id, len(rows), delivered, tick)
    logger.info(f"{operator_id}: {campaign.campaign_id} delivered {delivered}/{len(rows)}")
    return CampaignExecution(rows, report, discrepancies)


def report_campaign_status(gateway, report: DeliveryReport) -> str:
    return gateway.submit(TxType.CAMPAIGN_STATUS, report.to_args())

"""Replay audits of RTM complaints against the committed ledger and the delivery trace.

The auditor never trusts a node's live index: for the campaign a complaint points at, it
rebuilds world state at the scrub's decision height from the blocks alone and asks again
whether the subscriber was deliverable.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from dndchain.campaign.campaigns import Campaign, campaign_key
from dndchain.campaign.complaints import Complaint, SenderKind, Verdict
from dndchain.campaign.trace import LEGACY_PREFIX, P2P_PREFIX, DeliveryRow, legacy_header
from dndchain.core.config import ChainConfig
from dndchain.core.errors import InsufficientEvidence
from dndchain.ledger.state import replay_state
from dndchain.ledger.types import Block
from dndchain.registries.headers import header_key
from dndchain.registries.templates import TemplateKind, TemplateRecord, literal_overlap
from dndchain.scrubbing.mirror import MirrorIndex, is_deliverable
from dndchain.scrubbing.service import scrub_key

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AuditVerdict:
    complaint_id: str
    verdict: Verdict
    campaign_id: str = ""
    operator: str = ""
    notes: Tuple[str, ...] = ()

    @property
    def is_violation(self) -> bool:
        return self.verdict == Verdict.VIOLATION


class Auditor:
    """Observer-side audit over an immutable ledger snapshot."""

    def __init__(self, blocks: Sequence[Block], trace: Iterable[DeliveryRow], config: ChainConfig):
        self.blocks = list(blocks)
        self.config = config
        self.state = replay_state(self.blocks)
        self._rows: Dict[str, List[DeliveryRow]] = defaultdict(list)
        for row in trace:
            if row.delivered and not row.campaign_id.startswith(P2P_PREFIX):
                self._rows[row.hashed_key].append(row)
        self._indexes: Dict[int, MirrorIndex] = {}
        self._templates = [TemplateRecord.from_record(r) for _, r in self.state.records("template/")]

    def index_at(self, height: int) -> MirrorIndex:
        if height not in self._indexes:
            self._indexes[height] = MirrorIndex.from_state(replay_state(self.blocks, upto=height))
        return self._indexes[height]

    def _campaign(self, campaign_id: str) -> Optional[Campaign]:
        record = self.state.record(campaign_key(campaign_id))
        return None if record is None else Campaign.from_record(record)

    def _header_of(self, campaign_id: str) -> Optional[str]:
        if campaign_id.startswith(LEGACY_PREFIX):
            return legacy_header(campaign_id)
        campaign = self._campaign(campaign_id)
        return None if campaign is None else campaign.header

    @property
    def window_ticks(self) -> int:
        """Half-width of the candidate window: ``complaint_window_blocks`` orderer cut intervals."""
        return self.config.campaign.complaint_window_blocks * max(self.config.ledger.batch_timeout, 1)

    def candidate_rows(self, complaint: Complaint) -> List[DeliveryRow]:
        """Deliveries to the subscriber from the complained header, either side of receipt."""
        window = self.window_ticks
        return [
            row
            for row in self._rows.get(complaint.subscriber, ())
            if abs(row.tick - complaint.received_tick) <= window
            and self._header_of(row.campaign_id) == complaint.sender
        ]

    def _templates_for(self, campaign_id: str, header: str) -> List[TemplateRecord]:
        if campaign_id.startswith(LEGACY_PREFIX):
            return [t for t in self._templates if t.header == header and t.kind != TemplateKind.CONSENT]
        campaign = self._campaign(campaign_id)
        return [t for t in self._templates if t.template_id == campaign.template_id]

    def replay_audit(self, complaint: Complaint) -> AuditVerdict:
        if (
            not complaint.is_rtm
            or complaint.sender_kind != SenderKind.HEADER
            or self.state.record(header_key(complaint.sender)) is None
        ):
            return self._log(AuditVerdict(complaint.complaint_id, Verdict.UNREGISTERED_SENDER))

        rows = self.candidate_rows(complaint)
        if not rows:
            raise InsufficientEvidence(f"no deliveries from {complaint.sender} for {complaint.complaint_id}")

        # (template overlap, tick, row) for rows whose campaign template matches the message
        matched: List[Tuple[int, int, DeliveryRow]] = []
        for row in rows:
            overlaps = [
                literal_overlap(t.text)
                for t in self._templates_for(row.campaign_id, complaint.sender)
                if t.matches(complaint.message_text)
            ]
            if overlaps:
                matched.append((max(overlaps), row.tick, row))
        notes: List[str] = []
        if not matched:
            row = max(rows, key=lambda r: (r.tick, r.campaign_id))
            notes.append("message matches no template of the candidate campaigns")
            return self._log(AuditVerdict(complaint.complaint_id, Verdict.VIOLATION, row.campaign_id, row.operator, tuple(notes)))

        matched.sort(key=lambda m: (m[0], m[1], m[2].campaign_id), reverse=True)
        best_overlap, _, row = matched[0]
        tied = {m[2].campaign_id for m in matched if m[0] == best_overlap}
        if len(tied) > 1:
            notes.append(f"ambiguous: {len(tied)} campaigns match with overlap {best_overlap}")

        if row.campaign_id.startswith(LEGACY_PREFIX):
            notes.append("delivered without a scrub token")
            return self._log(AuditVerdict(complaint.complaint_id, Verdict.VIOLATION, row.campaign_id, row.operator, tuple(notes)))

        campaign = self._campaign(row.campaign_id)
        scrub = self.state.record(scrub_key(campaign.token_id))
        if scrub is None or row.operator not in campaign.operators:
            notes.append("no committed scrub covers this delivery")
            return self._log(AuditVerdict(complaint.complaint_id, Verdict.VIOLATION, row.campaign_id, row.operator, tuple(notes)))

        template = next(t for t in self._templates if t.template_id == campaign.template_id)
        if template.kind != TemplateKind.TRANSACTIONAL:
            index = self.index_at(scrub["decision_height"])
            overrides = self.config.registry.consent_overrides_full_block
            if not is_deliverable(complaint.subscriber, campaign.header, campaign.category, index, overrides):
                notes.append(f"subscriber was not deliverable at height {scrub['decision_height']}")
                return self._log(
                    AuditVerdict(complaint.complaint_id, Verdict.VIOLATION, row.campaign_id, row.operator, tuple(notes))
                )
        return self._log(AuditVerdict(complaint.complaint_id, Verdict.COMPLIANT, row.campaign_id, row.operator, tuple(notes)))

    def audit_all(self, complaints: Iterable[Complaint]) -> List[AuditVerdict]:
        verdicts = []
        for complaint in complaints:
            try:
                verdicts.append(self.replay_audit(complaint))
            except InsufficientEvidence as exc:
                logger.warning(str(exc))
        return verdicts

    @staticmethod
    def _log(verdict: AuditVerdict) -> AuditVerdict:
        level = logging.WARNING if verdict.is_violation else logging.INFO
        logger.log(level, f"{verdict.complaint_id}: {verdict.verdict.value} {verdict.campaign_id} {verdict.operator}".rstrip())
        return verdict

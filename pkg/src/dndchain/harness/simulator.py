"""Scripted end-to-end runs: workload, flows, faults, audits and metrics, tick by tick."""

import heapq
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from dndchain.campaign.audit import AuditVerdict, Auditor
from dndchain.campaign.campaigns import lookup_campaign, submit_campaign
from dndchain.campaign.complaints import committed_complaints, file_complaint
from dndchain.campaign.rate import P2PLedger
from dndchain.campaign.trace import P2P_PREFIX, DeliveryRow, legacy_campaign_id, write_trace
from dndchain.core.config import ChainConfig
from dndchain.core.errors import DndChainError, MalformedSender
from dndchain.core.rng import derive_rng
from dndchain.harness.consortium import Consortium
from dndchain.harness.metrics import MetricsReport, build_report
from dndchain.harness.node import Node
from dndchain.harness.reports import emit_reports, write_verdicts
from dndchain.harness.scenario import (
    CampaignEvent,
    ComplaintEvent,
    ConsentEvent,
    DelegateHeaderEvent,
    FaultKind,
    P2PTrafficEvent,
    PreferenceChurnEvent,
    PreferenceEvent,
    RegisterEntityEvent,
    RegisterHeaderEvent,
    RegisterTelemarketerEvent,
    RegisterTemplateEvent,
    RevokeConsentEvent,
    RevokeIdentityEvent,
    ScenarioConfig,
    SubscriberSpec,
)
from dndchain.ledger.chain import dump_ledger, serialize_ledger
from dndchain.ledger.types import Block
from dndchain.membership.contracts import admit_participant, revoke_participant
from dndchain.membership.crypto import digest
from dndchain.membership.identity import RegulatorDb, Role, TelemarketerRegistration
from dndchain.registries.categories import PreferenceMode, parse_category
from dndchain.registries.consent import (
    ConsentStatus,
    grant_consent,
    lookup_consent,
    request_consent,
    revoke_consent,
)
from dndchain.registries.headers import delegate_header, register_header, register_principal_entity
from dndchain.registries.preferences import update_preference
from dndchain.registries.subscribers import subscriber_key
from dndchain.registries.templates import register_template, split_template, template_id_for
from dndchain.scrubbing.mirror import is_deliverable
from dndchain.scrubbing.service import ScrubRequest, scrub_key

logger = logging.getLogger(__name__)

COMPLAINT_DELAY = 1
DRAIN_TICKS = 240


class SubscriberBook:
    """Synthetic subscribers: national numbers laid out by operator prefix."""

    def __init__(self, numbers: Sequence[str], operators: Sequence[str], secret: bytes, prefixes: Dict[str, str]):
        self.numbers = list(numbers)
        self.operators = list(operators)
        self.keys = [subscriber_key(n, secret) for n in self.numbers]
        self.index = {key: i for i, key in enumerate(self.keys)}
        self.prefix_table = dict(prefixes)

    @classmethod
    def generate(cls, count: int, operators: Sequence[str], seed: int, secret: bytes) -> "SubscriberBook":
        operators = sorted(operators)
        width = len(str(max(len(operators) - 1, 0)))
        prefixes = {f"9{i:0{width}d}": op for i, op in enumerate(operators)}
        rest = 10 - 1 - width
        rng = derive_rng(seed, "subscribers")
        suffixes = rng.choice(10**rest, size=count, replace=False) if count else np.array([], dtype=np.int64)
        ordered = list(prefixes)
        numbers, owners = [], []
        for i, suffix in enumerate(suffixes):
            prefix = ordered[i % len(ordered)]
            numbers.append(f"{prefix}{int(suffix):0{rest}d}")
            owners.append(prefixes[prefix])
        return cls(numbers, owners, secret, prefixes)

    def __len__(self) -> int:
        return len(self.numbers)

    def operator_of_number(self, number: str, default: str) -> str:
        national = number[-10:]
        for length in range(len(national), 0, -1):
            if national[:length] in self.prefix_table:
                return self.prefix_table[national[:length]]
        return default


@dataclass
class CampaignMeta:
    header: str
    category: str
    message: str
    complaint_rate: float
    blocked_complaint_rate: float


@dataclass
class CampaignFlow:
    tm: str
    header: str
    template_id: str
    numbers: Tuple[str, ...]
    meta: CampaignMeta
    stage: str = "scrub"
    token: object = None
    scrubber: str = ""
    campaign_id: str = ""


@dataclass
class ConsentFlow:
    tm: str
    header: str
    hashed_key: str
    code: str
    grant: bool
    stage: str = "requested"


@dataclass
class RunResult:
    scenario: ScenarioConfig
    config: ChainConfig
    blocks: List[Block]
    trace: List[DeliveryRow]
    verdicts: List[AuditVerdict]
    report: MetricsReport
    rejected: Counter = field(default_factory=Counter)

    @property
    def ledger_bytes(self) -> bytes:
        return serialize_ledger(self.blocks)

    @property
    def ledger_digest(self) -> str:
        return digest(self.ledger_bytes).hex()

    @property
    def violations(self) -> List[AuditVerdict]:
        return [v for v in self.verdicts if v.is_violation]


def instantiate(template_text: str, rng: np.random.Generator) -> str:
    """A message instance with every slot filled."""
    literals = split_template(template_text.strip())
    fills = [f"X{int(v)}" for v in rng.integers(100, 1000, size=len(literals) - 1)]
    parts = [literals[0]]
    for fill, literal in zip(fills, literals[1:]):
        parts.extend([fill, literal])
    return "".join(parts)


class Simulation:
    def __init__(self, scenario: ScenarioConfig, config: Optional[ChainConfig] = None, store_root: Optional[str] = None):
        self.scenario = scenario
        self.config = config or ChainConfig.from_dict(scenario.parameters)
        self.book = SubscriberBook.generate(
            scenario.subscribers.count, scenario.operators, scenario.seed, self.config.crypto.key_bytes
        )
        self.config.scrub.prefix_table = {**self.book.prefix_table, **self.config.scrub.prefix_table}
        if not self.config.scrub.default_operator:
            self.config.scrub.default_operator = scenario.operators[0]
        regulator = RegulatorDb((e.tm_id, e.receipt) for e in scenario.regulator)
        self.consortium = Consortium(
            self.config, scenario.nodes, seed=scenario.seed, faults=scenario.fault_injections,
            regulator=regulator, store_root=store_root,
        )
        self.rng = derive_rng(scenario.seed, "workload")
        self.complaint_rng = derive_rng(scenario.seed, "complaints")
        self.templates: Dict[str, Tuple[str, str]] = {}  # name -> (template_id, text)
        self.campaign_flows: List[CampaignFlow] = []
        self.consent_flows: List[ConsentFlow] = []
        self.campaign_meta: Dict[str, CampaignMeta] = {}
        self._complaints: List[Tuple[int, int, str, str, str, str]] = []
        self._p2p_sends: List[Tuple[int, int, str, int, bool]] = []
        self._p2p_lines: Dict[str, str] = {}
        self.p2p = P2PLedger(self.config.campaign.p2p_daily_cap, self.config.campaign.day_ticks)
        self.rejected: Counter = Counter()
        self._seq = 0
        self._legacy_seq = 0
        self._trace_seen = 0
        self._deferred: List = []

    # helpers

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    @property
    def now(self) -> int:
        return self.consortium.now

    def _node(self, node_id: str) -> Optional[Node]:
        node = self.consortium.nodes.get(node_id)
        if node is None:
            self.rejected["unknown_node"] += 1
            logger.warning(f"workload names unknown node {node_id}")
        return node

    def _submit(self, node: Node, label: str, helper, *args, **kwargs):
        result = node.submit_safely(label, helper, *args, **kwargs)
        if result is None:
            self.rejected[label] += 1
        return result

    def _operator_node(self, subscriber: int) -> Node:
        return self.consortium.node(self.book.operators[subscriber])

    def _scrubber(self) -> Optional[Node]:
        return next((n for n in self.consortium.by_role(Role.SCRUBBER) if self.consortium.is_up(n.node_id)), None)

    def _observer(self) -> Optional[Node]:
        return next((n for n in self.consortium.by_role(Role.OBSERVER) if self.consortium.is_up(n.node_id)), None)

    def _proposer_of(self, event) -> Optional[str]:
        for attr in ("tm", "sponsor", "operator"):
            if hasattr(event, attr):
                return getattr(event, attr)
        return None

    # workload

    def seed_preferences(self, spec: SubscriberSpec) -> None:
        if not spec.fully_blocked and not spec.partially_blocked:
            return
        order = derive_rng(self.scenario.seed, "initial-preferences").permutation(len(self.book))
        for rank, subscriber in enumerate(order[: spec.fully_blocked + spec.partially_blocked]):
            subscriber = int(subscriber)
            if rank < spec.fully_blocked:
                mode, categories = PreferenceMode.FULLY_BLOCKED, []
            else:
                mode, categories = PreferenceMode.PARTIAL, list(spec.partial_categories)
            self._set_preference(subscriber, mode, categories)

    def _set_preference(self, subscriber: int, mode: PreferenceMode, categories) -> None:
        node = self._operator_node(subscriber)
        self._submit(node, "preference", update_preference, self.book.keys[subscriber], node.node_id, mode, categories)

    def dispatch(self, event) -> None:
        proposer = self._proposer_of(event)
        if proposer is not None and proposer in self.consortium.nodes and not self.consortium.is_up(proposer):
            self._deferred.append(event)
            return
        handler = getattr(self, f"_on_{event.kind}")
        handler(event)

    def _on_register_telemarketer(self, event: RegisterTelemarketerEvent) -> None:
        sponsor = self._node(event.sponsor)
        if sponsor is None:
            return
        node = self.consortium.nodes.get(event.tm_id) or self.consortium.add_node(event.tm_id, Role.TELEMARKETER, event.region)
        registration = TelemarketerRegistration.create(event.tm_id, event.receipt, node.keypair, region=event.region)
        self._submit(sponsor, "register_telemarketer", admit_participant, registration)

    def _on_register_entity(self, event: RegisterEntityEvent) -> None:
        node = self._node(event.tm)
        if node is not None:
            self._submit(
                node, "register_entity", register_principal_entity, event.name, f"docs://{event.name}",
                event.approved, event.pe_id,
            )

    def _on_register_header(self, event: RegisterHeaderEvent) -> None:
        node = self._node(event.tm)
        if node is not None:
            self._submit(node, "register_header", register_header, event.pe_id, event.header)

    def _on_delegate_header(self, event: DelegateHeaderEvent) -> None:
        node = self._node(event.tm)
        if node is not None:
            self._submit(node, "delegate_header", delegate_header, event.pe_id, event.header, event.delegate)

    def _on_register_template(self, event: RegisterTemplateEvent) -> None:
        self.templates[event.name] = (template_id_for(event.header, event.text), event.text)
        node = self._node(event.tm)
        if node is not None:
            self._submit(node, "register_template", register_template, event.header, event.text, event.template_kind)

    def _on_preference(self, event: PreferenceEvent) -> None:
        self._set_preference(event.subscriber, event.mode, event.categories)

    def _on_preference_churn(self, event: PreferenceChurnEvent) -> None:
        count = min(event.count, len(self.book))
        for subscriber in sorted(int(s) for s in self.rng.choice(len(self.book), size=count, replace=False)):
            self._set_preference(subscriber, event.mode, event.categories)

    def _on_consent(self, event: ConsentEvent) -> None:
        node = self._node(event.tm)
        if node is None or event.template not in self.templates:
            self.rejected["consent"] += 1
            return
        template_id, _ = self.templates[event.template]
        for subscriber in event.subscribers:
            key = self.book.keys[subscriber]
            result = self._submit(node, "consent", request_consent, event.header, key, template_id, self.rng)
            if result is not None:
                self.consent_flows.append(ConsentFlow(event.tm, event.header, key, result[1], event.grant))

    def _on_revoke_consent(self, event: RevokeConsentEvent) -> None:
        node = self._operator_node(event.subscriber)
        self._submit(node, "revoke_consent", revoke_consent, self.book.keys[event.subscriber], event.header)

    def _on_campaign(self, event: CampaignEvent) -> None:
        node = self._node(event.tm)
        if node is None or event.template not in self.templates:
            self.rejected["campaign"] += 1
            return
        template_id, text = self.templates[event.template]
        if event.audience is None or event.audience >= len(self.book):
            chosen = range(len(self.book))
        else:
            chosen = sorted(int(i) for i in self.rng.choice(len(self.book), size=event.audience, replace=False))
        numbers = tuple(self.book.numbers[i] for i in chosen)
        meta = CampaignMeta(
            event.header, parse_category(event.category), event.message or instantiate(text, self.rng),
            event.complaint_rate, event.blocked_complaint_rate,
        )
        if self.now < self.scenario.enforcement_tick:
            self._legacy_campaign(node, meta, numbers)
            return
        self.campaign_flows.append(CampaignFlow(event.tm, event.header, template_id, numbers, meta))

    def _legacy_campaign(self, node: Node, meta: CampaignMeta, numbers: Sequence[str]) -> None:
        self._legacy_seq += 1
        campaign_id = legacy_campaign_id(meta.header, self._legacy_seq)
        self.campaign_meta[campaign_id] = meta
        for operator, share in sorted(self._shares(numbers).items()):
            try:
                self.consortium.network.call(node.node_id, operator, "deliver_legacy", campaign_id, meta.message, share)
            except DndChainError as exc:
                logger.warning(f"{operator} unreachable for {campaign_id}: {exc}")

    def _shares(self, numbers: Sequence[str]) -> Dict[str, List[str]]:
        shares: Dict[str, List[str]] = defaultdict(list)
        default = self.config.scrub.default_operator
        for number in numbers:
            shares[self.book.operator_of_number(number, default)].append(number)
        return shares

    def _on_complaint(self, event: ComplaintEvent) -> None:
        self._queue_complaint(self.now, event.subscriber, event.sender, event.message)

    def _on_p2p_traffic(self, event: P2PTrafficEvent) -> None:
        day = self.config.campaign.day_ticks
        line_key = subscriber_key(event.line, self.config.crypto.key_bytes)
        self._p2p_lines[line_key] = event.line
        for d in range(event.days):
            recipients = self.rng.integers(0, max(len(self.book), 1), size=event.sends_per_day)
            for k in range(event.sends_per_day):
                tick = event.tick + d * day + (k * day) // max(event.sends_per_day, 1)
                heapq.heappush(
                    self._p2p_sends, (tick, self._next_seq(), event.line, int(recipients[k]), k < event.complaints_per_day)
                )

    def _on_revoke_identity(self, event: RevokeIdentityEvent) -> None:
        node = self._node(event.operator)
        if node is not None:
            self._submit(node, "revoke_identity", revoke_participant, event.participant)

    # flows

    def _queue_complaint(self, tick: int, subscriber: Union[int, str], sender: str, message: str, filer: str = "") -> None:
        heapq.heappush(self._complaints, (tick, self._next_seq(), str(subscriber), sender, message, filer))

    def _file_due_complaints(self) -> None:
        while self._complaints and self._complaints[0][0] <= self.now:
            _, _, subscriber, sender, message, filer = heapq.heappop(self._complaints)
            if filer:
                node, key = self.consortium.node(filer), subscriber
            else:
                node, key = self._operator_node(int(subscriber)), self.book.keys[int(subscriber)]
            if not self.consortium.is_up(node.node_id):
                heapq.heappush(self._complaints, (self.now + 1, self._next_seq(), subscriber, sender, message, filer))
                continue
            try:
                file_complaint(node.gateway, key, sender, message, self.now)
            except MalformedSender as exc:
                logger.warning(f"complaint not filed: {exc}")
                self.rejected["malformed_sender"] += 1
            except DndChainError as exc:
                logger.warning(f"{node.node_id}: complaint refused: {exc}")
                self.rejected["complaint"] += 1

    def _advance_consents(self) -> None:
        waiting = []
        for flow in self.consent_flows:
            node = self.consortium.node(flow.tm)
            record = lookup_consent(node.peer.state, flow.hashed_key, flow.header)
            if record is None:
                if node.gateway.pending:
                    waiting.append(flow)
            elif flow.stage == "requested" and record.status == ConsentStatus.REQUESTED:
                if flow.grant:
                    self._submit(node, "grant_consent", grant_consent, flow.hashed_key, flow.header, flow.code)
                    flow.stage = "granting"
                    waiting.append(flow)
            elif flow.stage == "granting" and record.status == ConsentStatus.REQUESTED and node.gateway.pending:
                waiting.append(flow)
        self.consent_flows = waiting

    def _advance_campaigns(self) -> None:
        waiting = []
        for flow in self.campaign_flows:
            if not self.consortium.is_up(flow.tm):
                waiting.append(flow)
                continue
            if self._advance_campaign(flow):
                waiting.append(flow)
        self.campaign_flows = waiting

    def _advance_campaign(self, flow: CampaignFlow) -> bool:
        """One step of a campaign flow; False once it is finished or abandoned."""
        node = self.consortium.node(flow.tm)
        state = node.peer.state
        if flow.stage == "scrub":
            scrubber = self._scrubber()
            if scrubber is None or scrubber.peer.height != self.consortium.chain_height:
                return True
            request = ScrubRequest(flow.tm, flow.header, flow.template_id, flow.meta.category, flow.numbers, self.now)
            try:
                flow.token = self.consortium.network.call(flow.tm, scrubber.node_id, "scrub", request)
            except DndChainError as exc:
                logger.warning(f"{flow.tm}: scrub for {flow.header} refused: {exc}")
                self.rejected["scrub"] += 1
                return False
            flow.scrubber = scrubber.node_id
            flow.stage = "token"
            return True
        if flow.stage == "token":
            if state.record(scrub_key(flow.token.token_id)) is None:
                return self.consortium.node(flow.scrubber).gateway.pending > 0 or not self.consortium.is_up(flow.scrubber)
            result = self._submit(node, "campaign_init", submit_campaign, flow.token, flow.header, flow.template_id)
            if result is None:
                return False
            flow.campaign_id = result[0]
            self.campaign_meta[flow.campaign_id] = flow.meta
            flow.stage = "init"
            return True
        if flow.stage == "init":
            if lookup_campaign(state, flow.campaign_id) is None:
                return node.gateway.pending > 0
            shares = self._shares(flow.numbers)
            for operator in flow.token.operators:
                raw = None
                if self.consortium.network.faults.active(operator, FaultKind.BYPASS_SCRUB, self.now):
                    raw = shares.get(operator, [])
                try:
                    self.consortium.network.call(flow.tm, operator, "deliver", flow.campaign_id, flow.meta.message, raw)
                except DndChainError as exc:
                    logger.warning(f"{operator} unreachable for {flow.campaign_id}: {exc}")
            return False
        return False

    def _run_p2p(self) -> None:
        default = self.config.scrub.default_operator
        day = self.config.campaign.day_ticks
        rows = []
        while self._p2p_sends and self._p2p_sends[0][0] <= self.now:
            tick, _, line, recipient, complain = heapq.heappop(self._p2p_sends)
            line_key = subscriber_key(line, self.config.crypto.key_bytes)
            operator = self.book.operator_of_number(line, default)
            desk = self.consortium.node(operator).desk
            if desk is not None and desk.is_terminated(line_key):
                continue
            rows.append(DeliveryRow(f"{P2P_PREFIX}{line_key[:12]}", operator, self.book.keys[recipient], tick, True))
            self.p2p.record(line_key, tick)
            if complain:
                self._queue_complaint(tick + COMPLAINT_DELAY, recipient, line, "P2P promotional message")
        self.consortium.trace.extend(rows)
        if self.now % day == day - 1:
            observer = self._observer()
            for flag in self.p2p.new_flags():
                logger.info(f"line {flag.line[:12]} sent {flag.sends} messages on day {flag.day}")
                if observer is not None:
                    self._queue_complaint(
                        self.now, flag.line, self._p2p_lines[flag.line],
                        f"daily cap exceeded: {flag.sends} sends on day {flag.day}", filer=observer.node_id,
                    )

    def _observe_deliveries(self) -> None:
        """Recipients of campaign messages complain at the scenario's rates."""
        rows = self.consortium.trace[self._trace_seen :]
        self._trace_seen = len(self.consortium.trace)
        scrubber = self._scrubber() or self.consortium.by_role(Role.SCRUBBER)[0]
        overrides = self.config.registry.consent_overrides_full_block
        candidates = [r for r in rows if r.delivered and r.campaign_id in self.campaign_meta]
        if not candidates:
            return
        draws = self.complaint_rng.random(len(candidates))
        for row, draw in zip(candidates, draws):
            meta = self.campaign_meta[row.campaign_id]
            blocked = not is_deliverable(row.hashed_key, meta.header, meta.category, scrubber.scrubbing.index, overrides)
            rate = meta.blocked_complaint_rate if blocked else meta.complaint_rate
            if draw < rate:
                sender = f"{self.consortium.node(row.operator).display_prefix}-{meta.header}"
                self._queue_complaint(row.tick + COMPLAINT_DELAY, self.book.index[row.hashed_key], sender, meta.message)

    # main loop

    @property
    def busy(self) -> bool:
        return bool(
            self.campaign_flows or self.consent_flows or self._complaints or self._p2p_sends or self._deferred
        ) or not self.consortium.idle

    def _tick(self, tick: int, events: Sequence) -> None:
        self.consortium.begin_tick(tick)
        if tick == 0:
            self.seed_preferences(self.scenario.subscribers)
        deferred, self._deferred = self._deferred, []
        for event in [*deferred, *events]:
            self.dispatch(event)
        self._advance_consents()
        self._advance_campaigns()
        self._run_p2p()
        self._observe_deliveries()
        self._file_due_complaints()
        self.consortium.end_tick()

    def run(self) -> RunResult:
        by_tick: Dict[int, List] = defaultdict(list)
        for event in self.scenario.workload:
            by_tick[event.tick].append(event)
        tick = 0
        while tick <= self.scenario.end_tick:
            self._tick(tick, by_tick.get(tick, ()))
            tick += 1
        limit = tick + DRAIN_TICKS
        while self.busy and tick < limit:
            self._tick(tick, ())
            tick += 1
        if self.busy:
            logger.warning(f"scenario {self.scenario.name} still busy after {DRAIN_TICKS} drain ticks")

        blocks = self.consortium.blocks
        trace = list(self.consortium.trace)
        auditor = Auditor(blocks, trace, self.config)
        verdicts = auditor.audit_all(committed_complaints(auditor.state))
        report = build_report(blocks, trace, self.config)
        logger.info(
            f"scenario {self.scenario.name}: {len(blocks)} blocks, {len(trace)} deliveries, "
            f"{len(verdicts)} verdicts, {sum(v.is_violation for v in verdicts)} violations"
        )
        return RunResult(self.scenario, self.config, blocks, trace, verdicts, report, self.rejected)


def run_scenario(
    scenario: ScenarioConfig,
    out_dir: Optional[Union[str, Path]] = None,
    config: Optional[ChainConfig] = None,
) -> RunResult:
    """Run to completion; with ``out_dir`` also write the dump, trace, verdicts and metric CSVs."""
    result = Simulation(scenario, config).run()
    if out_dir is not None:
        out = Path(out_dir)
        dump_ledger(result.blocks, out / "ledger.dump")
        write_trace(result.trace, out / "trace.csv")
        write_verdicts(result.verdicts, out)
        emit_reports(result.report, out)
    return result

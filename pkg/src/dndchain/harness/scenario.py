"""Scenario files: JSON validated by pydantic before anything runs."""

import json
from enum import Enum
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, ValidationError, model_validator

from dndchain.core.errors import ConfigInvalid
from dndchain.membership.identity import Role
from dndchain.registries.categories import PreferenceMode
from dndchain.registries.templates import TemplateKind


class NodeSpec(BaseModel):
    id: str
    role: Role
    region: str = ""


class FaultKind(str, Enum):
    CRASH = "crash"
    DROP_BLOCKS = "drop_blocks"
    DELAY_BLOCKS = "delay_blocks"
    BYPASS_SCRUB = "bypass_scrub"


class FaultSpec(BaseModel):
    node: str
    kind: FaultKind
    start: int = Field(ge=0)
    end: int = Field(ge=0)
    delay: int = Field(default=1, ge=1, description="ticks of delay for delay_blocks")

    @model_validator(mode="after")
    def _ordered(self) -> "FaultSpec":
        if self.end < self.start:
            raise ValueError("fault end precedes start")
        return self

    def active(self, tick: int) -> bool:
        return self.start <= tick <= self.end


class SubscriberSpec(BaseModel):
    count: int = Field(default=0, ge=0)
    fully_blocked: int = Field(default=0, ge=0)
    partially_blocked: int = Field(default=0, ge=0)
    partial_categories: List[Union[int, str]] = Field(default_factory=lambda: [1])

    @model_validator(mode="after")
    def _fits(self) -> "SubscriberSpec":
        if self.fully_blocked + self.partially_blocked > self.count:
            raise ValueError("more blocked subscribers than subscribers")
        return self


class RegulatorEntry(BaseModel):
    tm_id: str
    receipt: str


class _Event(BaseModel):
    tick: int = Field(ge=0)


class RegisterTelemarketerEvent(_Event):
    kind: Literal["register_telemarketer"]
    tm_id: str
    receipt: str
    sponsor: str
    region: str = ""


class RegisterEntityEvent(_Event):
    kind: Literal["register_entity"]
    tm: str
    name: str
    pe_id: Optional[str] = None
    approved: bool = True


class RegisterHeaderEvent(_Event):
    kind: Literal["register_header"]
    tm: str
    pe_id: str
    header: str


class DelegateHeaderEvent(_Event):
    kind: Literal["delegate_header"]
    tm: str
    pe_id: str
    header: str
    delegate: str


class RegisterTemplateEvent(_Event):
    kind: Literal["register_template"]
    tm: str
    name: str
    header: str
    text: str
    template_kind: TemplateKind = TemplateKind.PROMOTIONAL


class PreferenceEvent(_Event):
    kind: Literal["preference"]
    subscriber: int = Field(ge=0)
    mode: PreferenceMode
    categories: List[Union[int, str]] = Field(default_factory=list)


class PreferenceChurnEvent(_Event):
    kind: Literal["preference_churn"]
    count: int = Field(ge=1)
    mode: PreferenceMode = PreferenceMode.PARTIAL
    categories: List[Union[int, str]] = Field(default_factory=lambda: [1])


class ConsentEvent(_Event):
    kind: Literal["consent"]
    tm: str
    header: str
    template: str
    subscribers: List[int]
    grant: bool = True


class RevokeConsentEvent(_Event):
    kind: Literal["revoke_consent"]
    header: str
    subscriber: int = Field(ge=0)


class CampaignEvent(_Event):
    kind: Literal["campaign"]
    tm: str
    header: str
    template: str
    category: Union[int, str]
    audience: Optional[int] = Field(default=None, ge=1, description="sample size; all subscribers when omitted")
    message: Optional[str] = None
    complaint_rate: float = Field(default=0.0, ge=0.0, le=1.0)
    blocked_complaint_rate: float = Field(default=0.0, ge=0.0, le=1.0)


class ComplaintEvent(_Event):
    kind: Literal["complaint"]
    subscriber: int = Field(ge=0)
    sender: str
    message: str


class P2PTrafficEvent(_Event):
    kind: Literal["p2p_traffic"]
    line: str
    sends_per_day: int = Field(ge=0)
    days: int = Field(default=1, ge=1)
    complaints_per_day: int = Field(default=0, ge=0)


class RevokeIdentityEvent(_Event):
    kind: Literal["revoke_identity"]
    operator: str
    participant: str


WorkloadEvent = Annotated[
    Union[
        RegisterTelemarketerEvent,
        RegisterEntityEvent,
        RegisterHeaderEvent,
        DelegateHeaderEvent,
        RegisterTemplateEvent,
        PreferenceEvent,
        PreferenceChurnEvent,
        ConsentEvent,
        RevokeConsentEvent,
        CampaignEvent,
        ComplaintEvent,
        P2PTrafficEvent,
        RevokeIdentityEvent,
    ],
    Field(discriminator="kind"),
]


class ScenarioConfig(BaseModel):
    """A complete, seeded simulation run."""

    name: str = "scenario"
    seed: int = Field(default=0, ge=-(2**63), lt=2**63)
    nodes: List[NodeSpec]
    subscribers: SubscriberSpec = Field(default_factory=SubscriberSpec)
    workload: List[WorkloadEvent] = Field(default_factory=list)
    fault_injections: List[FaultSpec] = Field(default_factory=list)
    regulator: List[RegulatorEntry] = Field(default_factory=list)
    parameters: Dict[str, Any] = Field(default_factory=dict, description="configuration overrides, same shape as the YAML config")
    end_tick: int = Field(default=48, ge=0)
    enforcement_tick: int = Field(default=0, ge=0, description="campaigns before this tick run without a scrub token")

    @model_validator(mode="after")
    def _consistent(self) -> "ScenarioConfig":
        ids = [node.id for node in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("node ids must be unique")
        roles = {node.role for node in self.nodes}
        for needed in (Role.OPERATOR, Role.SCRUBBER, Role.OBSERVER):
            if needed not in roles:
                raise ValueError(f"a consortium needs at least one {needed.value}")
        known = set(ids) | {e.tm_id for e in self.workload if isinstance(e, RegisterTelemarketerEvent)}
        for fault in self.fault_injections:
            if fault.node not in known:
                raise ValueError(f"fault names unknown node {fault.node}")
        for event in self.workload:
            for subscriber in _subscriber_refs(event):
                if subscriber >= self.subscribers.count:
                    raise ValueError(f"event at tick {event.tick} names subscriber {subscriber} of {self.subscribers.count}")
        return self

    @property
    def operators(self) -> List[str]:
        return sorted(node.id for node in self.nodes if node.role == Role.OPERATOR)

    def node(self, node_id: str) -> Optional[NodeSpec]:
        return next((n for n in self.nodes if n.id == node_id), None)


def _subscriber_refs(event) -> List[int]:
    if isinstance(event, (PreferenceEvent, RevokeConsentEvent, ComplaintEvent)):
        return [event.subscriber]
    if isinstance(event, ConsentEvent):
        return list(event.subscribers)
    return []


def parse_scenario(data: Dict[str, Any]) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigInvalid(f"invalid scenario: {exc}") from exc


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    try:
        with open(path) as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read scenario {path}: {exc}") from exc
    return parse_scenario(data)


def scenario_schema() -> Dict[str, Any]:
    return ScenarioConfig.model_json_schema()

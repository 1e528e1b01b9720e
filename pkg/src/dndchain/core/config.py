import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import yaml

from dndchain.core.errors import ConfigInvalid

DEFAULT_POLICY = "MAJORITY"

DEFAULT_POLICIES: Dict[str, str] = {
    "RegisterPrincipalEntity": "AND(ALL(telemarketer), AT_LEAST(1, observer), AT_LEAST(1, operator))",
    "RegisterHeader": "AND(ALL(telemarketer), AT_LEAST(1, observer), AT_LEAST(1, operator))",
}


@dataclass
class LedgerConfig:
    """Ordering, endorsement and retry parameters"""
    max_batch_size: int = 10
    batch_timeout: int = 2  # ticks
    max_retries: int = 3
    default_policy: str = DEFAULT_POLICY
    policies: Dict[str, str] = field(default_factory=lambda: dict(DEFAULT_POLICIES))

    def policy_expression(self, tx_type: str) -> str:
        return self.policies.get(tx_type, self.default_policy)


@dataclass
class CryptoConfig:
    """Primitive names and the consortium keyed-hash secret"""
    hash_algorithm: str = "sha256"
    signature_scheme: str = "ed25519"
    consortium_key: str = "dnd-consortium-secret"

    @property
    def key_bytes(self) -> bytes:
        return self.consortium_key.encode("utf-8")


@dataclass
class RegistryConfig:
    """Header, template, preference and consent registry parameters"""
    lookalike_threshold: int = 2
    otp_ttl: int = 600  # ticks
    otp_digits: int = 6
    consent_overrides_full_block: bool = True


@dataclass
class ScrubConfig:
    """Scrubbing service parameters"""
    min_batch_size: int = 100
    prefix_table: Dict[str, str] = field(default_factory=dict)  # national prefix -> operator id
    default_operator: str = ""
    store_root: Optional[str] = None


@dataclass
class CampaignConfig:
    """Delivery, complaint and watch-list parameters"""
    thresholds: List[int] = field(default_factory=lambda: [10, 25, 50])
    day_ticks: int = 24
    window_start: int = 9
    window_end: int = 21
    complaint_window_blocks: int = 2  # block intervals either side of a complaint
    p2p_daily_cap: int = 200
    delivery_success_prob: float = 1.0


@dataclass
class MetricsConfig:
    """Windowing for emitted series"""
    window_ticks: int = 24
    rolling_campaigns: int = 3


class ChainConfig:
    """Global dndchain configuration"""
    def __init__(self):
        self.ledger = LedgerConfig()
        self.crypto = CryptoConfig(
            consortium_key=os.getenv("DNDCHAIN_CONSORTIUM_KEY", CryptoConfig.consortium_key)
        )
        self.registry = RegistryConfig()
        self.scrub = ScrubConfig()
        self.campaign = CampaignConfig()
        self.metrics = MetricsConfig()
        self.log_level = os.getenv("DNDCHAIN_LOG_LEVEL", "INFO")

    @property
    def is_valid(self) -> bool:
        """Check if configuration is internally consistent"""
        try:
            self.validate()
        except ConfigInvalid:
            return False
        return True

    def validate(self) -> None:
        if self.ledger.max_batch_size < 1:
            raise ConfigInvalid("ledger.max_batch_size must be at least 1")
        if self.ledger.batch_timeout < 0:
            raise ConfigInvalid("ledger.batch_timeout must not be negative")
        if self.crypto.hash_algorithm != "sha256" or self.crypto.signature_scheme != "ed25519":
            raise ConfigInvalid("only sha256 and ed25519 are supported")
        if not self.crypto.consortium_key:
            raise ConfigInvalid("crypto.consortium_key must not be empty")
        if self.registry.lookalike_threshold < 0:
            raise ConfigInvalid("registry.lookalike_threshold must not be negative")
        thresholds = self.campaign.thresholds
        if len(thresholds) != 3 or any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise ConfigInvalid("campaign.thresholds must be three increasing counts")
        if not 0 <= self.campaign.window_start < self.campaign.window_end <= self.campaign.day_ticks:
            raise ConfigInvalid("campaign delivery window must lie inside one day")
        if self.campaign.complaint_window_blocks < 0:
            raise ConfigInvalid("campaign.complaint_window_blocks must not be negative")
        if not 0.0 <= self.campaign.delivery_success_prob <= 1.0:
            raise ConfigInvalid("campaign.delivery_success_prob must be a probability")
        # late import: policy parsing lives in the ledger package
        from dndchain.ledger.policy import parse_policy

        for expression in [self.ledger.default_policy, *self.ledger.policies.values()]:
            parse_policy(expression)

    def to_dict(self) -> Dict:
        """Convert configuration to dictionary"""
        return {
            "ledger": asdict(self.ledger),
            "crypto": asdict(self.crypto),
            "registry": asdict(self.registry),
            "scrub": asdict(self.scrub),
            "campaign": asdict(self.campaign),
            "metrics": asdict(self.metrics),
            "log_level": self.log_level,
        }

    @classmethod
    def from_dict(cls, config_dict: Dict) -> "ChainConfig":
        """Create configuration from dictionary, missing keys keep their defaults"""
        config = cls()
        try:
            config.ledger = _merge(LedgerConfig, config.ledger, config_dict.get("ledger"))
            config.crypto = _merge(CryptoConfig, config.crypto, config_dict.get("crypto"))
            config.registry = _merge(RegistryConfig, config.registry, config_dict.get("registry"))
            config.scrub = _merge(ScrubConfig, config.scrub, config_dict.get("scrub"))
            config.campaign = _merge(CampaignConfig, config.campaign, config_dict.get("campaign"))
            config.metrics = _merge(MetricsConfig, config.metrics, config_dict.get("metrics"))
        except TypeError as exc:
            raise ConfigInvalid(f"unknown configuration key: {exc}") from exc
        config.log_level = config_dict.get("log_level", config.log_level)
        config.validate()
        return config


def _merge(section_type, current, overrides: Optional[Dict]):
    if not overrides:
        return current
    values = asdict(current)
    if "policies" in overrides and "policies" in values:
        values["policies"] = {**values["policies"], **overrides["policies"]}
        overrides = {k: v for k, v in overrides.items() if k != "policies"}
    values.update(overrides)
    return section_type(**values)


def load_config(path: Optional[Union[str, Path]] = None) -> ChainConfig:
    """Load defaults, then merge a YAML override file if one is given"""
    if path is None:
        return ChainConfig.from_dict({})
    try:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigInvalid(f"config {path} must be a mapping")
    return ChainConfig.from_dict(data)

"""Metrics recomputed from the committed chain, with the delivery trace for SMS volume."""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Union

import numpy as np
import pandas as pd

from dndchain.campaign.trace import DeliveryRow
from dndchain.core.config import ChainConfig
from dndchain.core.errors import DivisionWindowEmpty
from dndchain.ledger.state import replay_state
from dndchain.ledger.types import Block, TxType

logger = logging.getLogger(__name__)

SCRUB_COLUMNS = {
    "campaign_id": "object",
    "tm_id": "object",
    "header": "object",
    "init_tick": "int64",
    "submitted": "int64",
    "delivered": "int64",
    "success_rate": "float64",
    "rolling_success_rate": "float64",
}
COMPLAINT_COLUMNS = {
    "window": "int64",
    "start_tick": "int64",
    "end_tick": "int64",
    "messages": "int64",
    "rtm_complaints": "int64",
    "utm_complaints": "int64",
    "rtm_per_million": "float64",
    "utm_per_million": "float64",
}
LATENCY_COLUMNS = {
    "tx_id": "object",
    "hashed_key": "object",
    "submitted_height": "int64",
    "committed_height": "int64",
    "latency_blocks": "int64",
}
REGISTRATION_COLUMNS = {
    "window": "int64",
    "end_tick": "int64",
    "telemarketers": "int64",
    "principal_entities": "int64",
    "headers": "int64",
    "templates": "int64",
    "preferences": "int64",
    "consents": "int64",
}

# registration series column -> transaction kinds counted in it
_REGISTRATION_KINDS = {
    "telemarketers": (TxType.REGISTER_TELEMARKETER,),
    "principal_entities": (TxType.REGISTER_PRINCIPAL_ENTITY,),
    "headers": (TxType.REGISTER_HEADER,),
    "templates": (TxType.REGISTER_TEMPLATE, TxType.REGISTER_CONSENT_TEMPLATE),
    "preferences": (TxType.UPDATE_PREFERENCE,),
    "consents": (TxType.GRANT_CONSENT,),
}


def typed_frame(rows: Iterable[Dict], columns: Dict[str, str]) -> pd.DataFrame:
    frame = pd.DataFrame(list(rows), columns=list(columns))
    return frame.astype(columns)


@dataclass
class MetricsReport:
    scrub_success: pd.DataFrame = field(default_factory=lambda: typed_frame([], SCRUB_COLUMNS))
    complaints_per_million: pd.DataFrame = field(default_factory=lambda: typed_frame([], COMPLAINT_COLUMNS))
    preference_latency: pd.DataFrame = field(default_factory=lambda: typed_frame([], LATENCY_COLUMNS))
    registrations: pd.DataFrame = field(default_factory=lambda: typed_frame([], REGISTRATION_COLUMNS))

    def frames(self) -> Dict[str, pd.DataFrame]:
        return {
            "scrub_success": self.scrub_success,
            "complaints_per_million": self.complaints_per_million,
            "preference_latency": self.preference_latency,
            "registrations": self.registrations,
        }

    def equals(self, other: "MetricsReport") -> bool:
        return all(frame.equals(other.frames()[name]) for name, frame in self.frames().items())

    @property
    def is_empty(self) -> bool:
        return all(frame.empty for frame in self.frames().values())


def success_rate(submitted: int, delivered: int) -> float:
    """Percentage of the submitted list that was delivered; NaN when nothing was submitted."""
    if submitted <= 0:
        return float("nan")
    return delivered * 100 / submitted


def compute_scrub_success_rate(campaigns: pd.DataFrame, rolling: int = 3) -> pd.DataFrame:
    """Per-campaign and rolling success rates, in (init_tick, campaign_id) order."""
    frame = campaigns.sort_values(["init_tick", "campaign_id"], kind="mergesort").reset_index(drop=True)
    frame["success_rate"] = [success_rate(s, d) for s, d in zip(frame["submitted"], frame["delivered"])]
    frame["success_rate"] = frame["success_rate"].astype("float64")
    frame["rolling_success_rate"] = frame["success_rate"].rolling(rolling, min_periods=1).mean()
    return frame.astype(SCRUB_COLUMNS)[list(SCRUB_COLUMNS)]


def campaign_outcomes(blocks: Sequence[Block]) -> pd.DataFrame:
    """submitted (scrub input size) and delivered (reported legs) per on-chain campaign."""
    state = replay_state(blocks)
    rows = []
    for _, record in state.records("campaign/"):
        delivered = sum(leg["delivered"] for leg in record["legs"].values() if leg)
        rows.append(
            {
                "campaign_id": record["campaign_id"],
                "tm_id": record["tm_id"],
                "header": record["header"],
                "init_tick": record["init_tick"],
                "submitted": record["submitted"],
                "delivered": delivered,
            }
        )
    return pd.DataFrame(rows, columns=["campaign_id", "tm_id", "header", "init_tick", "submitted", "delivered"]).astype(
        {"init_tick": "int64", "submitted": "int64", "delivered": "int64"}
    )


def compute_complaints_per_million(
    complaints: Union[int, Sequence[int], np.ndarray], messages: Union[int, Sequence[int], np.ndarray]
) -> Union[float, np.ndarray]:
    """complaints x 10^6 / messages, window by window."""
    complaints_arr = np.asarray(complaints, dtype=np.int64)
    messages_arr = np.asarray(messages, dtype=np.int64)
    if complaints_arr.shape != messages_arr.shape:
        raise ValueError("complaint and message series must be aligned")
    if np.any(messages_arr <= 0):
        raise DivisionWindowEmpty("a window carries no messages")
    rates = complaints_arr * 1_000_000 / messages_arr
    return float(rates) if rates.ndim == 0 else rates


def message_volume(trace: Iterable[DeliveryRow], window_ticks: int) -> Counter:
    return Counter(row.tick // window_ticks for row in trace if row.delivered)


def complaint_counts(blocks: Sequence[Block], window_ticks: int) -> Dict[str, Counter]:
    state = replay_state(blocks)
    counts = {"RTM": Counter(), "UTM": Counter()}
    for _, record in state.records("complaint/"):
        counts[record["class"]][record["received_tick"] // window_ticks] += 1
    return counts


def complaints_frame(blocks: Sequence[Block], trace: Iterable[DeliveryRow], window_ticks: int) -> pd.DataFrame:
    volume = message_volume(trace, window_ticks)
    counts = complaint_counts(blocks, window_ticks)
    windows = sorted(set(volume) | set(counts["RTM"]) | set(counts["UTM"]))
    if not windows:
        return typed_frame([], COMPLAINT_COLUMNS)
    rows = []
    for window in range(windows[0], windows[-1] + 1):
        messages, rtm, utm = volume[window], counts["RTM"][window], counts["UTM"][window]
        if messages:
            rtm_rate, utm_rate = compute_complaints_per_million([rtm, utm], [messages, messages])
        else:
            rtm_rate = utm_rate = float("nan")
            if rtm or utm:
                logger.warning(f"window {window} has {rtm + utm} complaints but no messages")
        rows.append(
            {
                "window": window,
                "start_tick": window * window_ticks,
                "end_tick": (window + 1) * window_ticks - 1,
                "messages": messages,
                "rtm_complaints": rtm,
                "utm_complaints": utm,
                "rtm_per_million": rtm_rate,
                "utm_per_million": utm_rate,
            }
        )
    return typed_frame(rows, COMPLAINT_COLUMNS)


def preference_latency_frame(blocks: Sequence[Block]) -> pd.DataFrame:
    """Blocks between the height a preference update was proposed against and its commit."""
    rows = []
    for block in blocks:
        for _, envelope in block.valid_transactions():
            if envelope.payload.tx_type != TxType.UPDATE_PREFERENCE:
                continue
            args = envelope.payload.arguments()
            submitted = args.get("submitted_height", block.height - 1)
            rows.append(
                {
                    "tx_id": envelope.tx_id,
                    "hashed_key": args["hashed_key"],
                    "submitted_height": submitted,
                    "committed_height": block.height,
                    "latency_blocks": block.height - submitted,
                }
            )
    return typed_frame(rows, LATENCY_COLUMNS)


def registrations_frame(blocks: Sequence[Block], window_ticks: int) -> pd.DataFrame:
    """Cumulative committed registrations at the end of each window."""
    per_window: Dict[int, Counter] = {}
    preference_keys = set()
    for block in blocks:
        if block.is_genesis:
            continue
        for _, envelope in block.valid_transactions():
            payload = envelope.payload
            for column, kinds in _REGISTRATION_KINDS.items():
                if payload.tx_type not in kinds:
                    continue
                if column == "preferences":
                    key = payload.arguments()["hashed_key"]
                    if key in preference_keys:
                        continue
                    preference_keys.add(key)
                per_window.setdefault(payload.timestamp // window_ticks, Counter())[column] += 1
    if not per_window:
        return typed_frame([], REGISTRATION_COLUMNS)
    rows: List[Dict] = []
    running: Counter = Counter()
    for window in range(min(per_window), max(per_window) + 1):
        running.update(per_window.get(window, Counter()))
        rows.append(
            {"window": window, "end_tick": (window + 1) * window_ticks - 1, **{c: running[c] for c in _REGISTRATION_KINDS}}
        )
    return typed_frame(rows, REGISTRATION_COLUMNS)


def build_report(blocks: Sequence[Block], trace: Iterable[DeliveryRow], config: ChainConfig) -> MetricsReport:
    trace = list(trace)
    window = config.metrics.window_ticks
    return MetricsReport(
        scrub_success=compute_scrub_success_rate(campaign_outcomes(blocks), config.metrics.rolling_campaigns),
        complaints_per_million=complaints_frame(blocks, trace, window),
        preference_latency=preference_latency_frame(blocks),
        registrations=registrations_frame(blocks, window),
    )

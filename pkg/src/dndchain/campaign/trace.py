"""Delivery trace: one row per attempted message."""

from dataclasses import astuple, dataclass
from pathlib import Path
from typing import Iterable, List, Union

import pandas as pd

from dndchain.core.errors import IoFailure
from dndchain.core.fileio import atomic_write_text

TRACE_COLUMNS = ["campaign_id", "operator", "hashed_key", "tick", "delivered"]

LEGACY_PREFIX = "LEGACY-"
P2P_PREFIX = "P2P-"


@dataclass(frozen=True)
class DeliveryRow:
    campaign_id: str
    operator: str
    hashed_key: str
    tick: int
    delivered: bool


def legacy_campaign_id(header: str, sequence: int) -> str:
    """Id for campaigns delivered without a scrub token."""
    return f"{LEGACY_PREFIX}{header}-{sequence:04d}"


def legacy_header(campaign_id: str) -> str:
    return campaign_id[len(LEGACY_PREFIX):].rsplit("-", 1)[0]


def trace_frame(rows: Iterable[DeliveryRow]) -> pd.DataFrame:
    frame = pd.DataFrame([astuple(r) for r in rows], columns=TRACE_COLUMNS)
    return frame.astype({"tick": "int64", "delivered": "bool"})


def write_trace(rows: Iterable[DeliveryRow], path: Union[str, Path]) -> None:
    atomic_write_text(path, trace_frame(rows).to_csv(index=False))


def read_trace(path: Union[str, Path]) -> List[DeliveryRow]:
    try:
        frame = pd.read_csv(path, dtype={"campaign_id": str, "operator": str, "hashed_key": str})
    except (OSError, pd.errors.ParserError) as exc:
        raise IoFailure(f"cannot read trace {path}: {exc}") from exc
    return [
        DeliveryRow(r.campaign_id, r.operator, r.hashed_key, int(r.tick), bool(r.delivered))
        for r in frame.itertuples(index=False)
    ]

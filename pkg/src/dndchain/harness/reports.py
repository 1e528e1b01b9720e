"""CSV emission and loading for metrics, verdicts and the delivery trace.

File                          Columns
scrub_success_rate.csv        campaign_id, tm_id, header, init_tick, submitted, delivered,
                              success_rate, rolling_success_rate
complaints_per_million.csv    window, start_tick, end_tick, messages, rtm_complaints,
                              utm_complaints, rtm_per_million, utm_per_million
preference_latency.csv        tx_id, hashed_key, submitted_height, committed_height, latency_blocks
registrations.csv             window, end_tick, telemarketers, principal_entities, headers,
                              templates, preferences, consents

Rates are percentages or per-million figures; an empty cell means the rate is undefined for
that row (nothing submitted, or no messages in the window).
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Union

import pandas as pd

from dndchain.campaign.audit import AuditVerdict
from dndchain.core.errors import IoFailure
from dndchain.core.fileio import atomic_write_text
from dndchain.harness.metrics import (
    COMPLAINT_COLUMNS,
    LATENCY_COLUMNS,
    REGISTRATION_COLUMNS,
    SCRUB_COLUMNS,
    MetricsReport,
    typed_frame,
)

logger = logging.getLogger(__name__)

REPORT_FILES: Dict[str, tuple] = {
    "scrub_success": ("scrub_success_rate.csv", SCRUB_COLUMNS),
    "complaints_per_million": ("complaints_per_million.csv", COMPLAINT_COLUMNS),
    "preference_latency": ("preference_latency.csv", LATENCY_COLUMNS),
    "registrations": ("registrations.csv", REGISTRATION_COLUMNS),
}

VERDICT_FILE = "verdicts.csv"
VERDICT_COLUMNS = {
    "complaint_id": "object",
    "verdict": "object",
    "campaign_id": "object",
    "operator": "object",
    "notes": "object",
}


def _write_frame(frame: pd.DataFrame, path: Path) -> None:
    atomic_write_text(path, frame.to_csv(index=False))


def _read_frame(path: Path, columns: Dict[str, str]) -> pd.DataFrame:
    strings = {name: str for name, kind in columns.items() if kind == "object"}
    try:
        frame = pd.read_csv(path, dtype=strings, keep_default_na=True, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if list(frame.columns) != list(columns):
        raise IoFailure(f"{path} has columns {list(frame.columns)}, expected {list(columns)}")
    return frame.astype(columns)


def emit_reports(report: MetricsReport, out_dir: Union[str, Path]) -> List[Path]:
    """One CSV per metric; each file is replaced atomically."""
    out = Path(out_dir)
    written = []
    for name, frame in report.frames().items():
        filename, columns = REPORT_FILES[name]
        path = out / filename
        _write_frame(frame[list(columns)], path)
        written.append(path)
    logger.info(f"wrote {len(written)} metric files to {out}")
    return written


def load_reports(out_dir: Union[str, Path]) -> MetricsReport:
    out = Path(out_dir)
    frames = {name: _read_frame(out / filename, columns) for name, (filename, columns) in REPORT_FILES.items()}
    return MetricsReport(**frames)


def verdict_frame(verdicts: Iterable[AuditVerdict]) -> pd.DataFrame:
    rows = [
        {
            "complaint_id": v.complaint_id,
            "verdict": v.verdict.value,
            "campaign_id": v.campaign_id,
            "operator": v.operator,
            "notes": "; ".join(v.notes),
        }
        for v in verdicts
    ]
    return typed_frame(rows, VERDICT_COLUMNS)


def write_verdicts(verdicts: Iterable[AuditVerdict], out_dir: Union[str, Path]) -> Path:
    path = Path(out_dir) / VERDICT_FILE
    _write_frame(verdict_frame(verdicts), path)
    return path


def read_verdicts(path: Union[str, Path]) -> pd.DataFrame:
    return _read_frame(Path(path), VERDICT_COLUMNS).fillna("")

"""Daily send caps for ordinary (P2P) lines."""

from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

DEFAULT_DAILY_CAP = 200


@dataclass(frozen=True)
class RateFlag:
    line: str  # hashed key of the sending number
    day: int
    sends: int


def detect_utm_rate_violation(
    line: str, send_ticks: Sequence[int], cap: int = DEFAULT_DAILY_CAP, day_ticks: int = 24
) -> Optional[RateFlag]:
    """First day window in which ``line`` sent more than ``cap`` messages, if any."""
    if len(send_ticks) <= cap:
        return None
    per_day = np.bincount(np.asarray(send_ticks, dtype=np.int64) // day_ticks)
    over = np.flatnonzero(per_day > cap)
    if over.size == 0:
        return None
    day = int(over[0])
    return RateFlag(line, day, int(per_day[day]))


class P2PLedger:
    """Send ticks per line, as reported by the originating operators."""

    def __init__(self, cap: int = DEFAULT_DAILY_CAP, day_ticks: int = 24):
        self.cap = cap
        self.day_ticks = day_ticks
        self._sends: Dict[str, List[int]] = defaultdict(list)
        self._flagged: Dict[str, RateFlag] = {}

    def record(self, line: str, tick: int, count: int = 1) -> None:
        self._sends[line].extend([tick] * count)

    def sends(self, line: str) -> List[int]:
        return list(self._sends.get(line, ()))

    def new_flags(self) -> List[RateFlag]:
        """Lines over the cap that were not flagged before, in line order."""
        flags = []
        for line in sorted(self._sends):
            if line in self._flagged:
                continue
            flag = detect_utm_rate_violation(line, self._sends[line], self.cap, self.day_ticks)
            if flag is not None:
                self._flagged[line] = flag
                flags.append(flag)
        return flags

    @property
    def flagged(self) -> Iterable[RateFlag]:
        return self._flagged.values()

"""Promotional categories and sub-category paths.

Codes 1-7 are stable. A sub-category is a slash path under a top-level category
(``Health/Pharmacy``); blocking a path blocks every path below it.
"""

import re
from enum import Enum, IntEnum
from typing import Iterable, List, Tuple, Union

from dndchain.core.errors import RejectReason, ValidatorRejected


class Category(IntEnum):
    BANKING = 1  # banking, insurance, financial products, credit cards
    REAL_ESTATE = 2
    EDUCATION = 3
    HEALTH = 4
    CONSUMER_GOODS = 5  # consumer goods and automobiles
    COMMUNICATION = 6  # communication, broadcasting, entertainment, IT
    TOURISM = 7  # tourism and leisure

    @property
    def path(self) -> str:
        return CATEGORY_NAMES[self]


CATEGORY_NAMES = {
    Category.BANKING: "Banking",
    Category.REAL_ESTATE: "RealEstate",
    Category.EDUCATION: "Education",
    Category.HEALTH: "Health",
    Category.CONSUMER_GOODS: "ConsumerGoods",
    Category.COMMUNICATION: "Communication",
    Category.TOURISM: "Tourism",
}

_BY_NAME = {name.lower(): category for category, name in CATEGORY_NAMES.items()}
_SEGMENT = re.compile(r"^[A-Za-z0-9][A-Za-z0-9 _\-]*$")

ALL_CATEGORY_PATHS: Tuple[str, ...] = tuple(CATEGORY_NAMES[c] for c in Category)


class PreferenceMode(str, Enum):
    FULLY_OPEN = "fully_open"
    FULLY_BLOCKED = "fully_blocked"
    PARTIAL = "partial"


def parse_category(value: Union[str, int, Category]) -> str:
    """Canonical path for a code, a name or a slash path."""
    if isinstance(value, bool):
        raise ValidatorRejected(RejectReason.UNKNOWN_CATEGORY, repr(value))
    if isinstance(value, int):
        try:
            return Category(value).path
        except ValueError:
            raise ValidatorRejected(RejectReason.UNKNOWN_CATEGORY, str(value)) from None
    if not isinstance(value, str) or not value.strip():
        raise ValidatorRejected(RejectReason.UNKNOWN_CATEGORY, repr(value))
    head, *rest = [segment.strip() for segment in value.strip().split("/")]
    if head.isdigit():
        top = parse_category(int(head))
    elif head.lower() in _BY_NAME:
        top = _BY_NAME[head.lower()].path
    else:
        raise ValidatorRejected(RejectReason.UNKNOWN_CATEGORY, value)
    for segment in rest:
        if not _SEGMENT.match(segment):
            raise ValidatorRejected(RejectReason.UNKNOWN_CATEGORY, value)
    return "/".join([top, *rest])


def normalize_categories(values: Iterable[Union[str, int]]) -> List[str]:
    return sorted({parse_category(v) for v in values})


def category_blocked(category: str, blocked: Iterable[str]) -> bool:
    return any(category == path or category.startswith(path + "/") for path in blocked)


def blocked_set_for(mode: PreferenceMode, categories: Iterable[Union[str, int]]) -> List[str]:
    mode = PreferenceMode(mode)
    if mode == PreferenceMode.FULLY_BLOCKED:
        return list(ALL_CATEGORY_PATHS)
    if mode == PreferenceMode.FULLY_OPEN:
        return []
    return normalize_categories(categories)

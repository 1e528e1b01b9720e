import logging
from typing import Optional

from rich.logging import RichHandler

LOG_FORMAT = "%(name)s - %(message)s"


def setup_logging(level: Optional[str] = None) -> None:
    """Install a single rich handler on the root logger."""
    root = logging.getLogger()
    for handler in list(root.handlers):
        if isinstance(handler, RichHandler):
            root.removeHandler(handler)
    handler = RichHandler(rich_tracebacks=True, show_path=False)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel((level or "INFO").upper())

from __future__ import annotations

import logging
import re
import sys
import time


class NumericFilter(logging.Filter):
    """Shorten long float reprs in log records to 6 significant digits."""

    _FLOAT = re.compile(r"(?<![\w.])-?\d+\.\d{7,}(?:[eE][-+]?\d+)?")

    def filter(self, record: logging.LogRecord) -> bool:
        msg = record.getMessage()
        record.msg = self._FLOAT.sub(lambda match: f"{float(match.group(0)):.6g}", msg)
        record.args = None
        return True


def configure_logging(level: str) -> None:
    logging.Formatter.converter = time.gmtime

    handler = logging.StreamHandler(sys.stderr)
    handler.addFilter(NumericFilter())
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)sZ | %(levelname)s | %(name)s | %(message)s",
        datefmt="%Y-%m-%dT%H:%M:%S",
        handlers=[handler],
        force=True,
    )

    logging.captureWarnings(True)

#!/usr/bin/env python3
"""JSON-lines logging on stderr; stdout is reserved for the report payload."""

from __future__ import annotations

import json
import logging
import os
import sys
from typing import Any, TextIO


_RESERVED = set(vars(logging.LogRecord("x", logging.INFO, "x", 0, "x", None, None))) | {"message", "asctime"}


class JsonLineFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        payload: dict[str, Any] = {
            "ts": self.formatTime(record, "%Y-%m-%dT%H:%M:%S"),
            "level": record.levelname.lower(),
            "logger": record.name,
            "msg": record.getMessage(),
        }
        for key, value in vars(record).items():
            if key not in _RESERVED and not key.startswith("_"):
                payload[key] = value
        if record.exc_info:
            payload["exc"] = self.formatException(record.exc_info)
        return json.dumps(payload, ensure_ascii=False, default=str)


def default_level() -> str:
    return os.environ.get("AFP_LOG_LEVEL", "WARNING").strip().upper() or "WARNING"


def configure_logging(level: str | None = None, stream: TextIO | None = None) -> None:
    resolved = (level or default_level()).upper()
    if not isinstance(logging.getLevelName(resolved), int):
        raise ValueError(f"unknown log level: {resolved}")
    handler = logging.StreamHandler(stream or sys.stderr)
    handler.setFormatter(JsonLineFormatter())
    root = logging.getLogger()
    for old in list(root.handlers):
        root.removeHandler(old)
    root.addHandler(handler)
    root.setLevel(resolved)

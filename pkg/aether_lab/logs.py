from __future__ import annotations

import json
import time
from pathlib import Path
from typing import Any

LOG_FILE: Path | None = None


def set_log_file(path: Path | None) -> None:
    global LOG_FILE
    LOG_FILE = path


def log_event(level: str, logger: str, message: str, **fields: Any) -> None:
    """Append a structured JSONL entry to the configured log file."""
    if LOG_FILE is None:
        return
    entry = {
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "level": level,
        "logger": logger,
        "message": message,
        **fields,
    }
    try:
        LOG_FILE.parent.mkdir(parents=True, exist_ok=True)
        with LOG_FILE.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(entry, ensure_ascii=False, default=float) + "\n")
    except Exception:
        pass

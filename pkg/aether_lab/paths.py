from __future__ import annotations

import os
from pathlib import Path

DEFAULT_OUTPUT_DIR = "aether-lab-out"
LOG_NAME = "aether-lab.log"


def output_dir(arg: str | None, configured: str | None = None) -> Path:
    if arg:
        return Path(arg).expanduser()
    override = os.environ.get("AETHER_LAB_OUT")
    if override:
        return Path(override).expanduser()
    return Path(configured or DEFAULT_OUTPUT_DIR).expanduser()


def log_path(out_dir: Path) -> Path:
    override = os.environ.get("AETHER_LAB_LOG")
    if override:
        return Path(override).expanduser()
    return out_dir / LOG_NAME


def template_path() -> Path:
    return Path(__file__).with_name("default_config.json")

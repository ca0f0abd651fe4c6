from __future__ import annotations

import csv
import io
import json
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

from . import FORMAT_VERSION, __version__
from .config import RunConfig, config_from_dict, config_to_dict
from .errors import ConfigError

PROVENANCE_START = "# aether-lab:provenance-start"
PROVENANCE_END = "# aether-lab:provenance-end"
CONFIG_PREFIX = "# config: "


def render_provenance(config: RunConfig) -> list[str]:
    lines = [PROVENANCE_START, f"# version: {__version__} (format {FORMAT_VERSION})"]
    lines.append(CONFIG_PREFIX + json.dumps(config_to_dict(config), sort_keys=True))
    for name, phase in (("phase1", config.phase1), ("phase2", config.phase2)):
        lines.append(f"# {name}: lambda={phase.lam!r} mu={phase.mu!r} rho={phase.rho!r}")
    lines.append(PROVENANCE_END)
    return lines


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_suffix(path.suffix + ".tmp")
    tmp_path.write_text(text, encoding="utf-8")
    tmp_path.replace(path)


def _cell(value: Any) -> Any:
    if isinstance(value, float):
        return repr(value)
    return value


def write_csv(
    path: Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    config: RunConfig,
) -> Path:
    buffer = io.StringIO()
    buffer.write("\r\n".join(render_provenance(config)) + "\r\n")
    writer = csv.writer(buffer, lineterminator="\r\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([_cell(value) for value in row])
    _atomic_write(path, buffer.getvalue())
    return path


def write_json(path: Path, payload: dict[str, Any], config: RunConfig) -> Path:
    document = {
        "provenance": {
            "version": __version__,
            "format": FORMAT_VERSION,
            "config": config_to_dict(config),
        },
        **payload,
    }
    _atomic_write(path, json.dumps(document, indent=2, sort_keys=True) + "\n")
    return path


def read_provenance(path: Path) -> RunConfig:
    """Re-parse the RunConfig recorded in a CSV or JSON output file."""
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        try:
            return config_from_dict(json.loads(text)["provenance"]["config"])
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ConfigError("provenance", f"no provenance in {path}") from exc

    in_block = False
    for line in text.splitlines():
        stripped = line.strip()
        if stripped == PROVENANCE_START:
            in_block = True
            continue
        if stripped == PROVENANCE_END:
            break
        if in_block and stripped.startswith(CONFIG_PREFIX):
            return config_from_dict(json.loads(stripped[len(CONFIG_PREFIX) :]))
    raise ConfigError("provenance", f"no provenance block in {path}")


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    text = path.read_text(encoding="utf-8")
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        return [], []
    return rows[0], rows[1:]

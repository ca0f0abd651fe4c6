from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import pytest

from aether_lab import __version__
from aether_lab.config import DEFAULT_CONFIG
from aether_lab.errors import ConfigError
from aether_lab.results import (
    PROVENANCE_END,
    PROVENANCE_START,
    read_csv,
    read_provenance,
    render_provenance,
    write_csv,
    write_json,
)

CONFIG = replace(DEFAULT_CONFIG, command="theta-sweep", thetas=[0.3, 0.5])


def test_provenance_block_lists_version_and_phases():
    lines = render_provenance(CONFIG)
    assert lines[0] == PROVENANCE_START
    assert lines[-1] == PROVENANCE_END
    assert __version__ in lines[1]
    assert "# phase2: lambda=-3.0 mu=2.0 rho=1.0" in lines
    assert all(line.startswith("#") for line in lines)


def test_csv_round_trips_config(tmp_path: Path):
    rows = [[0.3, 1], [0.5, 0.0]]
    path = write_csv(tmp_path / "out" / "table.csv", ("theta", "value"), rows, CONFIG)
    assert read_provenance(path) == CONFIG
    header, rows = read_csv(path)
    assert header == ["theta", "value"]
    assert rows == [["0.3", "1"], ["0.5", "0.0"]]


def test_csv_uses_crlf_and_leaves_no_temp_file(tmp_path: Path):
    path = write_csv(tmp_path / "table.csv", ("a",), [[1.0 / 3.0]], CONFIG)
    raw = path.read_bytes()
    assert raw.count(b"\r\n") == raw.count(b"\n")
    assert float(read_csv(path)[1][0][0]) == 1.0 / 3.0
    assert list(tmp_path.iterdir()) == [path]


def test_csv_quotes_fields_with_commas(tmp_path: Path):
    path = write_csv(tmp_path / "t.csv", ("name",), [["a, b"]], CONFIG)
    assert read_csv(path)[1] == [["a, b"]]


def test_json_round_trips_config(tmp_path: Path):
    path = write_json(tmp_path / "result.json", {"value": 1.5}, CONFIG)
    document = json.loads(path.read_text(encoding="utf-8"))
    assert document["value"] == 1.5
    assert document["provenance"]["version"] == __version__
    assert read_provenance(path) == CONFIG


def test_read_provenance_requires_block(tmp_path: Path):
    plain = tmp_path / "plain.csv"
    plain.write_text("a,b\r\n1,2\r\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        read_provenance(plain)
    bare = tmp_path / "bare.json"
    bare.write_text("{}", encoding="utf-8")
    with pytest.raises(ConfigError):
        read_provenance(bare)

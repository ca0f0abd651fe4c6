from __future__ import annotations

from pathlib import Path

from aether_lab.paths import log_path, output_dir, template_path


def test_output_dir_precedence(monkeypatch, tmp_path: Path):
    monkeypatch.delenv("AETHER_LAB_OUT", raising=False)
    assert output_dir(None) == Path("aether-lab-out")
    assert output_dir(None, "from-config") == Path("from-config")

    monkeypatch.setenv("AETHER_LAB_OUT", str(tmp_path / "env"))
    assert output_dir(None, "from-config") == tmp_path / "env"
    assert output_dir(str(tmp_path / "arg"), "from-config") == tmp_path / "arg"


def test_log_path_override(monkeypatch, tmp_path: Path):
    monkeypatch.delenv("AETHER_LAB_LOG", raising=False)
    assert log_path(tmp_path) == tmp_path / "aether-lab.log"
    monkeypatch.setenv("AETHER_LAB_LOG", str(tmp_path / "custom.log"))
    assert log_path(tmp_path) == tmp_path / "custom.log"


def test_template_is_packaged():
    assert template_path().name == "default_config.json"
    assert template_path().is_file()

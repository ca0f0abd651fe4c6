from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import pytest

from aether_lab.cli import main, run
from aether_lab.config import DEFAULT_CONFIG, config_to_dict, with_command
from aether_lab.errors import SolverError
from aether_lab.results import read_csv, read_provenance


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    monkeypatch.delenv("AETHER_LAB_OUT", raising=False)
    monkeypatch.delenv("AETHER_LAB_LOG", raising=False)


def _write_config(tmp_path: Path, **sections: Any) -> Path:
    data = config_to_dict(DEFAULT_CONFIG)
    for key, value in sections.items():
        if isinstance(value, dict):
            data[key].update(value)
        else:
            data[key] = value
    path = tmp_path / "run.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def _run(command: str, config: Path, out: Path, *extra: str) -> int:
    return main([command, "--config", str(config), "--out", str(out), *extra])


def test_malformed_json_exits_2_without_files(tmp_path: Path, capsys):
    config = tmp_path / "broken.json"
    config.write_text("{not json", encoding="utf-8")
    out = tmp_path / "out"
    assert _run("homogenize", config, out) == 2
    assert "config" in capsys.readouterr().err
    assert not out.exists()


def test_unknown_key_names_field(tmp_path: Path, capsys):
    config = _write_config(tmp_path, grid={"nn": 4})
    out = tmp_path / "out"
    assert _run("homogenize", config, out) == 2
    assert "grid.nn" in capsys.readouterr().err
    assert not out.exists()


def test_unresolved_eps_is_rejected_before_writing(tmp_path: Path):
    config = _write_config(tmp_path, grid={"m": 16}, eps=[0.25])
    out = tmp_path / "out"
    assert _run("solve", config, out) == 2
    assert not out.exists()


def test_check_validates_without_writing(tmp_path: Path, capsys):
    config = _write_config(tmp_path)
    out = tmp_path / "out"
    assert _run("ellipticity", config, out, "--check") == 0
    printed = capsys.readouterr().out
    assert "Config OK: command=ellipticity" in printed
    assert "mu1 < mu2: pass" in printed
    assert not out.exists()


def test_init_writes_template_once(tmp_path: Path, capsys):
    assert main(["init", "--out", str(tmp_path)]) == 0
    created = tmp_path / "aether-lab.json"
    assert created.is_file()
    assert json.loads(created.read_text(encoding="utf-8")) == config_to_dict(DEFAULT_CONFIG)
    assert main(["init", "--out", str(tmp_path)]) == 0
    assert "Config already exists" in capsys.readouterr().out


def test_init_copies_packaged_template(tmp_path: Path, monkeypatch):
    template = _write_config(tmp_path, k_grid=90, eps=[0.5])
    monkeypatch.setattr("aether_lab.cli.template_path", lambda: template)
    out = tmp_path / "out"
    assert main(["init", "--out", str(out)]) == 0
    created = json.loads((out / "aether-lab.json").read_text(encoding="utf-8"))
    assert created["k_grid"] == 90
    assert created["eps"] == [0.5]


def test_ellipticity_outputs(tmp_path: Path):
    out = tmp_path / "out"
    assert _run("ellipticity", _write_config(tmp_path), out) == 0
    header, rows = read_csv(out / "hypotheses.csv")
    assert header == ["name", "passed", "residual"]
    assert [row[1] for row in rows] == ["True"] * 4
    header, rows = read_csv(out / "ellipticity.csv")
    assert header[:5] == ["phase", "lambda", "mu", "vse", "se"]
    assert float(rows[1][3]) == pytest.approx(-2.0)


def test_theta_sweep_ends_at_degeneracy(tmp_path: Path):
    out = tmp_path / "out"
    config = _write_config(tmp_path, thetas=[0.3, 0.4, 0.5])
    assert _run("theta-sweep", config, out) == 0
    path = out / "theta_sweep.csv"
    header, rows = read_csv(path)
    column = header.index("L2222")
    values = [float(row[column]) for row in rows]
    assert values[0] > values[1] > 0.0
    assert abs(values[2]) <= 1e-10
    recorded = read_provenance(path)
    assert recorded.command == "theta-sweep"
    assert recorded.thetas == [0.3, 0.4, 0.5]


def test_dispersion_zero_modes_across_layers(tmp_path: Path):
    out = tmp_path / "out"
    assert _run("dispersion", _write_config(tmp_path), out) == 0
    header, rows = read_csv(out / "dispersion.csv")
    assert header[:3] == ["angle", "omega1", "omega2"]
    assert len(rows) == 360
    zero_column = header.index("zero_mode")
    zeros = [row[0] for row in rows if row[zero_column] == "True"]
    assert zeros == ["90.0", "270.0"]
    assert float(rows[90][1]) == pytest.approx(0.0, abs=1e-6)


def test_homogenize_writes_tensor(tmp_path: Path):
    out = tmp_path / "out"
    config = _write_config(tmp_path, grid={"cell_n": 16}, solver={"lambda_per": True})
    assert _run("homogenize", config, out) == 0
    document = json.loads((out / "homogenized.json").read_text(encoding="utf-8"))
    assert document["tensor"]["1111"] == pytest.approx(1.5, abs=1e-8)
    assert document["tensor"]["2222"] == pytest.approx(0.0, abs=1e-8)
    assert document["laminate_deviation"] <= 1e-8
    assert document["lambda_per"] > 0.0
    assert (out / "homogenized.csv").is_file()
    log_lines = (out / "aether-lab.log").read_text(encoding="utf-8").splitlines()
    first = json.loads(log_lines[0])
    assert first["message"] == "command_start"
    assert first["command"] == "homogenize"


def test_solve_writes_fields(tmp_path: Path):
    out = tmp_path / "out"
    config = _write_config(tmp_path, grid={"m": 32}, eps=[0.25])
    assert _run("solve", config, out) == 0
    header, rows = read_csv(out / "solution_hom.csv")
    assert header == ["x", "y", "u1", "u2"]
    assert len(rows) == 33 * 33
    assert (out / "solution_eps_0.csv").is_file()
    _, summary = read_csv(out / "solve_summary.csv")
    assert [row[0] for row in summary] == ["hom", "eps_0"]


def test_converge_writes_table(tmp_path: Path):
    out = tmp_path / "out"
    config = _write_config(tmp_path, grid={"m": 64}, eps=[0.25, 0.125])
    assert _run("converge", config, out) == 0
    header, rows = read_csv(out / "convergence.csv")
    assert header == ["eps", "dofs", "d_weak", "energy"]
    assert [float(row[0]) for row in rows] == [0.25, 0.125]


def test_wave_writes_benchmark_and_energy(tmp_path: Path):
    out = tmp_path / "out"
    config = _write_config(tmp_path, wave={"ms": [16, 32], "snapshots": True})
    assert _run("wave", config, out) == 0
    header, rows = read_csv(out / "wave_benchmark.csv")
    assert header == ["m", "dt", "steps", "max_error", "drift"]
    assert [row[0] for row in rows] == ["16", "32"]
    assert read_csv(out / "energy.csv")[0] == ["t", "kinetic", "strain", "total"]
    assert (out / "snapshot_0.csv").is_file()


def test_solver_error_exits_1(tmp_path: Path, monkeypatch, capsys):
    def fail(*_args, **_kwargs):
        raise SolverError("did not converge", residuals=[1.0, 0.5])

    monkeypatch.setattr("aether_lab.cli.homogenized_tensor", fail)
    out = tmp_path / "out"
    assert _run("homogenize", _write_config(tmp_path), out) == 1
    assert "did not converge" in capsys.readouterr().err


def test_run_accepts_config_object(tmp_path: Path):
    out = tmp_path / "out"
    assert run(with_command(DEFAULT_CONFIG, "ellipticity"), out) == 0
    assert (out / "ellipticity.csv").is_file()
    assert (out / "aether-lab.log").is_file()


@pytest.mark.parametrize(
    ("sections", "field"),
    [
        ({"phases": {"phase2": {"lambda": -2.5, "mu": 2.0, "rho": 1.0}}}, "phases"),
        ({"phases": {"phase1": {"lambda": 1.0, "mu": 1.0, "rho": 2.0}}}, "phases"),
        ({"cell": {"kind": "disk"}}, "cell"),
        ({"bc": "dirichlet"}, "bc"),
    ],
)
def test_wave_rejects_configs_other_than_the_benchmark(tmp_path: Path, capsys, sections, field):
    out = tmp_path / "out"
    assert _run("wave", _write_config(tmp_path, **sections), out) == 2
    assert field in capsys.readouterr().err
    assert not out.exists()

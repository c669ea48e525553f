import csv
import json
import math

import pytest

from lensflow.cli import RunConfig, main, parse_config, validate
from lensflow import ConfigError


def _run(tmp_path, scenario, config=None, *extra, name="out"):
    args = [scenario, "--out", str(tmp_path / name), *extra]
    if config is not None:
        path = tmp_path / f"{name}.json"
        path.write_text(config if isinstance(config, str) else json.dumps(config))
        args += ["--config", str(path)]
    return main(args), tmp_path / name


def _status(out):
    return json.loads((out / "status.json").read_text())


def test_pi_over_three_config_is_valid(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"theta": 1.0471975512, "r_star": 1.0, "n": 201, "scenario": "spectrum"}))
    cfg = parse_config("spectrum", path)
    assert cfg.theta == pytest.approx(math.pi / 3) and cfg.n == 201


@pytest.mark.parametrize("bad", [
    {"theta": 3.5}, {"theta": 0.0}, {"n": 5}, {"n": 20.5}, {"n": True},
    {"amplitude": 0.5}, {"figures": "yes"}, {"ls_radii": []}, {"bogus": 1},
])
def test_invalid_config_exits_2(tmp_path, bad, capsys):
    code, out = _run(tmp_path, "lscheck", bad)
    assert code == 2
    key = next(iter(bad))
    assert key in capsys.readouterr().err


def test_malformed_json_exits_2(tmp_path):
    code, _ = _run(tmp_path, "lscheck", "{not json")
    assert code == 2


def test_scenario_mismatch_rejected(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"scenario": "evolve"}))
    with pytest.raises(ConfigError):
        parse_config("spectrum", path)


def test_validate_defaults():
    cfg = validate(RunConfig())
    assert cfg.n == 201 and cfg.theta == pytest.approx(math.pi / 3)


def test_spectrum_scenario(tmp_path, capsys):
    code, out = _run(tmp_path, "spectrum", {"theta": 1.0471975512})
    assert code == 0 and _status(out)["status"] == "ok"
    header = json.loads(capsys.readouterr().out.splitlines()[0])
    assert header["n"] == 201
    with (out / "eigenvalues.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    kernel = [r for r in rows if r["kernel"] == "1"]
    assert len(kernel) == 2
    assert all(float(r["re"]) > 0 for r in rows if r["kernel"] == "0")
    report = json.loads((out / "kernel_report.json").read_text())
    assert report["config"]["n"] == 201 and report["kernel_count"] == 2


def test_lscheck_scenario(tmp_path):
    code, out = _run(tmp_path, "lscheck")
    summary = json.loads((out / "ls_summary.json").read_text())
    assert code == 0 and summary["min_normalized"] >= 1.9
    assert summary["det_at_1"] == pytest.approx(2.0, abs=1e-12)


def test_manifold_scenario(tmp_path):
    code, out = _run(tmp_path, "manifold", {"n": 101})
    report = json.loads((out / "manifold.json").read_text())
    assert code == 0 and report["tangent_kernel_angle"] <= 1e-3


def test_evolve_scenario(tmp_path):
    code, out = _run(tmp_path, "evolve", {"n": 101, "samples": 40})
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert 0.75 <= summary["sigma_ratio"] <= 1.25
    assert summary["config"]["amplitude"] == 1e-3
    header = (out / "trajectory.csv").read_text().splitlines()[0]
    assert header == ("t,area,sup_rho,sup_d1,sup_d2,sup_d3,sup_d4,holder4,dist,a1,r,"
                      "g1m,g1p,g2m,g2p")


def test_floats_written_with_17_digits(tmp_path):
    code, out = _run(tmp_path, "lscheck")
    row = (out / "ls_sweep.csv").read_text().splitlines()[1].split(",")
    assert code == 0
    assert all(v == format(float(v), ".17g") for v in row[:4])


def test_numerical_failure_exits_4(tmp_path):
    # a large bump on a coarse grid breaks the boundary conditions of the initial data
    code, out = _run(tmp_path, "evolve", {"n": 101, "amplitude": 0.1})
    status = _status(out)
    assert code == 4 and status["exit_code"] == 4 and "DomainError" in status["message"]


def test_io_failure_exits_3(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["lscheck", "--out", str(blocker / "sub")]) == 3


def test_repeat_runs_are_byte_identical(tmp_path):
    cfg = {"n": 101, "samples": 20, "t_end": 0.02}
    _, a = _run(tmp_path, "evolve", cfg, name="a")
    _, b = _run(tmp_path, "evolve", cfg, name="b")
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_env_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("LENSFLOW_OUT", str(tmp_path / "env"))
    assert main(["lscheck"]) == 0
    assert (tmp_path / "env" / "ls_summary.json").exists()


def test_full_report_figures_and_flag(tmp_path):
    cfg = {"n": 101, "fine_check": False, "samples": 20}
    code, out = _run(tmp_path, "full-report", cfg, name="figs")
    assert code == 0
    pngs = sorted(p.name for p in (out / "figures").iterdir())
    assert pngs == ["profile.png", "spectrum.png", "trajectory.png"]
    again = tmp_path / "again"
    assert main(["full-report", "--config", str(tmp_path / "figs.json"), "--out", str(again)]) == 0
    for name in pngs:
        assert (out / "figures" / name).read_bytes() == (again / "figures" / name).read_bytes()
    code, plain = _run(tmp_path, "full-report", cfg, "--no-figures", name="plain")
    assert code == 0 and not (plain / "figures").exists()
    data = json.loads((plain / "acceptance.json").read_text())
    assert data["all_passed"] and len(data["criteria"]) == 9

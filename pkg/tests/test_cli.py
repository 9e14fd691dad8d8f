import json

import pytest

from fennm.cli import main


def test_run_command(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"problem": "equilibrium", "adam_epochs": 5, "lbfgs_epochs": 2,
                               "grid_points": 21}))
    assert main(["run", str(cfg), "--output", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "history.csv").exists()
    assert "avg_abs_error" in capsys.readouterr().out


def test_bad_config_exit_code(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"problem": "equilibrium", "Bad": 1}))
    assert main(["run", str(cfg)]) == 2
    assert main(["run", str(tmp_path / "missing.json")]) == 2


@pytest.mark.parametrize("argv", [
    ["baseline", "fem", "--problem", "equilibrium", "--elements", "8", "--degree", "2"],
    ["baseline", "rk45", "--problem", "pendulum-undamped"],
    ["baseline", "fdm", "--points", "201"],
])
def test_baselines(tmp_path, argv):
    assert main(argv + ["--output", str(tmp_path)]) == 0
    m = json.loads((tmp_path / "metrics.json").read_text())
    assert m["max_abs_error"] < 1e-2
    assert (tmp_path / "solution.csv").exists()


def test_sweeps_small(tmp_path, capsys):
    assert main(["sweep-quadrature", "--degrees", "2", "--q", "1", "3", "--seeds", "0",
                 "--adam-epochs", "3", "--lbfgs-epochs", "0", "--output", str(tmp_path)]) == 0
    assert "below minimum" in capsys.readouterr().out
    assert main(["sweep-convergence", "--degrees", "1", "--mesh-sizes", "1", "2", "--seeds", "0",
                 "1", "--adam-epochs", "3", "--lbfgs-epochs", "0", "--output", str(tmp_path)]) == 0
    assert (tmp_path / "convergence_sweep.csv").exists()


def test_refine_command(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"problem": "equilibrium", "adam_epochs": 5, "lbfgs_epochs": 0,
                               "n_elements": 2, "degree": 2, "quad_points": 4}))
    assert main(["refine", str(cfg), "--cycles", "1", "--output", str(tmp_path / "r")]) == 0
    assert "stop:" in capsys.readouterr().out


def test_parser_rejects_unknown_command():
    with pytest.raises(SystemExit):
        main(["fly"])

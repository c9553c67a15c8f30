import csv
import io
import json
import math

import pytest

from taxed_ruin import LevyModel, ScaleEngine, TaxRule, cli
from taxed_ruin.verify import REPORT_COLUMNS, run_checks

MODEL = {"variant": "CramerLundberg", "drift": 1.5, "jump_rate": 1.0, "claims": [[1.0, 1.0]]}
PCL = {"variant": "BrownianPerturbedCL", "drift": 1.5, "sigma": 0.5, "jump_rate": 1.0,
       "claims": [[0.6, 1.0], [0.4, 3.0]]}


def _write(tmp_path, cfg, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def _run(args, capsys):
    code = cli.main(args)
    return code, capsys.readouterr()


def _rows(text):
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def test_eval_untaxed_exit_is_scale_ratio(tmp_path, capsys):
    cfg = {"model": MODEL, "tax": {"x": 2.0, "pieces": [[0.0, 0.0]]},
           "query": {"functional": "exit", "q": 0.1, "a": [3.0, 5.0]}}
    code, out = _run(["eval", "--config", _write(tmp_path, cfg)], capsys)
    assert code == 0
    w = ScaleEngine(LevyModel.from_dict(MODEL), 0.1)
    for row in _rows(out.out):
        ref = w.value(2.0) / w.value(float(row["a"]))
        assert float(row["value"]) == pytest.approx(ref, rel=1e-9)
        assert float(row["constant_gamma_oracle"]) == pytest.approx(ref, rel=1e-12)


def test_eval_constant_oracle_column(capsys):
    code, out = _run(["eval", "--config", "configs/exit_constant.json"], capsys)
    assert code == 0
    for row in _rows(out.out):
        assert float(row["value"]) == pytest.approx(float(row["constant_gamma_oracle"]), rel=1e-8)


def test_eval_density_grid(capsys):
    code, out = _run(["eval", "--config", "configs/gs_density.json"], capsys)
    assert code == 0
    rows = _rows(out.out)
    assert len(rows) == 18
    assert all(float(r["value"]) >= 0 for r in rows)
    assert all(float(r["value"]) == 0 for r in rows if float(r["y"]) >= float(r["theta"]))


def test_eval_writes_file(tmp_path, capsys):
    code, out = _run(["eval", "--config", "configs/exit_constant.json", "--out", str(tmp_path)], capsys)
    assert code == 0 and out.out == ""
    assert (tmp_path / "eval.csv").read_text().startswith("# taxed-ruin eval")


def test_scale_table(capsys):
    code, out = _run(["scale", "--config", "configs/scale.json"], capsys)
    assert code == 0
    rows = _rows(out.out)
    assert set(rows[0]) == {"q", "x", "W", "dW", "d2W"}
    assert float(rows[0]["W"]) == 0.0


def test_config_errors_exit_1(tmp_path, capsys):
    code, out = _run(["eval", "--config", _write(tmp_path, {"model": MODEL, "query": {"functional": "nope"}})],
                     capsys)
    assert code == 1 and "query.functional" in out.err
    code, _ = _run(["eval", "--config", str(tmp_path / "missing.json")], capsys)
    assert code == 1
    code, out = _run(["eval", "--config", "configs/exit_constant.json", "--threads", "0"], capsys)
    assert code == 1 and "--threads" in out.err


def test_accuracy_error_exit_2(capsys):
    code, out = _run(["eval", "--config", "configs/exit_constant.json", "--tolerance", "1e-300"], capsys)
    assert code == 2 and "accuracy" in out.err


def test_verify_failure_exit_3(tmp_path, capsys, monkeypatch):
    # an engine that is 1% off must be caught by the verification checks
    monkeypatch.setattr(cli, "run_checks", lambda sc, sim: run_checks(sc, sim, factory=_Corrupt))
    cfg = {"output": {"scenarios": "laplace"}}
    code, out = _run(["verify", "--config", _write(tmp_path, cfg)], capsys)
    assert code == 3
    assert "FAIL" in out.out


class _Corrupt(ScaleEngine):
    def scaled_value(self, x, order=0):
        v, lead = super().scaled_value(x, order)
        return v * 1.01, lead


def test_negative_control_fails_round_trip():
    good = run_checks("laplace")
    bad = run_checks("laplace", factory=_Corrupt)
    assert all(r.passed for r in good)
    assert not any(r.passed for r in bad)


def test_verify_report_schema(capsys):
    code, out = _run(["verify", "--scenarios", "analytic"], capsys)
    assert code == 0
    lines = out.out.splitlines()
    assert tuple(lines[0].split(",")) == REPORT_COLUMNS
    rows = list(csv.DictReader(io.StringIO(out.out)))
    assert rows and all(r["status"] == "PASS" for r in rows)


def test_verify_unknown_scenarios(capsys):
    code, out = _run(["verify", "--scenarios", "nope"], capsys)
    assert code == 1 and "output.scenarios" in out.err


@pytest.fixture
def npv_config(tmp_path):
    cfg = {"model": MODEL, "tax": {"x": 2.0, "pieces": [[0.0, 0.2], [3.0, 0.5]]},
           "query": {"functional": "npv", "q": 0.1},
           "sim": {"n_paths": 4000, "rng_seed": 5, "time_horizon": 80.0},
           "output": {"paths": "paths.csv"}}
    return cfg


def test_simulate_repeatable(tmp_path, capsys, npv_config):
    path = _write(tmp_path, npv_config)
    outs = []
    for d in ("one", "two"):
        code, _ = _run(["simulate", "--config", path, "--out", str(tmp_path / d)], capsys)
        assert code == 0
        outs.append(((tmp_path / d / "simulate.csv").read_bytes(), (tmp_path / d / "paths.csv").read_bytes()))
    assert outs[0] == outs[1]
    code, _ = _run(["simulate", "--config", path, "--out", str(tmp_path / "three"), "--threads", "3"], capsys)
    # the header echoes the thread count; the numbers must not change
    assert _rows((tmp_path / "three" / "simulate.csv").read_text()) == _rows(outs[0][0].decode())


def test_simulate_error_shrinks(tmp_path, capsys, npv_config):
    ses = []
    for n in (4000, 8000):
        npv_config["sim"]["n_paths"] = n
        code, out = _run(["simulate", "--config", _write(tmp_path, npv_config)], capsys)
        assert code == 0
        ses.append(float(_rows(out.out)[0]["std_error"]))
    assert ses[1] / ses[0] == pytest.approx(1 / math.sqrt(2), rel=0.2)


def test_simulate_untaxed_npv_zero(tmp_path, capsys, npv_config):
    npv_config["tax"]["pieces"] = [[0.0, 0.0]]
    del npv_config["output"]
    code, out = _run(["simulate", "--config", _write(tmp_path, npv_config)], capsys)
    assert code == 0
    row = _rows(out.out)[0]
    assert float(row["mean"]) == 0.0 and float(row["std_error"]) == 0.0


def test_simulate_zero_rate_refused(tmp_path, capsys, npv_config):
    npv_config["query"] = {"functional": "exit", "q": 0.0, "a": 4.0}
    code, out = _run(["simulate", "--config", _write(tmp_path, npv_config)], capsys)
    assert code == 1 and "acknowledge_horizon" in out.err


def test_simulate_gs_box(tmp_path, capsys):
    cfg = json.loads(open("configs/gs_box.json").read())
    cfg["sim"]["n_paths"] = 20_000
    code, out = _run(["simulate", "--config", _write(tmp_path, cfg)], capsys)
    assert code == 0
    from taxed_ruin import gerber_shiu_mass
    ref = gerber_shiu_mass(LevyModel.from_dict(MODEL), TaxRule(2.0, ((0.0, 0.2), (3.0, 0.5))), 0.1, 0.1, 2.0,
                           (2.0, 4.0), (0.0, 1.0), (0.0, 2.0))
    row = _rows(out.out)[0]
    assert abs(float(row["mean"]) - ref) < 4 * float(row["std_error"]) + float(row["bias_bound"])


def test_verify_deterministic(tmp_path, capsys):
    cfg = _write(tmp_path, {"sim": {"n_paths": 5000, "rng_seed": 3, "time_horizon": 60.0},
                            "output": {"scenarios": "default"}})
    reports = []
    for d in ("a", "b"):
        cli.main(["verify", "--config", cfg, "--out", str(tmp_path / d)])
        reports.append((tmp_path / d / "verify.csv").read_bytes())
    capsys.readouterr()
    assert reports[0] == reports[1]
    rows = list(csv.reader(io.StringIO(reports[0].decode())))
    assert all(len(r) == len(REPORT_COLUMNS) for r in rows)

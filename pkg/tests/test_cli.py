import json

import pytest

from rdpbridge import cli
from rdpbridge.cli import ExperimentConfig

TABLE = '{"variant":"finite_table","params":{"probs":[[0.9,0.1],[0.1,0.9]]}}'
G0 = '{"variant":"gaussian","params":{"mean":[0],"sigma":1}}'
G1 = '{"variant":"gaussian","params":{"mean":[1],"sigma":1}}'
THRESH = '{"variant":"threshold1d","params":{"cut":0}}'


def run(argv, tmp_path, name="out.json"):
    out = tmp_path / name
    code = cli.main(argv + ["--output", str(out)])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_divergence_closed_form(tmp_path):
    code, out = run(["divergence", "--m1", G0, "--m2", G1, "--order", "2"], tmp_path)
    assert code == 0 and out["value"] == 1.0 and out["method"] == "closed_form"


def test_certify_rdp_exit_codes(tmp_path):
    base = ["certify-rdp", "--mapping", TABLE, "--metric", "discrete", "--alpha", "1", "--lambda", "max"]
    code, out = run(base + ["--epsilon", "1"], tmp_path)
    assert code == 3 and out["status"] == "violated"
    code, out = run(base + ["--epsilon", "2.5"], tmp_path)
    assert code == 0 and out["status"] == "holds"


def test_robustness_with_inline_points(tmp_path):
    argv = ["robustness", "--classifier", THRESH, "--data", '{"points":[[-0.05],[1.0]]}', "--alpha", "0.1"]
    code, out = run(argv + ["--gamma", "0.4"], tmp_path)
    assert code == 3 and out["gamma_hat"] == 0.5
    code, _ = run(argv + ["--gamma", "0.6"], tmp_path)
    assert code == 0


def test_robustness_csv_with_weights(tmp_path):
    data = tmp_path / "pts.csv"
    data.write_text("x,w\n-0.05,3\n1.0,1\n")
    code, out = run(["robustness", "--classifier", THRESH, "--data", str(data), "--alpha", "0.1"], tmp_path)
    assert code == 0 and out["gamma_hat"] == 0.75


def test_bad_csv_reports_position(tmp_path, capsys):
    data = tmp_path / "bad.csv"
    data.write_text("0.1\n0.2\nabc\n")
    code = cli.main(["robustness", "--classifier", THRESH, "--data", str(data)])
    assert code == 2 and "bad.csv:3:1" in capsys.readouterr().err


def test_bad_json_reports_position(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{\n "alpha": 1,,\n}')
    assert cli.main(["certify-rdp", "--mapping", TABLE, "--config", str(cfg)]) == 2
    assert "cfg.json:2:" in capsys.readouterr().err


def test_unknown_flag_is_usage_error():
    assert cli.main(["divergence", "--bogus", "1"]) == 1


def test_missing_required_is_usage_error():
    assert cli.main(["divergence", "--m1", G0]) == 1


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"alpah": 1}')
    assert cli.main(["certify-rdp", "--mapping", TABLE, "--config", str(cfg)]) == 2


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"alpha": 0.5, "metric": "discrete", "lambda": "max", "epsilon": "1"}))
    code, out = run(["certify-rdp", "--mapping", TABLE, "--config", str(cfg)], tmp_path)
    assert code == 0 and out["certificate"]["alpha"] == 0.5  # ball holds only the centre
    code, out = run(["certify-rdp", "--mapping", TABLE, "--config", str(cfg), "--alpha", "1"], tmp_path)
    assert code == 3 and out["certificate"]["alpha"] == 1.0


def test_config_object_round_trip(tmp_path):
    cfg = ExperimentConfig("equivalence", {"sweep": 5, "max_size": 4, "dump_dir": str(tmp_path / "d")}, 3, None)
    path = tmp_path / "full.json"
    path.write_text(json.dumps(cfg.to_dict()))
    back = ExperimentConfig.from_dict(json.loads(path.read_text()))
    assert back == cfg
    code, out = run(["equivalence", "--config", str(path), "--threads", "1"], tmp_path)
    assert code == 0 and out["n_instances"] == 5


def test_config_for_other_subcommand(tmp_path):
    path = tmp_path / "full.json"
    path.write_text(json.dumps(ExperimentConfig("equivalence", {}, 0, None).to_dict()))
    assert cli.main(["certify-rdp", "--mapping", TABLE, "--config", str(path)]) == 2


def test_same_seed_same_bytes(tmp_path):
    argv = ["divergence", "--m1", G0, "--m2", G1, "--method", "mc", "--n", "20000", "--seed", "8"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    cli.main(argv + ["--threads", "1", "--output", str(a)])
    cli.main(argv + ["--threads", "4", "--output", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_sweep_report(tmp_path):
    rep = tmp_path / "eq.json"
    cli.main(["equivalence", "--sweep", "10", "--dump-dir", str(tmp_path / "d"), "--output", str(rep)])
    out = tmp_path / "report.txt"
    assert cli.main(["sweep-report", "--reports", str(rep), "--output", str(out)]) == 0
    assert out.read_text().strip()


def test_domain_error_is_input_error(capsys):
    assert cli.main(["apply", "--mapping", TABLE, "--x", "7"]) == 2

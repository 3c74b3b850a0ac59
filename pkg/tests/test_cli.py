import json

import pytest

from ampo.cli import DEFAULTS, load_config, main, parse_seeds, resolve
from ampo.exceptions import ConfigError


def test_parse_seeds():
    assert parse_seeds("3") == [3]
    assert parse_seeds("0-2,7") == [0, 1, 2, 7]
    with pytest.raises(ConfigError):
        parse_seeds("a")
    with pytest.raises(ConfigError):
        parse_seeds(",")


def test_precedence_cli_over_file_over_defaults(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("# comment\niters = 7\neta0 = 2.5\nmirror = l2\n")
    cfg = resolve("tabular", load_config(f), {"--iters": "9"})
    assert cfg["iters"] == 9 and cfg["eta0"] == 2.5 and cfg["mirror"] == "l2"
    assert cfg["gamma"] == DEFAULTS["tabular"]["gamma"]


def test_bad_config_values(tmp_path):
    with pytest.raises(ConfigError):
        resolve("tabular", {"iters": "many"}, {})
    with pytest.raises(ConfigError):
        resolve("tabular", {"record_timing": "maybe"}, {})
    f = tmp_path / "c.cfg"
    f.write_text("no equals sign\n")
    with pytest.raises(ConfigError):
        load_config(f)


def test_exit_codes(tmp_path):
    assert main(["tabular", "--frobnicate", "1", "--out", str(tmp_path)]) == 2
    assert main(["tabular", "--mirror", "nonsense", "--out", str(tmp_path)]) == 2
    assert main(["tabular", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["no-such-command"]) == 2


def test_tabular_csvs_bit_identical(tmp_path):
    args = ["tabular", "--iters", "15", "--seed", "0,1", "--mirror", "entropy,l2"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "tabular_summary.csv" in files and "tabular_l2_seed1.csv" in files
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_tabular_geometric_auto(tmp_path):
    assert main(["tabular", "--iters", "40", "--schedule", "geometric:auto", "--out", str(tmp_path)]) == 0
    summary = (tmp_path / "tabular_summary.csv").read_text().splitlines()
    assert summary[0].startswith("seed,mirror") and len(summary) == 2


def test_theory_check_and_broken_hook(tmp_path):
    ok = main(["theory-check", "--trials", "200", "--mdps", "2", "--out", str(tmp_path / "ok")])
    assert ok == 0
    report = json.loads((tmp_path / "ok" / "theory_report.json").read_text())
    assert len(report) >= 6 and all(r["passed"] for r in report)
    bad = main(["theory-check", "--trials", "200", "--mdps", "2", "--out", str(tmp_path / "bad"),
                "--inject-broken-projection", "true"])
    assert bad == 1


def test_control_outputs(tmp_path):
    rc = main(["control", "--seed", "0-1", "--mirror", "entropy", "--env", "cartpole", "--total-steps", "4096",
               "--n-envs", "8", "--n-steps", "64", "--hidden", "8", "--out", str(tmp_path)])
    assert rc == 0
    names = {p.name for p in tmp_path.iterdir()}
    assert {"control_cartpole_entropy_seed0.csv", "control_cartpole_entropy_seed1.csv",
            "control_cartpole_entropy_mean.csv", "control_summary.csv"} <= names


def test_control_bad_env(tmp_path):
    assert main(["control", "--env", "pong", "--seed", "0", "--out", str(tmp_path)]) == 2


def test_project_bench_outputs(tmp_path):
    rc = main(["project-bench", "--mirror", "entropy", "--min-log2", "2", "--max-log2", "4", "--repeats", "1",
               "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "project_bench.csv").read_text().splitlines()
    assert lines[0] == "kind,method,n_actions,precision,seconds" and len(lines) == 7

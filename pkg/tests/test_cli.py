import csv
import json
import subprocess
import sys

import pytest
import yaml

from mmwave_assoc import cli
from mmwave_assoc.config import ExperimentConfig, apply_env, from_dict, parse_config, policy_seed
from mmwave_assoc.errors import ConfigError
from mmwave_assoc.instances import load_split

SMALL = {
    "map": {"grid_size": 2},
    "mobility": {"n_ues": 6, "horizon": 30.0},
    "sqa": {"iterations": 5},
    "lbh": {"episodes": 3},
    "seeds": [0, 1],
}


def write_cfg(tmp_path, data, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data) if data is not None else "")
    return path


def test_empty_file_gives_defaults(tmp_path):
    cfg = parse_config(write_cfg(tmp_path, None), env={})
    assert cfg == ExperimentConfig()
    assert (cfg.map.grid_size, cfg.map.road_length, cfg.map.coverage_radius) == (8, 200.0, 300.0)
    assert (cfg.sqa.epsilon, cfg.sqa.alpha, cfg.sqa.gamma, cfg.sqa.step, cfg.sqa.iterations) == (3.0, 0.01, 1.0,
                                                                                              None, 100)
    r = cfg.radio_params()
    assert r.tx_power == pytest.approx(1.0) and r.noise == pytest.approx(1e-12) and r.bandwidth == 1e7
    assert cfg.mobility.speed == 15.0 and cfg.sqa_params(0).resolve_step(2048) == 1024


def test_very_high_density_config():
    cfg = from_dict({"mobility": {"n_ues": 2048}})
    assert cfg.map.grid_size ** 2 == 64 and cfg.mobility.n_ues == (2048,)


@pytest.mark.parametrize("raw, msg", [
    ({"sqa": {"epsilon": 0.5}}, "ε must exceed 1"),
    ({"sqa": {"alpha": 0}}, "alpha"),
    ({"map": {"grid_size": 1}}, "grid_size"),
    ({"mobility": {"n_ues": [0]}}, "n_ues"),
    ({"policies": ["SQA", "XYZ"]}, "unknown policies"),
    ({"bogus": 1}, "unknown top-level"),
    ({"sqa": {"epsilom": 3}}, "unknown keys in 'sqa'"),
    ({"map": [1, 2]}, "mapping"),
    ({"seeds": ["a"]}, "invalid value"),
])
def test_validation_errors(raw, msg):
    with pytest.raises(ConfigError, match=msg):
        from_dict(raw)


def test_distinct_file_diagnostics(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("map: {grid_size: [\n")
    with pytest.raises(ConfigError, match="malformed"):
        parse_config(bad)
    scalar = tmp_path / "scalar.yaml"
    scalar.write_text("42\n")
    with pytest.raises(ConfigError, match="top level"):
        parse_config(scalar)


def test_env_overrides(tmp_path):
    path = write_cfg(tmp_path, SMALL)
    cfg = parse_config(path, env={"MMW_SEEDS": "4, 5", "MMW_OUTPUT_DIR": "elsewhere"})
    assert cfg.seeds == (4, 5) and cfg.output_dir == "elsewhere"
    with pytest.raises(ConfigError):
        apply_env(cfg, {"MMW_SEEDS": "x"})


def test_policy_seeds_are_stable_and_distinct():
    assert policy_seed(3, "SQA") == policy_seed(3, "SQA")
    assert policy_seed(3, "SQA") != policy_seed(3, "LBH") != policy_seed(4, "LBH")


def read_summary(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_artifacts_and_determinism(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", "-c", str(cfg), "-o", str(out_a)]) == cli.EXIT_OK
    assert cli.main(["run", "-c", str(cfg), "-o", str(out_b)]) == cli.EXIT_OK
    rows = read_summary(out_a / "summary.csv")
    assert list(rows[0]) == cli.SUMMARY_COLUMNS
    assert len(rows) == 2 * 5
    for row in rows:
        run_dir = out_a / row["policy"] / row["seed"]
        for name in ("metrics.json", "rates.csv", "handovers.csv"):
            assert (run_dir / name).read_bytes() == (out_b / row["policy"] / row["seed"] / name).read_bytes()
        meta = json.loads((run_dir / "metrics.json").read_text())
        # every summary number is recomputable from the per-run files
        assert float(row["L_bar_bps"]) == meta["L_bar"]
        assert int(row["handovers"]) == meta["handover_count"] == len((run_dir / "handovers.csv").read_text()
                                                                       .splitlines()) - 1
        assert row["X_n_s"] == ("" if meta["X_n"] is None else repr(meta["X_n"]))
        assert int(row["n_ues"]) == meta["n_ues"] == 6
    assert (out_a / "summary.csv").read_bytes() == (out_b / "summary.csv").read_bytes()


def test_multiple_densities_get_subdirectories(tmp_path):
    data = dict(SMALL, mobility={"n_ues": [2, 4], "horizon": 20.0}, seeds=[0], policies=["SBH", "RBH"])
    out = tmp_path / "o"
    assert cli.main(["run", "-c", str(write_cfg(tmp_path, data)), "-o", str(out)]) == 0
    rows = read_summary(out / "summary.csv")
    assert [(r["policy"], r["n_ues"]) for r in rows] == [("SBH", "2"), ("RBH", "2"), ("SBH", "4"), ("RBH", "4")]
    assert (out / "n2" / "SBH" / "0" / "metrics.json").is_file()


def test_trajectory_prefix_shared_across_densities():
    cfg = from_dict(SMALL)
    a, b = cli.build_scenario(cfg, 3, 2), cli.build_scenario(cfg, 3, 6)
    assert a.net == b.net
    for ta, tb in zip(a.trajectories, b.trajectories):
        assert (ta.xs == tb.xs).all() and (ta.times == tb.times).all()


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"sqa": {"epsilon": 0.5}})
    assert cli.main(["run", "-c", str(cfg)]) == cli.EXIT_CONFIG
    assert "ε must exceed 1" in capsys.readouterr().err
    assert cli.main(["run", "-c", str(tmp_path / "nope.yaml")]) == cli.EXIT_CONFIG


def test_run_failure_exit_code(tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise RuntimeError("boom")

    monkeypatch.setattr(cli, "run", broken)
    data = dict(SMALL, policies=["SBH"], seeds=[0])
    out = tmp_path / "o"
    assert cli.main(["run", "-c", str(write_cfg(tmp_path, data)), "-o", str(out)]) == cli.EXIT_RUN
    assert read_summary(out / "summary.csv") == []


def test_oracle_suite(tmp_path):
    cfg = from_dict({"oracle": {"tiny_instances": 2}, "output_dir": str(tmp_path)})
    assert cli.run_oracle_suite(cfg) == cli.EXIT_OK
    rows = read_summary(tmp_path / "oracle.csv")
    assert list(rows[0]) == cli.ORACLE_COLUMNS
    split = {r["policy"]: float(r["ratio"]) for r in rows if r["instance"] == "load_split"}
    assert split["SQA"] >= 0.95 and split["RBH"] < 1.0
    assert len(rows) == 4 * 4


def test_oracle_suite_empty_and_guard(tmp_path):
    cfg = from_dict({"output_dir": str(tmp_path)})
    assert cli.run_oracle_suite(cfg, instances=[], path=tmp_path / "empty.csv") == cli.EXIT_OK
    assert (tmp_path / "empty.csv").read_text().splitlines() == [",".join(cli.ORACLE_COLUMNS)]
    from mmwave_assoc.instances import tiny_random
    big = tiny_random(0, n_ues=3, max_epochs=40, max_series=10**9, horizon=300.0)
    status = cli.run_oracle_suite(cfg, instances=[("big", big), ("split", load_split())], path=tmp_path / "g.csv")
    assert status == cli.EXIT_GUARD
    assert {r["instance"] for r in read_summary(tmp_path / "g.csv")} == {"split"}


def test_dump_subcommands(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    assert cli.main(["map", "-c", str(cfg), "--seed", "1", "--out", str(tmp_path / "m.json")]) == 0
    assert json.loads((tmp_path / "m.json").read_text())["grid_size"] == 2
    assert cli.main(["epochs", "-c", str(cfg), "--out", str(tmp_path / "e.csv")]) == 0
    assert (tmp_path / "e.csv").read_text().startswith("index,time,ue,bs,trigger,candidates")


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mmwave_assoc", "run", "-c", str(tmp_path / "x.yaml")],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and "not found" in proc.stderr

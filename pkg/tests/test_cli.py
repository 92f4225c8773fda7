import csv
import json

import pytest

from drhmc import cli
from drhmc.errors import ConfigError

FAST = ["--model", "funnel", "--chains", "2", "--warmup", "30", "--iters", "20", "--seed", "1"]


def run(tmp_path, name, *extra):
    out = tmp_path / name
    code = cli.main(["run", *FAST, "--out", str(out), *extra])
    return code, out


def test_run_writes_draws_and_summary(tmp_path):
    code, out = run(tmp_path, "a")
    assert code == 0
    with open(out / "draws.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["chain", "iter", "q1", "q2", "bar:q1", "bar:q2"]
    assert len(rows) == 1 + 2 * 20
    assert [r[0] for r in rows[1:]] == ["0"] * 20 + ["1"] * 20
    s = json.loads((out / "summary.json").read_text())
    assert s["schema_version"] == cli.SCHEMA_VERSION
    assert s["status"] == "ok"
    assert s["config"]["model"] == "funnel" and s["config"]["chains"] == 2
    assert s["cpu_seconds"] > 0
    assert set(s["divergences"]) == {"sampling", "warmup", "rate", "per_chain"}
    assert set(s["coordinates"]["q1"]) == {"mean", "sd", "n_eff", "mcse", "sd_mcse", "degenerate"}
    assert set(s["modified"]) == {"q1", "q2"}


def test_draws_are_shortest_round_trip_text(tmp_path):
    _, out = run(tmp_path, "a")
    with open(out / "draws.csv") as fh:
        row = list(csv.reader(fh))[5]
    for text in row[2:]:
        assert repr(float(text)) == text


def test_same_config_gives_identical_bytes(tmp_path, monkeypatch):
    _, a = run(tmp_path, "a")
    _, b = run(tmp_path, "b", "--threads", "1")
    monkeypatch.setenv(cli.THREADS_ENV, "2")
    _, c = run(tmp_path, "c", "--threads", "1")
    ref = (a / "draws.csv").read_bytes()
    assert (b / "draws.csv").read_bytes() == ref
    assert (c / "draws.csv").read_bytes() == ref


def test_thread_env_overrides_flag(monkeypatch):
    cfg = cli.ExperimentConfig(chains=4, threads=1)
    assert cli.resolve_threads(cfg) == 1
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    assert cli.resolve_threads(cfg) == 3
    monkeypatch.setenv(cli.THREADS_ENV, "many")
    with pytest.raises(ConfigError):
        cli.resolve_threads(cfg)
    monkeypatch.delenv(cli.THREADS_ENV)
    assert cli.resolve_threads(cli.ExperimentConfig(chains=4)) == 4


def test_config_file_with_flag_override(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("# experiment\nmodel = lgssm3\nmethod = direct\nchains = 3\niters = 50  # short\nL-max = 4\n")
    args = cli.build_parser().parse_args(["run", "--config", str(path), "--chains", "1"])
    cfg = cli._config_from(args)
    assert (cfg.model, cfg.method, cfg.chains, cfg.iters, cfg.L_max) == ("lgssm3", "direct", 1, 50, 4)


def test_bad_config_file_key(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("modle = funnel\n")
    with pytest.raises(ConfigError):
        cli.read_config_file(path)


@pytest.mark.parametrize(
    "argv",
    [
        ["--model", "stock-watson", "--method", "prior-std"],
        ["--model", "funnel", "--chains", "0"],
        ["--model", "funnel", "--h", "nonsense"],
        ["--model", "lgssm1", "--method", "sshmc", "--step-size", "0.1"],
        ["--model", "sv", "--method", "sshmc"],
    ],
)
def test_invalid_config_exits_2(tmp_path, argv, capsys):
    code = cli.main(["run", *argv, "--iters", "10", "--warmup", "0", "--out", str(tmp_path / "x")])
    assert code == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_method_is_usage_error():
    with pytest.raises(SystemExit) as info:
        cli.main(["run", "--method", "nuts"])
    assert info.value.code == 2


def test_aborted_run_exits_1_with_flagged_summary(tmp_path):
    out = tmp_path / "ab"
    code = cli.main([
        "run", "--model", "funnel", "--method", "direct", "--chains", "2", "--warmup", "0", "--iters", "100",
        "--step-size", "4.0", "--max-div-rate", "0.0", "--out", str(out),
    ])
    assert code == 1
    s = json.loads((out / "summary.json").read_text())
    assert s["status"] == "aborted" and s["divergences"]["sampling"] >= 1
    assert (out / "draws.csv").exists()


def test_compare_writes_one_row_per_method(tmp_path):
    out = tmp_path / "cmp"
    code = cli.main(["compare", *FAST, "--methods", "drhmc:E,direct", "--out", str(out)])
    assert code == 0
    with open(out / "table.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [(r["method"], r["h"]) for r in rows] == [("drhmc", "E"), ("direct", "")]
    for r in rows:
        assert float(r["cpu_seconds"]) > 0
        for g in ("q1", "q2"):
            assert float(r[f"n_eff_per_s:{g}"]) == pytest.approx(float(r[f"n_eff:{g}"]) / float(r["cpu_seconds"]))


def test_single_config_gives_one_row():
    rows = cli.compare_methods([cli.ExperimentConfig(model="funnel", chains=1, warmup=10, iters=20)])
    assert len(rows) == 1


def test_heterogeneous_configs_rejected():
    a = cli.ExperimentConfig(model="funnel")
    b = cli.ExperimentConfig(model="lgssm1")
    with pytest.raises(ConfigError):
        cli.compare_methods([a, b])
    with pytest.raises(ConfigError):
        cli.compare_methods([a, cli.ExperimentConfig(model="funnel", seed=9)])


def test_cpu_seconds_grow_with_iterations():
    def secs(n):
        cfg = cli.ExperimentConfig(model="lgssm1", T=50, chains=1, warmup=0, iters=n, step_size=0.1, L_min=5, L_max=5, threads=1)
        return cli.compare_methods([cfg])[0]["cpu_seconds"]

    assert secs(200) >= 1.5 * secs(100)

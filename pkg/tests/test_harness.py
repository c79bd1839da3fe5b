import json
import subprocess
import sys
import time

import pytest

from gatesim.harness import cli
from gatesim.harness.config import ConfigError, parse_config, parse_value
from gatesim.harness.scenarios import (
    KEYS,
    Scenario,
    bundled_names,
    bundled_path,
    load_scenario,
    parse_scenario,
    render,
    run_scenario,
)
from gatesim.power_gate import characterize, default_table, log_sweep, staircase_csv


def test_parse_values():
    assert parse_value("2..5") == [2, 3, 4, 5]
    assert parse_value("1, 2.5, x") == [1, 2.5, "x"]
    assert parse_value("true") is True
    assert parse_value('"a, b"') == "a, b"
    assert parse_value("1e7") == 1e7
    assert parse_value("10_000") == 10_000


def test_config_diagnostics():
    with pytest.raises(ConfigError, match=r":2"):
        parse_config("a = 1\nnot an assignment\n")
    with pytest.raises(ConfigError, match=r":2 \[a\]: duplicate"):
        parse_config("a = 1\na = 2\n")
    with pytest.raises(ConfigError, match="malformed key"):
        parse_config("a..b = 1\n")
    with pytest.raises(ConfigError, match=r"\[k\]: missing value"):
        parse_config("k =\n")
    with pytest.raises(ConfigError, match="empty range"):
        parse_config("k = 5..2\n")


def test_comments_and_quotes():
    cfg = parse_config('# header\nx = "a # b"  # trailing\n\ny = 3\n')
    assert cfg["x"].value == "a # b" and cfg["y"].value == 3 and cfg["y"].line == 4


def test_scenario_key_errors_carry_line():
    text = "scenario.name = t\nscenario.pipeline = attack\ngadget.kind = moe\ngadget.moe.layers_low = 30\n"
    with pytest.raises(ConfigError, match="gadget.moe"):
        parse_scenario(text)
    with pytest.raises(ConfigError, match=r":3 \[bogus.key\]: unknown key"):
        parse_scenario("scenario.name = t\nscenario.pipeline = attack\nbogus.key = 1\n")
    with pytest.raises(ConfigError, match="gadget.kind"):
        parse_scenario("scenario.name = t\nscenario.pipeline = attack\ngadget.kind = cnn\n")


def test_scenario_invariants():
    with pytest.raises(ConfigError):
        Scenario("", "attack")
    with pytest.raises(ConfigError):
        Scenario("x", "plot")
    with pytest.raises(ConfigError):
        Scenario("x", "attack", output_format="xml")
    with pytest.raises(ConfigError):
        Scenario("x", "attack", trials=0)


def test_nested_configs_loaded():
    sc = parse_scenario("scenario.name = m\nscenario.pipeline = attack\ngadget.kind = mia\n"
                        "gadget.mia.member_prior = 0.5\ngadget.mia.gadget.total_layers = 10\n"
                        "gadget.mia.gadget.exit_after = 3\nchannel.preset = one_hop\nmitigation.policy = fixed\n"
                        "mitigation.stage = 2\n")
    assert sc.gadget.member_prior == 0.5 and sc.gadget.gadget.total_layers == 10
    assert sc.channel.sigma == 30_000 and sc.policy.stage == 2


def test_every_key_documented_in_help(capsys):
    with pytest.raises(SystemExit):
        cli.main(["run", "--help"])
    out = capsys.readouterr().out
    for k in KEYS:
        assert k in out


def test_bundled_scenarios_present():
    assert {"moe_gap_sweep", "characterize_default", "covert_I_onehop"} <= set(bundled_names())


def test_characterize_default_matches_table(tmp_path):
    status, [path] = run_scenario(load_scenario(bundled_path("characterize_default")), tmp_path)
    assert status == 0
    assert path.read_text() == staircase_csv(characterize(default_table(), log_sweep()))


def test_covert_bundle(tmp_path):
    status, [path] = run_scenario(load_scenario(bundled_path("covert_I_onehop")), tmp_path)
    doc = json.loads(path.read_text())
    assert status == 0 and doc["decoded"] == "I" and doc["ber"] == 0.0


@pytest.mark.slow
@pytest.mark.parametrize("name", ["moe_gap_sweep", "moe_gap_sweep_calibrated", "characterize_default",
                                  "covert_I_onehop"])
def test_bundled_reproducible_and_fast(tmp_path, name):
    sc = load_scenario(bundled_path(name))
    t0 = time.perf_counter()
    s1, [p1] = run_scenario(sc, tmp_path / "a")
    elapsed = time.perf_counter() - t0
    s2, [p2] = run_scenario(load_scenario(bundled_path(name)), tmp_path / "b")
    assert s1 == s2 == 0
    assert p1.read_bytes() == p2.read_bytes()
    assert b"\r\n" not in p1.read_bytes()
    assert elapsed < 60


def test_moe_gap_sweep_header(tmp_path):
    sc = load_scenario(bundled_path("moe_gap_sweep"), {"scenario.trials": 50})
    _, [p] = run_scenario(sc, tmp_path)
    lines = p.read_text().splitlines()
    assert lines[0] == "gap,accuracy,tpr,fpr,auc"
    assert [int(r.split(",")[0]) for r in lines[1:]] == list(range(2, 15))


def test_run_scenario_invariant_violation(tmp_path):
    sc = parse_scenario("scenario.name = bad\nscenario.pipeline = gap_sweep\ngadget.kind = moe\nsweep.gaps = 30\n")
    assert run_scenario(sc, tmp_path) == (3, [])
    sc = parse_scenario("scenario.name = bad\nscenario.pipeline = gap_sweep\n")
    assert run_scenario(sc, tmp_path)[0] == 3


def test_run_scenario_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    sc = parse_scenario("scenario.name = c\nscenario.pipeline = characterize\n")
    assert run_scenario(sc, blocker / "sub") == (4, [])


def test_cli_examples(capsys):
    assert cli.main(["characterize", "--profile", "c1e"]) == 0
    rows = [r.split(",") for r in capsys.readouterr().out.splitlines()[1:]]
    assert max(int(lat) for _, lat in rows) == 9000

    assert cli.main(["resilience", "--source", "avx512", "--trials", "500", "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out)["sigma_max"] == pytest.approx(721, abs=1)

    assert cli.main(["mitigate", "--policy", "reset", "--rate", "1000", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert (doc["power_pct"], doc["perf_pct"]) == (11.6, 30.0)


def test_cli_global_flags_either_side(capsys):
    assert cli.main(["--format", "json", "magnify", "--deltas", "200"]) == 0
    a = capsys.readouterr().out
    assert cli.main(["magnify", "--deltas", "200", "--format", "json"]) == 0
    assert capsys.readouterr().out == a
    assert json.loads(a)[0]["amplified_gap"] == 11000


def test_cli_seed_changes_stochastic_output(capsys):
    cli.main(["--seed", "1", "covert", "--format", "csv", "--trials", "3"])
    a = capsys.readouterr().out
    cli.main(["--seed", "2", "covert", "--format", "csv", "--trials", "3"])
    assert capsys.readouterr().out != a


def test_cli_attack_json(capsys):
    assert cli.main(["attack", "early-exit", "--trials", "2000", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["accuracy"] >= 0.99 and doc["auc"] > 0.99


def test_cli_usage_errors(capsys, tmp_path):
    for argv in (["--bogus"], ["characterize", "--nope"], ["frobnicate"], ["attack", "cnn"],
                 ["covert", "--trials", "x"], ["run", str(tmp_path / "missing.conf")],
                 ["--table", str(tmp_path / "none.csv"), "characterize"], []):
        with pytest.raises(SystemExit) as e:
            cli.main(argv)
        assert e.value.code == 2, argv
    err = capsys.readouterr().err
    assert "scenario file not found" in err and "table file not found" in err
    assert "invalid choice: 'frobnicate'" in err and "invalid int value" in err


def test_cli_config_error_status(tmp_path, capsys):
    bad = tmp_path / "bad.conf"
    bad.write_text("scenario.name = x\nscenario.pipeline = attack\nfoo = 1\n")
    assert cli.main(["run", str(bad)]) == 3
    assert "bad.conf:3 [foo]" in capsys.readouterr().err
    assert cli.main(["attack", "mia", "--gaps", "2..4"]) == 3


def test_cli_out_dir_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(cli.OUT_DIR_ENV, str(tmp_path))
    assert cli.main(["characterize"]) == 0
    assert (tmp_path / "characterize.csv").read_text().startswith("delay_cycles,latency_cycles\n")
    assert cli.main(["run", "characterize_default", "--out-dir", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "characterize_default.csv").exists()


def test_cli_custom_table(tmp_path, capsys):
    t = tmp_path / "slow.csv"
    t.write_text("stage, min_idle, latency_cycles, power_watts\n0, 0, 10, 2\n1, 500, 99, 1\n")
    assert cli.main(["characterize", "--table", str(t)]) == 0
    assert {r.split(",")[1] for r in capsys.readouterr().out.splitlines()[1:]} == {"10", "99"}


def test_console_script_entry_point():
    out = subprocess.run([sys.executable, "-m", "gatesim.harness.cli", "magnify", "--deltas", "0"],
                         capture_output=True, text=True, check=True).stdout
    assert out == "delta_cycles,observed_latency,amplified_gap\n0,9000,0\n"


def test_render_is_pure():
    sc = parse_scenario("scenario.name = a\nscenario.pipeline = attack\ngadget.kind = moe\nscenario.trials = 300\n"
                        "output.format = json\n")
    assert render(sc) == render(sc)

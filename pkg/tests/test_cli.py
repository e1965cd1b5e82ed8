import csv
import json

import pytest

from dgplace.cli import EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_INPUT, EXIT_OK, main
from dgplace.network import sample_path

GA12 = """\
feeder = {feeder}
n_dg = 2
candidate_buses = 2-12
p_grid = 0.25, 0.5, 0.75, 1.0
q_grid = 0.3
population_size = 10
max_generations = {gens}
rng_seed = 5
"""


def _ga_config(tmp_path, gens=15):
    path = tmp_path / "ga.cfg"
    path.write_text(GA12.format(feeder=sample_path("fixture12"), gens=gens))
    return path


def _csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_solve_writes_outputs(tmp_path, capsys):
    assert main(["solve", "--feeder", str(sample_path("ieee9")), "--out", str(tmp_path)]) == EXIT_OK
    for name in ("bus_voltages.csv", "branch_currents.csv", "summary.txt", "manifest.json"):
        assert (tmp_path / name).exists()
    assert "Active Losses" in capsys.readouterr().out
    assert json.loads((tmp_path / "manifest.json").read_text())["command"] == "solve"


def test_missing_feeder_is_input_error(tmp_path, capsys):
    missing = tmp_path / "nope.feeder"
    assert main(["solve", "--feeder", str(missing), "--out", str(tmp_path)]) == EXIT_INPUT
    assert str(missing) in capsys.readouterr().err


def test_bad_feeder_names_line(tmp_path, capsys):
    bad = tmp_path / "bad.feeder"
    bad.write_text("[bases]\n6.5, 10\n[buses]\n1,slack\n2,load,x,0\n")
    assert main(["solve", "--feeder", str(bad), "--out", str(tmp_path)]) == EXIT_INPUT
    assert "line 5" in capsys.readouterr().err


def test_validate_command(tmp_path):
    assert main(["validate", "--feeder", str(sample_path("ieee30"))]) == EXIT_OK
    bad = tmp_path / "island.feeder"
    bad.write_text("[bases]\n6.5, 10\n[buses]\n1,slack\n2,load,1,0\n[branches]\n")
    assert main(["validate", "--feeder", str(bad)]) == EXIT_INPUT


def test_compare_empty_plan_is_neutral(tmp_path):
    assert main(["compare", "--feeder", str(sample_path("fixture10")), "--plan", "4:0:0",
                 "--out", str(tmp_path)]) == EXIT_OK
    rows = _csv(tmp_path / "compare.csv")
    assert all(abs(float(r["reduction_pct"])) < 1e-9 for r in rows)
    idx = _csv(tmp_path / "indices.csv")[0]
    for k in ("llri", "vpii", "ltapii", "bi"):
        assert float(idx[k]) == pytest.approx(1.0, abs=1e-12)


def test_compare_nine_section_plan(tmp_path):
    assert main(["compare", "--feeder", str(sample_path("ieee9")), "--plan", "7:6:2",
                 "--out", str(tmp_path)]) == EXIT_OK
    rows = {r["quantity"]: r for r in _csv(tmp_path / "compare.csv")}
    assert float(rows["Active Losses (kw)"]["reduction_pct"]) > 70
    idx = _csv(tmp_path / "indices.csv")[0]
    assert float(idx["vpii"]) > 1 and float(idx["ltapii"]) < 1 and float(idx["llri"]) < 1
    for r in rows.values():
        wo, w = float(r["without_dg"]), float(r["with_dg"])
        assert float(r["reduction_pct"]) == pytest.approx(100 * (wo - w) / wo, abs=0.01)


def test_compare_unknown_bus(tmp_path, capsys):
    assert main(["compare", "--feeder", str(sample_path("ieee9")), "--plan", "77:1:0",
                 "--out", str(tmp_path)]) == EXIT_INPUT
    assert "77" in capsys.readouterr().err


def test_compare_plan_from_file(tmp_path):
    plan = tmp_path / "plan.txt"
    plan.write_text("7:1.75:1,23:1.75:1\n")
    assert main(["compare", "--feeder", str(sample_path("ieee30")), "--plan", str(plan),
                 "--out", str(tmp_path / "o")]) == EXIT_OK
    assert "7:1.75:1|23:1.75:1" in (tmp_path / "o" / "compare.txt").read_text()


def test_compare_divergent_plan(tmp_path):
    assert main(["compare", "--feeder", str(sample_path("fixture10")), "--plan", "6:500:0",
                 "--out", str(tmp_path)]) == EXIT_CONVERGENCE


def test_optimize_reproducible(tmp_path):
    cfg = _ga_config(tmp_path)
    outs = [tmp_path / "a", tmp_path / "b"]
    for o in outs:
        assert main(["optimize", "--config", str(cfg), "--out", str(o)]) == EXIT_OK
    for name in ("ga_history.csv", "ga_result.json", "best_plan.txt", "compare.csv", "indices.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    m = json.loads((outs[0] / "manifest.json").read_text())
    assert m["seed"] == 5 and len(m["inputs"]) == 2


def test_optimize_seed_override(tmp_path):
    cfg = _ga_config(tmp_path)
    assert main(["optimize", "--config", str(cfg), "--seed", "9", "--out", str(tmp_path / "o")]) == EXIT_OK
    assert json.loads((tmp_path / "o" / "manifest.json").read_text())["seed"] == 9


def test_optimize_zero_generations(tmp_path):
    cfg = _ga_config(tmp_path, gens=0)
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    res = json.loads((tmp_path / "o" / "ga_result.json").read_text())
    assert res["generations_run"] == 0
    assert len((tmp_path / "o" / "ga_history.csv").read_text().splitlines()) == 2


def test_optimize_bad_config(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(f"feeder = {sample_path('fixture12')}\ncandidate_buses = 2-5\np_grid = 1\npopulation_size = 3\n")
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["optimize", "--feeder", str(sample_path("fixture12")), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_bad_weights(tmp_path):
    assert main(["compare", "--feeder", str(sample_path("ieee9")), "--plan", "7:6:2", "--weights", "0.5,0.5,0.5",
                 "--out", str(tmp_path)]) == EXIT_CONFIG


def test_sweep(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(f"feeder = {sample_path('fixture10')}\ncandidate_buses = 2-10\np_grid = 0.5, 1.0\n")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    lines = (tmp_path / "o" / "sweep.csv").read_text().splitlines()
    assert lines[0] == "plan,llri,vpii,ltapii,bi,violations" and len(lines) == 19


def test_sweep_too_large(tmp_path, capsys):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(f"feeder = {sample_path('ieee34')}\nn_dg = 4\ncandidate_buses = 2-34\n"
                   "p_grid = 0.5, 1.0, 1.5, 2.0\nq_grid = 0, 0.5, 1.0\nsweep_cap = 1000\n")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "cap" in capsys.readouterr().err

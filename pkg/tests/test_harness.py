import json
import math

import pytest

from aemod import ConfigError, PolicyKind
from aemod.harness import CSV_COLUMNS, dump_config, emit_csv, load_config, parse_config, read_csv, run_experiment
from aemod.harness.cli import main

PINNED = {"n": 2, "lambda_v": 2.0, "p": [0.4, 0.6], "lambda_c": [0.5, 0.6], "mu_c": 0.5, "c_points": 2}
REFERENCE = {"n": 7, "lambda_v": 8.0, "p": "decreasing", "mu_c": 0.033, "c_points": 40}


def spec(**kw):
    doc = {"kind": "single_solve", "base": dict(PINNED), "solver": {"starts": 8}}
    doc.update(kw)
    return doc


def write(tmp_path, doc, name="exp.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


# -- config -----------------------------------------------------------------

def test_bad_p_names_field():
    doc = spec()
    doc["base"]["p"] = [0.4, 0.5]
    with pytest.raises(ConfigError) as exc:
        parse_config(doc)
    assert exc.value.field == "base.p"
    assert "p" in str(exc.value)


@pytest.mark.parametrize("patch, field", [
    ({"kind": "load_sweep", "sweep_values": [3.0, 2.0]}, "sweep_values"),
    ({"policies": ["greedy"]}, "policies"),
    ({"solver": {"starts": 0}}, "solver.starts"),
    ({"sim": {"horizon_customers": 5}}, "sim.horizon_customers"),
    ({"surprise": 1}, "surprise"),
])
def test_validation_fields(patch, field):
    with pytest.raises(ConfigError) as exc:
        parse_config(spec(**patch))
    assert exc.value.field == field


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"kind": "single_solve",\n  "base": }')
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    assert "line 2" in str(exc.value)


def test_round_trip(tmp_path):
    doc = spec(sim={"horizon_customers": 5000, "replications": 2}, policies=["optimal", "partial-same-class"])
    first = load_config(write(tmp_path, doc))
    again = load_config(write(tmp_path, json.loads(dump_config(first)), "again.json"))
    assert again == first


def test_shape_expansion():
    s = parse_config({"kind": "load_sweep", "base": REFERENCE, "lambda_c_shape": "decreasing", "sweep_values": [5.0]})
    cfg = s.zone(total_demand=5.0)
    assert sum(cfg.p) == pytest.approx(1.0)
    assert cfg.p[0] > cfg.p[-1]
    assert cfg.total_demand == pytest.approx(5.0)
    assert cfg.lambda_c[0] / cfg.lambda_c[-1] == pytest.approx(7.0)


# -- experiments ------------------------------------------------------------

def test_single_solve_without_sim():
    table = run_experiment(parse_config(spec()))
    assert table.columns == CSV_COLUMNS
    (row,) = table.rows
    assert row.policy == "optimal"
    assert row.r_star == pytest.approx(0.45, abs=1e-4)


def test_policy_compare_optimal_is_best():
    table = run_experiment(parse_config(spec(kind="policy_compare")))
    best = table.select(PolicyKind.OPTIMAL_JOINT)[0].max_response_min
    assert all(r.max_response_min >= best - 1e-9 for r in table.rows)


def test_load_sweep_monotone():
    s = parse_config({"kind": "load_sweep", "base": REFERENCE, "lambda_c_shape": "decreasing",
                      "sweep_values": [5.0, 6.0, 7.0], "solver": {"starts": 8}})
    table = run_experiment(s)
    for kind in s.policy_kinds():
        times = [r.max_response_min for r in table.select(kind)]
        assert all(b >= a for a, b in zip(times, times[1:])), (kind, times)


def test_charging_sweep_advantage_nonnegative():
    base = dict(REFERENCE, p="uniform", lambda_c=[1.25, 1.0, 0.9, 0.8, 0.6, 0.35, 0.1])
    s = parse_config({"kind": "charging_sweep", "base": base, "sweep_values": [10, 20, 40], "solver": {"starts": 8}})
    table = run_experiment(s)
    for a, b in zip(table.select("optimal"), table.select("opt-charge-same-class")):
        assert a.max_response_min <= b.max_response_min + 1e-9


def test_infeasible_policy_reports_inf():
    s = parse_config({"kind": "load_sweep", "base": REFERENCE, "lambda_c_shape": "decreasing",
                      "sweep_values": [5.0], "policies": ["split-same-class"]})
    (row,) = run_experiment(s).rows
    assert row.feasible is False and math.isinf(row.max_response_min)


def test_csv_golden_stable(tmp_path):
    s = parse_config(spec(kind="policy_compare", sim={"horizon_customers": 2000, "replications": 2, "seed": 4}))
    a = emit_csv(run_experiment(s), tmp_path / "a.csv")
    b = emit_csv(run_experiment(s), tmp_path / "b.csv")
    assert a == b
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert a.startswith(",".join(CSV_COLUMNS) + ",sim_max_response_min,sim_max_class\r\n")
    rows = read_csv(tmp_path / "a.csv")
    assert len(rows) == len(PolicyKind)


def test_r_star_reproducible_from_csv(tmp_path):
    s = parse_config(spec())
    emit_csv(run_experiment(s), tmp_path / "r.csv")
    (row,) = read_csv(tmp_path / "r.csv")
    assert float(row["r_star"]) == run_experiment(s).rows[0].r_star


# -- command line -----------------------------------------------------------

def test_cli_optimize(tmp_path, capsys):
    path = write(tmp_path, spec())
    assert main(["optimize", "--config", str(path), "--certify"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["r_star"] == pytest.approx(0.45, abs=1e-4)
    assert out["kkt"]["stationarity_residual"] <= 1e-5


def test_cli_global_flags_before_subcommand(tmp_path):
    path = write(tmp_path, spec())
    out = tmp_path / "rates.json"
    assert main(["--config", str(path), "--out", str(out), "--seed", "3", "rates"]) == 0
    rates = json.loads(out.read_text())
    assert sum(rates["lambda_vs"]) == pytest.approx(2.0)


def test_cli_exit_codes(tmp_path, capsys):
    bad = spec()
    bad["base"]["p"] = [0.4, 0.5]
    assert main(["optimize", "--config", str(write(tmp_path, bad, "bad.json"))]) == 2
    assert "base.p" in capsys.readouterr().err
    inf = spec()
    inf["base"]["mu_c"] = 0.05
    assert main(["optimize", "--config", str(write(tmp_path, inf, "inf.json"))]) == 3
    assert main(["optimize", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["optimize"]) == 2


def test_cli_sweep_csv(tmp_path):
    doc = {"kind": "load_sweep", "base": PINNED, "lambda_c_shape": "uniform",
           "sweep_values": [0.8, 1.1], "policies": ["optimal", "partial-same-class"], "solver": {"starts": 4}}
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--config", str(write(tmp_path, doc)), "--out", str(out)]) == 0
    assert len(read_csv(out)) == 4


def test_cli_simulate_trace(tmp_path):
    doc = spec(decisions={"q": [0.5, 0.275 / 0.6], "pi": [[1.0], [0.0, 1.0]]},
               sim={"horizon_customers": 2000, "replications": 1})
    trace = tmp_path / "t.tsv"
    out = tmp_path / "s.json"
    assert main(["simulate", "--config", str(write(tmp_path, doc)), "--trace", str(trace), "--out", str(out)]) == 0
    assert trace.read_text().count("\n") > 1000
    assert json.loads(out.read_text())["mode"] == "analytical_mm1"

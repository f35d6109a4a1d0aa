import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feasolve.cli import Scenario, ScenarioError, budget_report, load_scenario, main
from feasolve.engine import read_trace_csv
from feasolve.operators import cyclic_projections_apply

GOLDEN = Path(__file__).parent / "golden"
PL = json.loads((GOLDEN / "parallel_lines.json").read_text())


def _write(tmp_path, doc, name="sc.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def _summary(out):
    return json.loads((Path(out) / "summary.json").read_text())


def test_run_parallel_lines(tmp_path):
    out = tmp_path / "o"
    assert main(["run", _write(tmp_path, PL), "--out-dir", str(out)]) == 0
    s = _summary(out)
    assert s["schema"] == "feasolve/1" and len(s["records"]) == 1
    rec = s["records"][0]
    assert rec["final_gap"] == pytest.approx(2, abs=1e-6)
    assert rec["fitted_rate"]["rate"] == pytest.approx(0.25, abs=1e-3)
    assert rec["characterization"]["is_fixed"] and rec["shadow_check"]["shadow_fixed"]


def test_golden_files(tmp_path):
    out = tmp_path / "o"
    assert main(["run", str(GOLDEN / "parallel_lines.json"), "--out-dir", str(out)]) == 0
    assert (out / "trace.csv").read_text() == (GOLDEN / "parallel_lines_trace.csv").read_text()
    assert _summary(out) == json.loads((GOLDEN / "parallel_lines_summary.json").read_text())


def test_golden_trace_matches_closed_form():
    tr = read_trace_csv(GOLDEN / "parallel_lines_trace.csv")
    for k, x in enumerate(tr.iterates):
        assert x[0] == 0 and abs(x[1] - (1 - 4.0 ** -k) / 3) <= 1e-15


def test_malformed_lambda(tmp_path, caplog):
    doc = dict(PL, **{"lambda": 1.5})
    assert main(["run", _write(tmp_path, doc), "--out-dir", str(tmp_path)]) == 1


def test_malformed_messages():
    with pytest.raises(ScenarioError, match="lambda"):
        Scenario.from_dict(dict(PL, **{"lambda": 1.5}))
    with pytest.raises(ScenarioError, match=r"sets\[1\]"):
        Scenario.from_dict(dict(PL, sets=[PL["sets"][0], {"kind": "ball", "center": [0, 0]}]))
    with pytest.raises(ScenarioError, match="x0"):
        Scenario.from_dict(dict(PL, x0=[0, 0, 0]))
    with pytest.raises(ScenarioError, match="stop.bogus"):
        Scenario.from_dict(dict(PL, stop={"bogus": 1}))


def test_json_syntax_error_names_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "name": "x",\n  "dimension": 2,,\n}')
    with pytest.raises(ScenarioError, match="line 3"):
        load_scenario(p)
    assert main(["run", str(p)]) == 1


def test_max_iters_exit(tmp_path):
    assert main(["run", _write(tmp_path, PL), "--out-dir", str(tmp_path), "--max-iters", "3"]) == 2
    assert _summary(tmp_path)["records"][0]["stop_reason"] == "max_iters"


def test_divergence_exit_writes_partial_trace(tmp_path):
    doc = dict(PL, x0=[30, 0], stop={"divergence_bound": 10})
    assert main(["run", _write(tmp_path, doc), "--out-dir", str(tmp_path)]) == 3
    assert _summary(tmp_path)["records"][0]["stop_reason"] == "diverged"
    assert len(read_trace_csv(tmp_path / "trace.csv").iterates) == 1


def test_classical_dr_parallel_lines_is_identity(tmp_path):
    # at lambda = 1 the two pair translations cancel on parallel lines
    doc = dict(PL, **{"lambda": 1.0, "x0": [0, 0.7]})
    assert main(["run", _write(tmp_path, doc), "--out-dir", str(tmp_path)]) == 0
    rec = _summary(tmp_path)["records"][0]
    assert rec["iterations"] == 1 and np.allclose(rec["final_point"], [0, 0.7], atol=1e-15)


def test_sweep(tmp_path, caplog):
    doc = dict(PL, **{"lambda": [0, 0.25, 0.5, 0.25]}, x0=[3, 7], stop={"max_iters": 40, "step_tol": 0})
    assert main(["sweep", _write(tmp_path, doc), "--out-dir", str(tmp_path)]) == 2
    recs = _summary(tmp_path)["records"]
    assert [r["lambda"] for r in recs] == [0, 0.25, 0.5]
    sets = Scenario.from_dict(doc).sets
    tr = read_trace_csv(tmp_path / "trace_lam0.csv")
    x = np.array([3.0, 7.0])
    for it in tr.iterates:
        assert np.linalg.norm(it - x) <= 1e-12
        x = cyclic_projections_apply(sets, x)


def test_sweep_duplicate_warning(tmp_path, capsys):
    doc = dict(PL, **{"lambda": [0.25, 0.5, 0.5]})
    assert main(["sweep", _write(tmp_path, doc), "--out-dir", str(tmp_path)]) == 0
    assert "duplicate" in capsys.readouterr().err


@pytest.mark.parametrize("lams", [[], [0.5], [0.5, 0.5]])
def test_sweep_rejects_short_lists(tmp_path, lams):
    doc = dict(PL, **{"lambda": lams})
    assert main(["sweep", _write(tmp_path, doc), "--out-dir", str(tmp_path)]) == 1


def test_verify_affine(tmp_path):
    assert main(["verify", _write(tmp_path, PL), "--out-dir", str(tmp_path)]) == 0
    checks = {c["check"]: c["pass"] for c in _summary(tmp_path)["records"][0]["checks"]}
    assert checks == {"characterization": True, "affine_shadow": True}


def test_verify_consistent_convex(tmp_path):
    doc = {
        "name": "consistent",
        "dimension": 2,
        "sets": [
            {"kind": "ball", "center": [0, 0], "radius": 1},
            {"kind": "halfspace", "normal": [1, 0], "offset": 0.2},
            {"kind": "hyperplane", "normal": [0, 1], "offset": 0.1},
        ],
        "lambda": 0.5,
        "x0": [3, -2],
        "stop": {"residual_tol": 1e-13},
        "verify": {"common_point": [0, 0.1]},
    }
    assert main(["verify", _write(tmp_path, doc), "--out-dir", str(tmp_path)]) == 0
    checks = {c["check"]: c for c in _summary(tmp_path)["records"][0]["checks"]}
    assert checks["consistent_gap"]["final_gap"] < 1e-8 and checks["intersection_fixed"]["pass"]


def test_verify_circle_budget(tmp_path):
    doc = {
        "name": "circle-line",
        "dimension": 2,
        "sets": [{"kind": "sphere", "center": [0, 0], "radius": 1}, {"kind": "hyperplane", "normal": [0, 1], "offset": 0.5}],
        "lambda": 0.4,
        "x0": [0.9, 0.45],
        "stop": {"residual_tol": 1e-12},
        "verify": {"eps_U": [0.01, None], "eps_bar": 0.05},
    }
    assert main(["verify", _write(tmp_path, doc), "--out-dir", str(tmp_path)]) == 0
    checks = {c["check"]: c for c in _summary(tmp_path)["records"][0]["checks"]}
    assert checks["almost_fixed_budget"]["pass"]


def test_verify_nonconvergent(tmp_path):
    assert main(["verify", _write(tmp_path, PL), "--out-dir", str(tmp_path), "--max-iters", "2"]) == 2
    assert _summary(tmp_path)["records"][0]["checks"] == []


def test_random_x0_seed(tmp_path):
    doc = dict(PL, x0="random")
    p = _write(tmp_path, doc)
    main(["run", p, "--out-dir", str(tmp_path / "a")])
    main(["run", p, "--out-dir", str(tmp_path / "b")])
    main(["run", p, "--out-dir", str(tmp_path / "c"), "--seed", "7"])
    a, b, c = (read_trace_csv(tmp_path / d / "trace.csv").iterates[0] for d in "abc")
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert np.array_equal(a, np.random.default_rng(0).uniform(-1, 1, 2))


def test_budget_examples(tmp_path, capsys):
    p = _write(tmp_path, {"eps_U": 0, "m": 3, "lambda": 0.5, "kappa": 2})
    assert main(["budget", p]) == 0
    rep = json.loads(capsys.readouterr().out)
    rb = rep["regularity"]
    assert rb["composite_alpha"] == 0.75 and rb["composite_eps"] == 0
    assert rb["rate_bound"] == pytest.approx(0.9574271, abs=1e-7)
    rep = budget_report({"eps_U": [0.1, 0, 0], "lambda": 0.5, "kappa": 0.5})
    assert rep["regularity"]["eps_tilde"][0] == pytest.approx(1.0864198, abs=1e-6)
    p = _write(tmp_path, {"eps_U": 0, "m": 3, "lambda": 0.5, "kappa": 0.1}, "b.json")
    assert main(["budget", p]) == 1
    assert "linear_gauge" in capsys.readouterr().err


def test_feas_log_quiet(tmp_path):
    env = {"FEAS_LOG": "quiet", "PATH": "/usr/bin:/bin"}
    r = subprocess.run(
        [sys.executable, "-m", "feasolve.cli", "run", _write(tmp_path, PL), "--out-dir", str(tmp_path)],
        capture_output=True, text=True, env=env,
    )
    assert r.returncode == 0 and r.stderr == ""
    env["FEAS_LOG"] = "debug"
    r = subprocess.run(
        [sys.executable, "-m", "feasolve.cli", "run", _write(tmp_path, PL), "--out-dir", str(tmp_path)],
        capture_output=True, text=True, env=env,
    )
    assert "DEBUG" in r.stderr


def test_usage_error_exit():
    assert main(["frobnicate"]) == 1


set_docs = st.sampled_from([
    {"kind": "ball", "center": [0.0, 1.0], "radius": 2.0},
    {"kind": "sphere", "center": [1.0, 0.0], "radius": 0.5},
    {"kind": "hyperplane", "normal": [0.0, 1.0], "offset": 1.0},
    {"kind": "halfspace", "normal": [1.0, 0.0], "offset": -1.0},
    {"kind": "box", "lower": [0.0, 0.0], "upper": [1.0, 2.0]},
    {"kind": "cloud", "points": [[0.0, 0.0], [1.0, 1.0]]},
    {"kind": "affine", "A": [[1.0, 1.0]], "b": [0.5]},
])


@settings(max_examples=50, deadline=None)
@given(
    sets=st.lists(set_docs, min_size=2, max_size=4),
    lam=st.one_of(st.floats(0, 1), st.lists(st.floats(0, 1), min_size=1, max_size=3)),
    x0=st.one_of(st.just("random"), st.lists(st.floats(-5, 5), min_size=2, max_size=2)),
    seed=st.integers(0, 2**64 - 1),
)
def test_scenario_roundtrip(sets, lam, x0, seed):
    doc = {"name": "h", "dimension": 2, "sets": sets, "lambda": lam, "x0": x0, "seed": seed}
    sc = Scenario.from_dict(doc)
    d1 = sc.to_dict()
    d2 = Scenario.from_dict(json.loads(json.dumps(d1))).to_dict()
    assert d1 == d2

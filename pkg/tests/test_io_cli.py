import json
import logging
import shutil

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qhc import generators as gen
from qhc.acceptance import bundled_fixtures
from qhc.assumptions import QCQPInstance, h3_cone
from qhc.certify import verify_certificate
from qhc.cli import main
from qhc.io import (
    ParseError,
    dump_instance,
    dumps_report,
    instance_digest,
    instance_to_dict,
    load_instance,
    loads_instance,
    report_to_csv,
    strip_timings,
)

FIXTURES = sorted(p.stem for p in bundled_fixtures().glob("*.json"))


@pytest.mark.parametrize("name", FIXTURES)
def test_fixture_round_trip(name, load):
    inst = load(name)
    again = loads_instance(dump_instance(inst))
    assert instance_to_dict(again) == instance_to_dict(inst)
    assert instance_digest(again) == instance_digest(inst)
    assert again.f.allclose(inst.f) and all(a.allclose(b) for a, b in zip(again.gs, inst.gs))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["tp", "ap", "generic"]))
def test_random_round_trip(seed, kind):
    rng = np.random.default_rng(seed)
    inst = {"tp": gen.random_tp, "ap": gen.random_ap, "generic": gen.random_slater_m1}[kind](rng)
    again = loads_instance(dump_instance(inst))
    assert instance_to_dict(again) == instance_to_dict(inst)


def _doc(**over):
    doc = {"version": 1, "n": 1, "kind": "generic",
           "objective": {"Q": [1.0], "q": [0.0], "c": 0.0},
           "constraints": [{"Q": [0.0], "q": [1.0], "c": -1.0}]}
    doc.update(over)
    return json.dumps(doc)


@pytest.mark.parametrize(
    "text, fragment",
    [
        (_doc(version=2), "version"),
        (_doc(n=0), "positive integer"),
        (_doc(kind="weird"), "unknown kind"),
        (_doc(kind="tp"), "extras"),
        (_doc(objective={"Q": [1.0, 2.0], "q": [0.0], "c": 0}), "expected 1 entries"),
        (_doc(constraints=[]), "nonempty"),
        (_doc(objective={"Q": [1.0], "q": [0.0], "c": "x"}), "finite number"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(ParseError, match=fragment):
        loads_instance(text)


def test_parse_error_position():
    with pytest.raises(ParseError) as info:
        loads_instance('{"version": 1,\n  "n": }')
    assert (info.value.line, info.value.column) == (2, 8)


def test_asymmetry_is_symmetrized_with_warning(caplog):
    text = _doc(n=2, objective={"Q": [1.0, 0.5, 0.5 + 1e-6, 1.0], "q": [0, 0], "c": 0},
                constraints=[{"Q": [1, 0, 0, 1], "q": [0, 0], "c": -1}])
    with caplog.at_level(logging.WARNING):
        inst = loads_instance(text)
    assert "asymmetry" in caplog.text
    assert inst.f.Q[0, 1] == inst.f.Q[1, 0]


def test_report_serialization():
    rep = {"a": float("inf"), "b": [float("-inf"), float("nan")], "c": np.array([1.0, -0.0]), "timings": {"x": 1}}
    d = json.loads(dumps_report(rep))
    assert d["a"] == "inf" and d["b"] == ["-inf", "nan"] and d["c"] == [1.0, 0.0]
    assert "timings" not in strip_timings(d)
    csv_text = report_to_csv({"x": {"y": 1, "z": [1, 2]}})
    assert csv_text.splitlines() == ["key,value", "x.y,1", 'x.z,"[1, 2]"']


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_command(capsys):
    code, out, _ = run_cli(capsys, "check", "ex3_1")
    rep = json.loads(out)
    assert code == 0
    assert rep["assumption_report"]["H3"]["verdict"] == "yes"
    assert rep["assumption_report"]["dimension_condition"]["verdict"] == "no"
    assert set(rep) >= {"instance_digest", "command", "assumption_report", "results", "violations",
                        "certificates", "timings", "seed", "tolerance_profile"}


def test_check_reports_negative_example(capsys):
    rep = json.loads(run_cli(capsys, "check", "ex3_3")[1])["assumption_report"]
    assert [rep[k]["verdict"] for k in ("H1_H2", "H3", "H4")] == ["no", "no", "no"]


def test_report_values_revalidate(capsys, load):
    rep = json.loads(run_cli(capsys, "solve", "ex5_2")[1])
    inst = load("ex5_2")
    cert = rep["certificates"][0]
    assert verify_certificate(inst, cert["x_bar"], cert["lambdas"]).valid
    assert h3_cone(inst).contains(rep["assumption_report"]["H3"]["witness"], 1e-8)
    du = rep["results"]["duality"]
    assert du["primal_value"] == pytest.approx(-1.0, abs=1e-6) and du["dual_value"] == pytest.approx(-1.0, abs=1e-6)
    assert abs(du["gap"]) <= 1e-6


def test_solve_small_examples(capsys):
    rep = json.loads(run_cli(capsys, "solve", "ex3_1")[1])
    assert rep["results"]["solution"]["value"] == pytest.approx(-2.0, abs=1e-8)
    rep = json.loads(run_cli(capsys, "solve", "convex")[1])
    assert rep["results"]["duality"]["gap"] == pytest.approx(0.0, abs=1e-9)
    assert rep["results"]["duality"]["lambda_star"] == [0.0]


def test_parse_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"version": 1, "n":')
    code, _, err = run_cli(capsys, "check", str(p))
    assert code == 2 and "line 1" in err and "column" in err
    code, _, _ = run_cli(capsys, "check", str(tmp_path / "missing.json"))
    assert code == 2


def test_precondition_exit_code(tmp_path, capsys):
    p = tmp_path / "big.json"
    p.write_text(dump_instance(QCQPInstance.trust_region(np.eye(5), np.zeros(5), np.zeros(5), 1.0)))
    code, _, err = run_cli(capsys, "sample", str(p), "--trials", "5")
    assert code == 3 and "n <= 4" in err


def test_sample_command(capsys):
    rep = json.loads(run_cli(capsys, "sample", "ex3_3", "--trials", "100", "--seed", "2")[1])
    assert rep["results"]["certified"] >= 1 and rep["violations"][0]["status"] == "certified"
    rep = json.loads(run_cli(capsys, "sample", "ex3_2", "--trials", "0")[1])
    assert rep["violations"] == []


def test_sample_determinism_and_threads(capsys):
    a = strip_timings(json.loads(run_cli(capsys, "sample", "ex3_2", "--trials", "300", "--seed", "4")[1]))
    b = strip_timings(json.loads(run_cli(capsys, "sample", "ex3_2", "--trials", "300", "--seed", "4", "--threads", "2")[1]))
    assert a == b


def test_slemma_and_certify_commands(capsys):
    rep = json.loads(run_cli(capsys, "slemma", "ex5_2")[1])
    assert rep["results"]["kind"] in ("multiplier-found", "counterexample")
    code, out, _ = run_cli(capsys, "certify", "ex5_2", "--x", "0.7071067811865476,-0.7071067811865476", "--lambda", "1,0")
    assert code == 0 and json.loads(out)["results"]["verdict"] == "valid"
    rep = json.loads(run_cli(capsys, "certify", "cdt")[1])
    assert rep["results"]["verdict"] == "valid"
    assert abs(rep["results"]["sphere"]["norm"] - 1.0) <= 1e-8


def test_tolerance_env_and_flag(capsys, monkeypatch):
    monkeypatch.setenv("QHC_TOL", "eq=1e-5")
    rep = json.loads(run_cli(capsys, "check", "ex3_1")[1])
    assert rep["tolerance_profile"]["eq"] == 1e-5
    rep = json.loads(run_cli(capsys, "check", "ex3_1", "--tol", "ineq=1e-6")[1])
    assert rep["tolerance_profile"] == {"eq": 1e-5, "ineq": 1e-6, "psd": 1e-9}
    code, _, _ = run_cli(capsys, "check", "ex3_1", "--tol", "bogus=1")
    assert code == 2


def test_csv_and_out(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code, stdout, _ = run_cli(capsys, "check", "ex3_2", "--csv", "--out", str(out))
    assert code == 0 and stdout == ""
    text = out.read_text()
    assert text.startswith("key,value\n") and "assumption_report.H4.verdict,yes" in text


def test_repro_filter(capsys, tmp_path):
    out = tmp_path / "repro.json"
    code, stdout, _ = run_cli(capsys, "repro", "--filter", "ex5_2", "--out", str(out))
    assert code == 0 and "[PASS]  4" in stdout and stdout.count("[PASS]") == 1
    rep = json.loads(out.read_text())
    assert rep["failed"] == [] and [r["id"] for r in rep["results"]] == [4]


def test_repro_tampered_fixture_fails(capsys, tmp_path):
    for p in bundled_fixtures().glob("*.json"):
        shutil.copy(p, tmp_path / p.name)
    doc = json.loads((tmp_path / "ex3_1.json").read_text())
    doc["objective"]["q"][0] *= -1.0  # flipping the linear sign breaks H3
    (tmp_path / "ex3_1.json").write_text(json.dumps(doc))
    code, stdout, err = run_cli(capsys, "repro", "--filter", "ex3_1", "--fixtures-dir", str(tmp_path))
    assert code == 1 and "[FAIL]  1" in stdout and "1" in err


def test_repro_unknown_filter(capsys):
    assert run_cli(capsys, "repro", "--filter", "nothing-matches")[0] == 2

import numpy as np
import pytest

from qhc import generators as gen
from qhc.assumptions import (
    QCQPInstance,
    Verdict,
    check_cdt_condition,
    check_dimension_condition,
    check_H1,
    check_H2,
    check_H3,
    check_H4,
    check_slater,
    full_report,
    search_H1_H2,
)
from qhc.errors import PreconditionError
from qhc.quad_core import QuadraticFunction


def test_h1_pencil_values(load):
    assert check_H1(load("ex3_1"), 0).witness == pytest.approx(1.0)
    assert check_H1(load("ex5_2"), 0).witness == pytest.approx(1.0)
    ident = QCQPInstance(QuadraticFunction(np.eye(2), np.zeros(2), 0.0), (QuadraticFunction.ball(np.zeros(2), 1.0),))
    assert check_H1(ident, 0).witness == pytest.approx(-1.0)


def test_h1_not_applicable_without_definite_constraint(load):
    conv = load("convex")
    assert check_H1(conv, 0).verdict is Verdict.NOT_APPLICABLE
    assert search_H1_H2(conv).verdict is Verdict.NOT_APPLICABLE


def test_h2_on_worked_examples(load):
    ex31 = load("ex3_1")
    res = check_H2(ex31, 0, 1.0)
    assert res.holds and res.witness[0] < 0
    ex33 = load("ex3_3")
    lam = check_H1(ex33, 0).witness
    assert check_H2(ex33, 0, lam).verdict is Verdict.NO
    assert search_H1_H2(ex33).verdict is Verdict.NO


def test_h2_ball_only_with_zero_linear_term():
    inst = QCQPInstance.trust_region(np.eye(2), np.zeros(2), np.zeros(2), 1.0)
    assert check_H2(inst, 0, -1.0).holds


def test_h2_precondition_error():
    inst = QCQPInstance.trust_region(-np.eye(2), np.zeros(2), np.zeros(2), 1.0)
    with pytest.raises(PreconditionError):
        check_H2(inst, 0, 0.0)


def test_h3_h4_dimension_on_worked_examples(load):
    ex31, ex32, ex33, ex52 = (load(n) for n in ("ex3_1", "ex3_2", "ex3_3", "ex5_2"))
    h3 = check_H3(ex31)
    assert h3.holds and h3.witness[0] < 0
    dim = check_dimension_condition(ex31)
    assert dim.verdict is Verdict.NO and (dim.detail["dim_ker"], dim.detail["s"]) == (1, 1)
    h4 = check_H4(ex32)
    assert h4.holds and abs(h4.witness[1]) < 1e-12 and abs(h4.witness[0]) > 0
    assert check_dimension_condition(ex32).verdict is Verdict.NO
    assert not check_H3(ex33).holds and not check_H4(ex33).holds
    w = check_H3(ex52).witness
    assert w[0] + w[1] == pytest.approx(0.0, abs=1e-12) and w[0] > 0
    assert check_H3(load("ex5_2_a01")).holds


def test_single_ball_satisfies_everything(rng):
    for _ in range(20):
        inst = gen.random_tp_m1(rng, n=3)
        assert check_dimension_condition(inst).holds
        assert check_H4(inst).holds


def test_trust_region_checks_need_tp(load):
    with pytest.raises(PreconditionError):
        check_H3(load("convex"))


def test_h4_negation_means_full_rank(rng):
    from qhc.cones import matrix_rank

    for _ in range(200):
        inst = gen.random_tp(rng)
        if check_H4(inst).verdict is Verdict.NO:
            A, a, x0, alpha, B = inst.tp_parts()
            lam = np.linalg.eigvalsh(A)[0]
            assert matrix_rank(np.vstack([A - lam * np.eye(inst.n), B])) == inst.n


def test_cdt_condition(load):
    assert check_cdt_condition(load("cdt")).holds
    w = check_cdt_condition(load("cdt")).witness
    assert np.allclose(w, [1.0, 0.0])
    blocked = QCQPInstance.cdt(np.diag([1.0, 2.0]), [-1.0, 0.0], np.eye(2), np.zeros(2))
    assert check_cdt_condition(blocked).verdict is Verdict.NO
    # linear rows +-e1 with a = (-1, 0): kernel direction (1, 0) is cut off
    forced = QCQPInstance.cdt(np.diag([1.0, 2.0]), [1.0, 0.0], np.array([[0.0, 1.0]]), [0.0],
                              np.array([[1.0, 0.0], [-1.0, 0.0]]), [1.0, 1.0])
    assert check_cdt_condition(forced).verdict is Verdict.NO


def test_slater_cases(load):
    res = check_slater(load("ex5_2"))
    assert res.holds and all(g(res.witness) < 0 for g in load("ex5_2").gs)
    x2p1 = QuadraticFunction(np.eye(1), np.zeros(1), 1.0)
    assert check_slater([x2p1]).verdict is Verdict.NO
    x2 = QuadraticFunction(np.eye(1), np.zeros(1), 0.0)
    assert check_slater([x2]).verdict is Verdict.NO
    neg = QuadraticFunction(-np.eye(1), np.zeros(1), 1.0)  # nonconvex, x^2 >= 1 is feasible
    assert check_slater([neg]).holds
    saddle = QuadraticFunction(np.diag([1.0, -1.0]), np.zeros(2), 1.0)
    assert check_slater([saddle]).holds


def test_full_report_is_consistent_and_serializable(load):
    for name in ("ex3_1", "ex3_2", "ex3_3", "ex5_2", "cdt", "convex"):
        rep = full_report(load(name))
        assert rep.consistent, rep.issues
        d = rep.as_dict()
        assert d["kind"] == load(name).kind.value


def test_implication_chain_small_sample(rng):
    for _ in range(150):
        rep = full_report(gen.random_tp(rng))
        if rep.dimension_condition.holds:
            assert rep.H4.holds
        if rep.H4.holds:
            assert rep.H3.holds
        if rep.H3.holds:
            assert rep.H1_H2.holds
        assert rep.consistent, rep.issues

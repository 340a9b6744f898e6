import math

import numpy as np
import pytest

from qhc import generators as gen
from qhc.assumptions import QCQPInstance
from qhc.errors import InputError, PreconditionError
from qhc.quad_core import QuadraticFunction, homogenize, sym_eigen
from qhc.search import primal_oracle
from qhc.slemma_duality import (
    dual_value,
    is_globally_nonneg,
    lagrangian,
    maximize_dual,
    mu_supergradient,
    mu_value,
    slemma_decide,
    strong_duality_report,
    weak_duality_violations,
)


def test_dual_values_on_worked_example(load):
    inst = load("ex5_2")
    assert dual_value(inst, [1.0, 0.0]).value == pytest.approx(-1.0, abs=1e-9)
    assert dual_value(inst, [0.5, 0.0]).value == -math.inf
    # above the PSD threshold the dual function is -t
    for t in (1.5, 2.0, 4.0):
        assert dual_value(inst, [t, 0.0]).value == pytest.approx(-t, abs=1e-9)


def test_dual_rejects_bad_multipliers(load):
    with pytest.raises(InputError):
        dual_value(load("ex5_2"), [-1.0, 0.0])
    with pytest.raises(InputError):
        dual_value(load("ex5_2"), [1.0])


def test_maximize_dual_and_gap(load):
    inst = load("ex5_2")
    res = maximize_dual(inst)
    assert res.dual_value == pytest.approx(-1.0, abs=1e-6)
    rep = strong_duality_report(inst)
    assert rep.hypotheses and rep.gap_ok and abs(rep.gap) <= 1e-5
    assert not weak_duality_violations(rep.trace, rep.primal_value)


def test_convex_fixture_has_zero_multiplier(load):
    rep = strong_duality_report(load("convex"))
    assert rep.gap == pytest.approx(0.0, abs=1e-9)
    assert rep.lambda_star[0] == pytest.approx(0.0, abs=1e-9)


def test_positive_gap_when_hypotheses_fail(load):
    rep = strong_duality_report(load("ex3_3"))
    assert not rep.hypotheses and rep.gap > 0.5 and rep.gap_ok is None


def test_dual_never_exceeds_primal(rng):
    for _ in range(60):
        inst = gen.random_tp_slater(rng)
        res = maximize_dual(inst)
        prim = primal_oracle(inst.f, inst.gs)
        assert not weak_duality_violations(res.trace, prim.value)
        for lam in rng.exponential(2.0, size=(5, inst.m)):
            assert dual_value(inst, lam).value <= prim.value + 1e-8 * (1 + abs(prim.value))


def test_global_nonnegativity():
    assert is_globally_nonneg(QuadraticFunction(np.eye(1), np.array([-2.0]), 1.0))  # (x - 1)^2
    assert not is_globally_nonneg(QuadraticFunction(np.eye(1), np.array([-2.0]), 0.5))
    assert not is_globally_nonneg(QuadraticFunction(np.zeros((1, 1)), np.array([1.0]), 5.0))


def test_mu_supergradient_is_valid(rng):
    for _ in range(30):
        inst = gen.random_tp_slater(rng)
        lam = rng.exponential(1.0, size=inst.m)
        s = mu_supergradient(inst, lam)
        for _ in range(5):
            other = rng.exponential(1.0, size=inst.m)
            assert mu_value(inst, other) <= mu_value(inst, lam) + s @ (other - lam) + 1e-9


def test_slemma_multiplier_and_counterexample():
    ball = QuadraticFunction.ball(np.zeros(1), 1.0)
    f_pos = QuadraticFunction(-np.eye(1), np.zeros(1), 1.0)  # 1 - x^2 >= 0 on the ball
    cert = slemma_decide(QCQPInstance(f_pos, (ball,)))
    assert cert.kind == "multiplier-found"
    L = lagrangian(QCQPInstance(f_pos, (ball,)), cert.lambdas)
    assert is_globally_nonneg(L, 1e-8)
    f_neg = QuadraticFunction(-np.eye(1), np.zeros(1), 0.5)
    cert = slemma_decide(QCQPInstance(f_neg, (ball,)))
    assert cert.kind == "counterexample" and cert.f_value < 0 and cert.max_g <= 0


def test_slemma_never_inconclusive_with_one_constraint(rng):
    for _ in range(60):
        inst = gen.random_slater_m1(rng)
        cert = slemma_decide(inst)
        assert cert.kind != "inconclusive"
        if cert.kind == "counterexample":
            assert inst.gs[0](cert.x) <= 0 and inst.f(cert.x) < 0


def test_strong_duality_dimension_cap():
    inst = QCQPInstance.trust_region(np.eye(5), np.zeros(5), np.zeros(5), 1.0)
    with pytest.raises(PreconditionError):
        strong_duality_report(inst)


def test_mu_directional_derivative_matches_eigenvector(rng):
    checked = 0
    for _ in range(80):
        inst = gen.random_tp_slater(rng)
        lam = rng.exponential(1.0, size=inst.m)
        w = sym_eigen(homogenize(lagrangian(inst, lam))).eigenvalues
        if w[1] - w[0] < 1e-3:
            continue  # nonsmooth point
        d = rng.normal(size=inst.m)
        h = 1e-6
        fd = (mu_value(inst, lam + h * d) - mu_value(inst, lam - h * d)) / (2 * h)
        assert fd == pytest.approx(mu_supergradient(inst, lam) @ d, abs=1e-4)
        checked += 1
    assert checked > 40

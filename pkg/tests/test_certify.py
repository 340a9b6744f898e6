import math

import numpy as np
import pytest

from qhc import generators as gen
from qhc.assumptions import QCQPInstance, full_report
from qhc.certify import (
    boundary_restoration,
    cdt_sphere_minimizer,
    certify_point,
    recover_multipliers,
    solve_tp_global,
    verify_certificate,
)
from qhc.errors import InputError, PreconditionError
from qhc.search import primal_oracle, sample_feasible
from qhc.tolerances import ToleranceProfile


def test_certificate_on_worked_example(load):
    inst = load("ex5_2")
    xbar = np.array([1.0, -1.0]) / math.sqrt(2.0)
    cert = verify_certificate(inst, xbar, [1.0, 0.0])
    assert cert.valid and cert.verdict == "valid"
    assert cert.residuals["objective"] == pytest.approx(-1.0)


@pytest.mark.parametrize(
    "x, lam, failed",
    [
        ([1.0, 1.0], [1.0, 0.0], "stationarity"),
        ([2.0, -2.0], [1.0, 0.0], "complementarity"),
        ([0.0, 0.0], [0.0, 0.0], "psd"),
    ],
)
def test_certificate_failures_are_named(load, x, lam, failed):
    cert = verify_certificate(load("ex5_2"), x, lam)
    assert not cert.valid and cert.failed == failed


def test_infeasible_point_fails_feasibility(load):
    cert = verify_certificate(load("ex3_1"), [2.0], [0.0, 0.0])
    assert not cert.valid
    with pytest.raises(InputError):
        verify_certificate(load("ex3_1"), [2.0], [1.0])


def test_tolerance_profile_changes_verdict(load):
    inst = load("ex5_2")
    x = np.array([1.0, -1.0]) / math.sqrt(2.0) + 1e-6
    assert not verify_certificate(inst, x, [1.0, 0.0]).valid
    loose = ToleranceProfile(eq=1e-4, ineq=1e-4, psd=1e-9)
    assert verify_certificate(inst, x, [1.0, 0.0], loose).valid


def test_recovered_multipliers(load):
    inst = load("ex5_2")
    x = np.array([1.0, -1.0]) / math.sqrt(2.0)
    assert np.allclose(recover_multipliers(inst, x), [1.0, 0.0], atol=1e-9)


def test_solve_tp_global_worked_examples(load):
    sol = solve_tp_global(load("ex3_1"))
    assert sol.value == pytest.approx(-2.0, abs=1e-8) and sol.x_star[0] == pytest.approx(-1.0, abs=1e-6)
    assert sol.certificate.valid
    sol = solve_tp_global(load("ex5_2"))
    assert sol.value == pytest.approx(-1.0, abs=1e-8) and sol.certificate.valid
    with pytest.raises(PreconditionError):
        solve_tp_global(load("convex"))


def test_soundness_on_random_instances(rng):
    checked = 0
    for _ in range(40):
        inst = gen.random_tp_slater(rng)
        sol = solve_tp_global(inst)
        if sol.certificate is None or not sol.certificate.valid:
            continue
        X = sample_feasible(inst.gs, inst.n, 2000, rng)
        assert inst.f.values(X).min() >= sol.value - 1e-6
        checked += 1
    assert checked >= 20


def test_completeness_under_hypotheses(rng):
    done = 0
    while done < 30:
        inst = gen.random_tp_slater(rng)
        if not full_report(inst).strong_duality_hypotheses:
            continue
        prim = primal_oracle(inst.f, inst.gs)
        assert certify_point(inst, prim.x).valid
        done += 1


def test_restoration_invariants(rng):
    done = 0
    while done < 300:
        inst = gen.random_tp(rng, n_max=3, m_max=3)
        rep = full_report(inst)
        if not rep.H1_H2.holds or rep.H1_H2.detail["i0"] != 0:
            continue
        lam = rep.H1_H2.detail["lambda"]
        A, a, x0, alpha, B = inst.tp_parts()
        x_in = x0 + rng.normal(size=inst.n) * 0.3 * math.sqrt(alpha) / math.sqrt(inst.n)
        omega = np.array([g(x_in) for g in inst.gs]) + np.append(rng.uniform(0.1, 2.0), np.zeros(inst.m - 1))
        res = boundary_restoration(inst, 0, lam, x_in, omega, rep.H1_H2.witness)
        assert abs(inst.gs[0](res.x_out) - omega[0]) <= 1e-8 * (1 + abs(omega[0]))
        F = inst.f + lam * inst.gs[0]
        assert F(res.x_out) <= F(x_in) + 1e-8 * (1 + abs(F(x_in)))
        for g in inst.gs[1:]:
            assert g(res.x_out) <= g(x_in) + 1e-8
        done += 1


def test_restoration_input_errors(load):
    inst = load("ex3_1")
    with pytest.raises(InputError):
        boundary_restoration(inst, 0, 1.0, [0.0], [-5.0, 0.0])  # start above the target
    with pytest.raises(InputError):
        boundary_restoration(inst, 0, 1.0, [0.0], [0.0])


def test_cdt_sphere_minimizer(load):
    res = cdt_sphere_minimizer(load("cdt"))
    assert np.linalg.norm(res.x_star) == pytest.approx(1.0, abs=1e-8)
    assert res.value <= res.interior_value + 1e-7
    blocked = QCQPInstance.cdt(np.diag([1.0, 2.0]), [-1.0, 0.0], np.eye(2), np.zeros(2))
    with pytest.raises(PreconditionError):
        cdt_sphere_minimizer(blocked)


def test_cdt_on_constructed_instances(rng):
    done = 0
    while done < 15:
        inst = gen.random_ap(rng)
        if not full_report(inst).cdt_condition.holds:
            continue
        res = cdt_sphere_minimizer(inst)
        assert abs(np.linalg.norm(res.x_star) - 1.0) <= 1e-8
        assert res.value <= res.interior_value + 1e-7
        done += 1

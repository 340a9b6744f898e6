import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qhc import generators as gen
from qhc.assumptions import QCQPInstance
from qhc.errors import InputError, InternalContradiction, PreconditionError
from qhc.hidden_convexity import (
    MembershipOracleConfig,
    Shape,
    classify_region_1d,
    membership_1d,
    membership_1d_batch,
    sample_U_convexity,
    segment_witness,
    solve_quad_inequality_1d,
)
from qhc.quad_core import Quadratic1D, QuadraticFunction

coef = st.integers(-5, 5).map(float)


@settings(max_examples=300, deadline=None)
@given(coef, coef, coef, st.floats(-20, 20))
def test_scalar_inequality_against_grid(a1, a2, a3, level):
    q = Quadratic1D(a1, a2, a3)
    sets = solve_quad_inequality_1d(q, level)
    ts = np.linspace(-30, 30, 6001)
    inside = np.zeros_like(ts, dtype=bool)
    for lo, hi in sets:
        inside |= (ts >= lo) & (ts <= hi)
    vals = q(ts) - level
    clear = np.abs(vals) > 1e-7
    assert np.array_equal(inside[clear], (vals <= 0)[clear])


def test_scalar_inequality_edge_cases():
    assert solve_quad_inequality_1d(Quadratic1D(0, 0, 1)) == ()
    assert solve_quad_inequality_1d(Quadratic1D(0, 0, 0)) == ((-np.inf, np.inf),)
    assert solve_quad_inequality_1d(Quadratic1D(1, 0, 0)) == ((0.0, 0.0),)
    (lo, hi), (lo2, hi2) = solve_quad_inequality_1d(Quadratic1D(-1, 0, 1))
    assert (lo, hi, lo2, hi2) == (-np.inf, -1.0, 1.0, np.inf)


def test_membership_nonmember_has_disjoint_sets_and_separator():
    alpha, beta = Quadratic1D(0, 1, 0), Quadratic1D(0, -1, 0)  # t and -t
    res = membership_1d(alpha, beta, [-1.0, -1.0])
    assert not res.member
    s1, s2, margin = res.separator
    assert margin > 0 and s1 >= 0 and s2 >= 0
    assert membership_1d(alpha, beta, [1.0, -1.0]).member


@settings(max_examples=300, deadline=None)
@given(coef, coef, coef, coef, coef, coef, st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 1))
def test_image_combinations_are_members(a1, a2, a3, b1, b2, b3, x, y, th):
    alpha, beta = Quadratic1D(a1, a2, a3), Quadratic1D(b1, b2, b3)
    t = th * np.array([alpha(x), beta(x)]) + (1 - th) * np.array([alpha(y), beta(y)])
    res = membership_1d(alpha, beta, t)
    assert res.member
    assert alpha(res.witness) <= t[0] + 1e-7 * (1 + abs(t[0]))
    assert beta(res.witness) <= t[1] + 1e-7 * (1 + abs(t[1]))


def test_batch_membership_matches_scalar(rng):
    for _ in range(100):
        alpha, beta = gen.random_pair_1d(rng)
        T = rng.normal(scale=5.0, size=(30, 2))
        mask, _ = membership_1d_batch(alpha, beta, T)
        assert [bool(m) for m in mask] == [membership_1d(alpha, beta, t).member for t in T]


@pytest.mark.parametrize(
    "alpha, beta, shape",
    [
        (Quadratic1D(-1, 0, 0), Quadratic1D(0, 1, 0), Shape.FULL_PLANE),
        (Quadratic1D(0, 0, 2), Quadratic1D(-1, 0, 0), Shape.HALF_PLANE_X),
        (Quadratic1D(0, -1, 0), Quadratic1D(0, 0, 3), Shape.HALF_PLANE_Y),
        (Quadratic1D(1, 0, 0), Quadratic1D(0, 1, 0), Shape.EPIGRAPH_LIKE),
    ],
)
def test_region_classification(alpha, beta, shape, rng):
    reg = classify_region_1d(alpha, beta)
    assert reg.shape is shape
    for t in rng.normal(scale=4.0, size=(200, 2)):
        assert reg.contains(t) == membership_1d(alpha, beta, t).member


def test_segment_witness_random_manifolds(rng):
    for _ in range(200):
        n = int(rng.integers(1, 5))
        f = QuadraticFunction(gen.int_sym(rng, n), rng.normal(size=n), rng.normal())
        g = QuadraticFunction(gen.int_sym(rng, n), rng.normal(size=n), rng.normal())
        k = int(rng.integers(1, n + 1))
        base, basis = rng.normal(size=n), rng.normal(size=(n, k))
        a, b = base + basis @ rng.normal(size=k), base + basis @ rng.normal(size=k)
        th = rng.random()
        w = th * np.array([f(a), g(a)]) + (1 - th) * np.array([f(b), g(b)])
        sw = segment_witness(f, g, base, basis, a, b, w)
        assert f(sw.x) <= w[0] + 1e-7 * (1 + abs(w[0])) and g(sw.x) <= w[1] + 1e-7 * (1 + abs(w[1]))
        assert np.allclose(sw.x, sw.t * a + (1 - sw.t) * b)


def test_segment_witness_input_errors():
    f = QuadraticFunction(np.eye(2), np.zeros(2), 0.0)
    with pytest.raises(InputError):
        segment_witness(f, f, np.zeros(2), np.array([[1.0], [0.0]]), [0.0, 1.0], [1.0, 0.0], [1.0, 1.0])
    with pytest.raises(InternalContradiction):
        segment_witness(f, f, np.zeros(2), np.eye(2), [1.0, 0.0], [0.0, 1.0], [-1.0, -1.0])


def test_sampler_finds_certified_violation(load):
    rep = sample_U_convexity(load("ex3_3"), trials=200, seed=1, pairs=[[[0.0], [1.0]]])
    assert rep.certified > 0 and rep.violations[0].status == "certified"
    v = rep.violations[0]
    assert {float(v.x_u[0]), float(v.x_v[0])} == {0.0, 1.0}


def test_sampler_no_violation_on_convex_images(load):
    assert sample_U_convexity(load("ex3_1"), trials=2000, seed=3).ok
    rep = sample_U_convexity(load("ex3_2"), trials=500, seed=3)
    assert rep.ok and rep.resolved["line"] > 0


def test_sampler_trivial_and_precondition(load):
    rep = sample_U_convexity(load("ex3_2"), trials=0)
    assert rep.violations == [] and rep.targets == 0
    big = QCQPInstance.trust_region(np.eye(5), np.zeros(5), np.zeros(5), 1.0)
    with pytest.raises(PreconditionError):
        sample_U_convexity(big, trials=1)


def test_sampler_determinism_and_thread_invariance(load):
    inst = load("ex3_2")
    a = sample_U_convexity(inst, trials=300, seed=9).as_dict()
    b = sample_U_convexity(inst, trials=300, seed=9, threads=3).as_dict()
    assert a == b


def test_oracle_config_validation():
    with pytest.raises(InputError):
        MembershipOracleConfig(box_radius=0)
    cfg = MembershipOracleConfig().scaled(4)
    assert cfg.max_grid_points == 80_000 and cfg.box_radius == 10.0

import numpy as np
import pytest
from scipy.optimize import linprog as scipy_linprog

from qhc.cones import PolyhedralCone, cone_is_nontrivial, matrix_rank, nullspace, recession_cone
from qhc.errors import PreconditionError
from qhc.quad_core import QuadraticFunction
from qhc.simplex import linprog, lp_feasible


def test_simplex_against_scipy(rng):
    agree = 0
    for _ in range(300):
        n = int(rng.integers(1, 5))
        k = int(rng.integers(1, 6))
        A = rng.integers(-3, 4, size=(k, n)).astype(float)
        b = rng.integers(-2, 5, size=k).astype(float)
        c = rng.integers(-3, 4, size=n).astype(float)
        bounds = [(-5.0, 5.0)] * n
        ours = linprog(c, A, b, bounds=bounds)
        ref = scipy_linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
        assert ours.feasible == (ref.status == 0)
        if ref.status == 0:
            assert ours.fun == pytest.approx(ref.fun, abs=1e-7)
            assert np.all(A @ ours.x <= b + 1e-8)
            agree += 1
    assert agree > 100


def test_simplex_unbounded_and_equalities():
    assert linprog([-1.0], bounds=[(0, None)]).status == "unbounded"
    res = linprog([1.0, 1.0], A_eq=[[1.0, 1.0]], b_eq=[2.0], bounds=[(0, None), (0, None)])
    assert res.fun == pytest.approx(2.0)
    ok, _ = lp_feasible([[1.0]], [1.0], [[1.0]], [0.0])
    assert not ok


def test_nullspace_and_rank():
    M = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0]])
    N = nullspace(M)
    assert N.dim == 2 and matrix_rank(M) == 1
    assert np.allclose(M @ N.basis, 0)
    assert np.allclose(N.basis.T @ N.basis, np.eye(2))


@pytest.mark.parametrize(
    "E, G, expected",
    [
        (np.zeros((0, 2)), np.eye(2), True),  # nonpositive orthant
        (np.zeros((0, 2)), np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]), False),
        (np.array([[1.0, -1.0]]), np.array([[1.0, 1.0]]), True),
        (np.eye(2), np.zeros((0, 2)), False),
    ],
)
def test_cone_nontriviality(E, G, expected):
    K = PolyhedralCone(2, E, G)
    res = cone_is_nontrivial(K)
    assert bool(res) == expected
    if expected:
        assert K.contains(res.witness) and np.abs(res.witness).max() == pytest.approx(1.0)


def test_cone_verdict_invariant_under_row_scaling(rng):
    for _ in range(100):
        n = int(rng.integers(1, 4))
        E = rng.integers(-1, 2, size=(int(rng.integers(0, 2)), n)).astype(float)
        G = rng.integers(-2, 3, size=(int(rng.integers(0, 4)), n)).astype(float)
        s = rng.uniform(0.01, 100.0, size=G.shape[0])
        a = bool(cone_is_nontrivial(PolyhedralCone(n, E, G)))
        b = bool(cone_is_nontrivial(PolyhedralCone(n, E, G * s[:, None])))
        assert a == b


def test_recession_cone_of_convex_system():
    slab = QuadraticFunction(np.diag([1.0, 0.0]), np.array([0.0, 1.0]), -1.0)  # x1^2 + x2 <= 1
    K = recession_cone([slab])
    assert K.contains([0.0, -1.0]) and not K.contains([0.0, 1.0]) and not K.contains([1.0, 0.0])
    with pytest.raises(PreconditionError):
        recession_cone([QuadraticFunction(-np.eye(2), np.zeros(2), 0.0)])

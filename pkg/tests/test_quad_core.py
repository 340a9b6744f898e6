import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qhc.errors import InputError
from qhc.quad_core import (
    QuadraticFunction,
    gradient,
    homogenize,
    is_pd,
    is_psd,
    restrict_to_line,
    smallest_eigenvalue,
    sym_eigen,
    symmetrize,
)

small = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def sym_matrices(draw, max_n=5):
    n = draw(st.integers(1, max_n))
    M = draw(arrays(float, (n, n), elements=small))
    return 0.5 * (M + M.T)


@settings(max_examples=200, deadline=None)
@given(sym_matrices())
def test_jacobi_matches_lapack(Q):
    eig = sym_eigen(Q)
    ref = np.linalg.eigvalsh(Q)
    assert np.allclose(eig.eigenvalues, ref, atol=1e-9 * (1 + np.abs(ref).max()))
    V = eig.eigenvectors
    assert np.allclose(V.T @ V, np.eye(len(Q)), atol=1e-10)
    assert np.allclose(V @ np.diag(eig.eigenvalues) @ V.T, Q, atol=1e-9 * (1 + np.abs(Q).max()))
    assert np.all(np.diff(eig.eigenvalues) >= 0)


def test_psd_and_pd_tests():
    assert is_psd(np.diag([0.0, 1.0]))
    assert not is_pd(np.diag([0.0, 1.0]))
    assert is_pd(np.eye(3))
    assert not is_psd(np.diag([-1e-3, 1.0]))
    assert smallest_eigenvalue([[0, 1], [1, 0]]) == pytest.approx(-1.0)


def test_symmetrize_rejects_strong_asymmetry():
    with pytest.raises(InputError):
        symmetrize([[0.0, 1.0], [0.0, 0.0]])


@settings(max_examples=100, deadline=None)
@given(sym_matrices(4), st.data())
def test_homogenization_and_evaluation(Q, data):
    n = Q.shape[0]
    q = data.draw(arrays(float, n, elements=small))
    c = data.draw(small)
    x = data.draw(arrays(float, n, elements=small))
    f = QuadraticFunction(Q, q, c)
    z = np.append(x, 1.0)
    assert z @ homogenize(f) @ z == pytest.approx(f(x), rel=1e-9, abs=1e-9)
    eps = 1e-6
    fd = np.array([(f(x + eps * e) - f(x - eps * e)) / (2 * eps) for e in np.eye(n)])
    assert np.allclose(gradient(f, x), fd, atol=1e-4 * (1 + np.abs(fd).max()))


def test_restrict_to_line_agrees_with_evaluation(rng):
    for _ in range(50):
        n = int(rng.integers(1, 5))
        A = rng.normal(size=(n, n))
        f = QuadraticFunction(A + A.T, rng.normal(size=n), rng.normal())
        base, d = rng.normal(size=n), rng.normal(size=n)
        line = restrict_to_line(f, base, d)
        for t in rng.normal(size=5):
            assert line(t) == pytest.approx(f(base + t * d), rel=1e-10, abs=1e-10)


def test_arithmetic_and_dimension_checks():
    f = QuadraticFunction.ball(np.zeros(2), 1.0)
    g = QuadraticFunction.affine([1.0, 0.0], 2.0)
    h = f + 2.0 * g
    assert h(np.array([1.0, 1.0])) == pytest.approx(1.0 + 2.0 * 3.0)
    assert (f - f).allclose(QuadraticFunction.zero(2))
    with pytest.raises(InputError):
        f + QuadraticFunction.zero(3)
    with pytest.raises(InputError):
        f(np.zeros(3))

"""Seeded random instance families for the property suites."""

from __future__ import annotations

import numpy as np

from .assumptions import QCQPInstance
from .quad_core import Quadratic1D, QuadraticFunction


def int_sym(rng, n, lo=-3, hi=3):
    M = rng.integers(lo, hi + 1, size=(n, n)).astype(float)
    return np.triu(M) + np.triu(M, 1).T


def random_pair_1d(rng, bound=5):
    a = rng.integers(-bound, bound + 1, size=6).astype(float)
    return Quadratic1D(*a[:3]), Quadratic1D(*a[3:])


def random_tp(rng, n_max=4, m_max=4, bound=3) -> QCQPInstance:
    """Integer trust-region data, mixing three families.

    General symmetric ``A``; diagonal ``A``; diagonal ``A`` with sparse
    normals ``b_i``.  The diagonal families hit kernel/hyperplane
    coincidences often enough to exercise the strict implications.
    """
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    family = int(rng.integers(0, 3))
    if family == 0:
        A = int_sym(rng, n, -bound, bound)
    else:
        A = np.diag(rng.integers(-bound, bound + 1, size=n).astype(float))
    a = rng.integers(-bound, bound + 1, size=n).astype(float)
    x0 = rng.integers(-bound, bound + 1, size=n).astype(float)
    alpha = float(rng.integers(1, 10))
    B = rng.integers(-bound, bound + 1, size=(m - 1, n)).astype(float)
    if family == 2 and m > 1:
        B *= rng.random((m - 1, n)) < 0.4
    for row in B:
        if not row.any():
            row[int(rng.integers(0, n))] = 1.0
    betas = B @ x0 + rng.integers(-bound, bound + 1, size=m - 1)
    return QCQPInstance.trust_region(A, a, x0, alpha, B, betas)


def random_tp_slater(rng, n_max=3, m_max=3, bound=3) -> QCQPInstance:
    """Trust-region data whose center is strictly feasible for every halfspace."""
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    if rng.random() < 0.5:
        A = int_sym(rng, n, -bound, bound)
    else:
        A = np.diag(rng.integers(-bound, bound + 1, size=n).astype(float))
    a = rng.integers(-bound, bound + 1, size=n).astype(float)
    x0 = rng.integers(-2, 3, size=n).astype(float)
    alpha = float(rng.integers(1, 5))
    B = rng.integers(-bound, bound + 1, size=(m - 1, n)).astype(float)
    for row in B:
        if not row.any():
            row[int(rng.integers(0, n))] = 1.0
    betas = B @ x0 + rng.integers(0, bound + 1, size=m - 1) + 0.5
    return QCQPInstance.trust_region(A, a, x0, alpha, B, betas)


def random_tp_m1(rng, n=2) -> QCQPInstance:
    """Single-ball trust region with Gaussian data."""
    A = rng.normal(size=(n, n))
    A = 0.5 * (A + A.T)
    return QCQPInstance.trust_region(A, rng.normal(size=n), rng.normal(size=n), float(rng.uniform(0.2, 4.0)))


def random_slater_m1(rng, n_max=3) -> QCQPInstance:
    """``f`` and one constraint ``g`` with ``g(x_s) = -1`` at a random ``x_s``.

    Half of the objectives are random; the other half are built as
    ``sigma + lam0 * (-g)`` with ``sigma`` globally nonnegative, so the
    S-lemma multiplier ``lam0`` exists by construction.
    """
    n = int(rng.integers(1, n_max + 1))
    G = int_sym(rng, n)
    gq = rng.integers(-3, 4, size=n).astype(float)
    xs = rng.integers(-2, 3, size=n).astype(float)
    g0 = QuadraticFunction(G, gq, 0.0)
    g = g0.shift(-1.0 - g0(xs))
    if rng.random() < 0.5:
        f = QuadraticFunction(int_sym(rng, n), rng.integers(-3, 4, size=n).astype(float), float(rng.integers(-3, 4)))
    else:
        R = rng.integers(-2, 3, size=(n + 1, n + 1)).astype(float)
        H = R.T @ R
        sigma = QuadraticFunction(H[:n, :n], 2.0 * H[:n, n], H[n, n] + float(rng.integers(0, 2)))
        lam0 = float(rng.integers(0, 4))
        f = sigma + (-lam0) * g
    return QCQPInstance(f, (g,))


def random_ap(rng, n_max=3) -> QCQPInstance:
    """Two-ball instance built so that the kernel condition holds.

    A unit eigenvector ``v`` of the smallest eigenvalue is fixed first; ``C``
    annihilates it, rows of ``D`` and ``a`` have nonpositive inner product
    with it, ``||c|| < 1`` and ``d >= 0`` keep the origin feasible.  Half of
    the draws make ``a`` orthogonal to ``v`` so that the objective is flat
    along ``v`` and the minimizer found may sit strictly inside the ball.
    """
    n = int(rng.integers(2, n_max + 1))
    U, _ = np.linalg.qr(rng.normal(size=(n, n)))
    evals = np.sort(rng.uniform(-2.0, 2.0, size=n))
    evals[1:] += 0.5  # simple smallest eigenvalue
    A = U @ np.diag(evals) @ U.T
    A = 0.5 * (A + A.T)
    v = U[:, 0]
    P = np.eye(n) - np.outer(v, v)
    l = int(rng.integers(1, n))
    C = rng.normal(size=(l, n)) @ P
    c = rng.normal(size=l)
    c *= rng.uniform(0.0, 0.8) / max(np.linalg.norm(c), 1e-12)
    k = int(rng.integers(0, 3))
    D = rng.normal(size=(k, n))
    D -= np.outer(D @ v + np.abs(rng.normal(size=k)), v)
    d = np.abs(rng.normal(size=k))
    a = rng.normal(size=n)
    if rng.random() < 0.5:
        a -= (a @ v + abs(rng.normal())) * v
    else:
        a -= (a @ v) * v  # objective flat along v: interior minimizers exist
    return QCQPInstance.cdt(A, a, C, c, D, d)

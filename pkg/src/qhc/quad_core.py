"""Quadratic functions, symmetric eigenstructure and PSD testing.

Every quadratic is stored as ``x^T Q x + q^T x + c`` with no 1/2 factor on
the quadratic term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InputError, NumericalError

SYMMETRY_RTOL = 1e-12
PSD_TOL = 1e-9
JACOBI_MAX_SWEEPS = 100
JACOBI_RTOL = 1e-12


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def symmetrize(Q, rtol: float = SYMMETRY_RTOL) -> np.ndarray:
    """Return ``(Q + Q^T)/2`` after checking that ``Q`` is nearly symmetric."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise InputError(f"expected a square matrix, got shape {Q.shape}")
    if not np.all(np.isfinite(Q)):
        raise InputError("matrix has non-finite entries")
    scale = 1.0 + (np.abs(Q).max() if Q.size else 0.0)
    if Q.size and np.abs(Q - Q.T).max() > rtol * scale:
        raise InputError("matrix is not symmetric")
    return 0.5 * (Q + Q.T)


@dataclass(frozen=True, eq=False)
class QuadraticFunction:
    """The quadratic ``x -> x^T Q x + q^T x + c`` on R^n."""

    Q: np.ndarray
    q: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        Q = symmetrize(self.Q)
        q = np.asarray(self.q, dtype=float).reshape(-1)
        if q.shape[0] != Q.shape[0]:
            raise InputError(f"linear term has length {q.shape[0]}, expected {Q.shape[0]}")
        if not np.all(np.isfinite(q)) or not math.isfinite(float(self.c)):
            raise InputError("non-finite coefficients")
        object.__setattr__(self, "Q", _frozen(Q))
        object.__setattr__(self, "q", _frozen(q))
        object.__setattr__(self, "c", float(self.c))

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    @classmethod
    def zero(cls, n: int) -> "QuadraticFunction":
        return cls(np.zeros((n, n)), np.zeros(n), 0.0)

    @classmethod
    def affine(cls, b, beta: float = 0.0) -> "QuadraticFunction":
        """``b^T x + beta``."""
        b = np.asarray(b, dtype=float).reshape(-1)
        return cls(np.zeros((b.size, b.size)), b, beta)

    @classmethod
    def ball(cls, center, radius_sq: float) -> "QuadraticFunction":
        """``||x - center||^2 - radius_sq``."""
        x0 = np.asarray(center, dtype=float).reshape(-1)
        return cls(np.eye(x0.size), -2.0 * x0, float(x0 @ x0) - radius_sq)

    def __call__(self, x) -> float:
        return evaluate(self, x)

    def values(self, X: np.ndarray) -> np.ndarray:
        """Evaluate at every row of ``X`` (shape ``(k, n)``)."""
        X = np.asarray(X, dtype=float)
        return np.einsum("ki,ij,kj->k", X, self.Q, X) + X @ self.q + self.c

    def __add__(self, other: "QuadraticFunction") -> "QuadraticFunction":
        if not isinstance(other, QuadraticFunction):
            return NotImplemented
        _check_same_dim(self, other)
        return QuadraticFunction(self.Q + other.Q, self.q + other.q, self.c + other.c)

    def __sub__(self, other: "QuadraticFunction") -> "QuadraticFunction":
        if not isinstance(other, QuadraticFunction):
            return NotImplemented
        return self + (-1.0) * other

    def __mul__(self, scalar: float) -> "QuadraticFunction":
        s = float(scalar)
        return QuadraticFunction(s * self.Q, s * self.q, s * self.c)

    __rmul__ = __mul__

    def shift(self, delta: float) -> "QuadraticFunction":
        return QuadraticFunction(self.Q, self.q, self.c + delta)

    def allclose(self, other: "QuadraticFunction", atol: float = 0.0) -> bool:
        return (
            self.dim == other.dim
            and np.allclose(self.Q, other.Q, rtol=0, atol=atol)
            and np.allclose(self.q, other.q, rtol=0, atol=atol)
            and abs(self.c - other.c) <= atol
        )

    def __repr__(self) -> str:
        return f"QuadraticFunction(Q={self.Q.tolist()}, q={self.q.tolist()}, c={self.c})"


def _check_same_dim(f: QuadraticFunction, g: QuadraticFunction) -> None:
    if f.dim != g.dim:
        raise InputError(f"dimension mismatch: {f.dim} vs {g.dim}")


class Quadratic1D(NamedTuple):
    """``t -> a1 t^2 + a2 t + a3``."""

    a1: float
    a2: float
    a3: float

    def __call__(self, t):
        return (self.a1 * t + self.a2) * t + self.a3

    evaluate = __call__


class EigenResult(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def smallest(self) -> float:
        return float(self.eigenvalues[0])


class PSDResult(NamedTuple):
    is_psd: bool
    margin: float

    def __bool__(self) -> bool:
        return self.is_psd


def _vector(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != n:
        raise InputError(f"vector has length {x.shape[0]}, expected {n}")
    return x


def evaluate(f: QuadraticFunction, x) -> float:
    x = _vector(x, f.dim)
    return float(x @ f.Q @ x + f.q @ x + f.c)


def gradient(f: QuadraticFunction, x) -> np.ndarray:
    x = _vector(x, f.dim)
    return 2.0 * f.Q @ x + f.q


def sym_eigen(Q) -> EigenResult:
    """Spectral decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Eigenvalues are returned in ascending order with orthonormal eigenvector
    columns.  Raises ``NumericalError`` if the off-diagonal mass is not driven
    below ``1e-12 * ||Q||_F`` within 100 sweeps.
    """
    A = symmetrize(Q).copy()
    n = A.shape[0]
    V = np.eye(n)
    if n == 1:
        return EigenResult(A.diagonal().copy(), V)
    target = JACOBI_RTOL * np.linalg.norm(A)
    offdiag = ~np.eye(n, dtype=bool)
    for _ in range(JACOBI_MAX_SWEEPS):
        if np.linalg.norm(A[offdiag]) <= target:
            break
        for p in range(n - 1):
            for r in range(p + 1, n):
                apr = A[p, r]
                if abs(apr) <= 1e-300 or abs(apr) < 1e-18 * (abs(A[p, p]) + abs(A[r, r])):
                    A[p, r] = A[r, p] = 0.0
                    continue
                theta = (A[r, r] - A[p, p]) / (2.0 * apr)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                cs = 1.0 / math.sqrt(t * t + 1.0)
                sn = t * cs
                # A <- J^T A J with J the (p, r) rotation
                col_p = A[:, p].copy()
                col_r = A[:, r]
                A[:, p] = cs * col_p - sn * col_r
                A[:, r] = sn * col_p + cs * col_r
                row_p = A[p, :].copy()
                row_r = A[r, :]
                A[p, :] = cs * row_p - sn * row_r
                A[r, :] = sn * row_p + cs * row_r
                A[p, r] = A[r, p] = 0.0
                v_p = V[:, p].copy()
                V[:, p] = cs * v_p - sn * V[:, r]
                V[:, r] = sn * v_p + cs * V[:, r]
    else:
        if np.linalg.norm(A[offdiag]) > target:
            raise NumericalError("Jacobi eigensolver did not converge")
    w = A.diagonal().copy()
    order = np.argsort(w, kind="stable")
    return EigenResult(w[order], V[:, order])


def smallest_eigenvalue(Q) -> float:
    return sym_eigen(Q).smallest


def is_psd(Q, tol: float = PSD_TOL) -> PSDResult:
    """PSD test: ``lambda_min(Q) >= -tol * (1 + ||Q||_inf)``; margin is ``lambda_min``."""
    Q = symmetrize(Q)
    lam = smallest_eigenvalue(Q)
    scale = 1.0 + (np.abs(Q).sum(axis=1).max() if Q.size else 0.0)
    return PSDResult(bool(lam >= -tol * scale), lam)


def is_pd(Q, tol: float = PSD_TOL) -> PSDResult:
    """Strict version of :func:`is_psd`: ``lambda_min(Q) > tol * (1 + ||Q||_inf)``."""
    Q = symmetrize(Q)
    lam = smallest_eigenvalue(Q)
    scale = 1.0 + np.abs(Q).sum(axis=1).max()
    return PSDResult(bool(lam > tol * scale), lam)


def homogenize(f: QuadraticFunction) -> np.ndarray:
    """``[[Q, q/2], [q^T/2, c]]`` so that ``(x,1)^T M (x,1) = f(x)``."""
    n = f.dim
    M = np.empty((n + 1, n + 1))
    M[:n, :n] = f.Q
    M[:n, n] = M[n, :n] = 0.5 * f.q
    M[n, n] = f.c
    return M


def restrict_to_line(f: QuadraticFunction, base, direction) -> Quadratic1D:
    """Coefficients of ``t -> f(base + t * direction)``."""
    base = _vector(base, f.dim)
    d = _vector(direction, f.dim)
    return Quadratic1D(
        float(d @ f.Q @ d),
        float((2.0 * f.Q @ base + f.q) @ d),
        evaluate(f, base),
    )

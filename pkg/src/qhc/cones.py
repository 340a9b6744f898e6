"""Nullspaces, polyhedral cones and recession cones of convex quadratic systems."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InputError, PreconditionError
from .quad_core import PSD_TOL, QuadraticFunction, is_psd
from .simplex import lp_feasible

NULLSPACE_TOL = 1e-9
MEMBERSHIP_TOL = 1e-8


class NullspaceBasis(NamedTuple):
    ambient_dim: int
    basis: np.ndarray  # (n, k), orthonormal columns

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def nullspace(M, tol: float = NULLSPACE_TOL, scale: float | None = None) -> NullspaceBasis:
    """Orthonormal basis of ``{v : M v = 0}``.

    Singular values at or below ``tol * max(sigma_max, scale)`` count as zero.
    Passing ``scale`` gives an absolute floor, which matters when ``M`` itself
    is tiny (e.g. ``A - lambda_min I`` for ``A`` a multiple of the identity).
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n = M.shape[1]
    if M.shape[0] == 0 or n == 0:
        return NullspaceBasis(n, np.eye(n))
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    smax = float(s[0]) if s.size else 0.0
    ref = smax if scale is None else max(smax, scale)
    rank = int(np.sum(s > tol * ref)) if ref > 0 else 0
    return NullspaceBasis(n, Vt[rank:].T.copy())


def matrix_rank(M, tol: float = NULLSPACE_TOL, scale: float | None = None) -> int:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    return M.shape[1] - nullspace(M, tol, scale).dim


def _normalize_rows(M: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(M, axis=1)
    keep = norms > 0
    return M[keep] / norms[keep, None]


@dataclass(frozen=True, eq=False)
class PolyhedralCone:
    """The cone ``{v : E v = 0, G v <= 0}``."""

    dim: int
    eq_rows: np.ndarray
    ineq_rows: np.ndarray

    def __post_init__(self):
        E = np.asarray(self.eq_rows, dtype=float).reshape(-1, self.dim)
        G = np.asarray(self.ineq_rows, dtype=float).reshape(-1, self.dim)
        object.__setattr__(self, "eq_rows", E)
        object.__setattr__(self, "ineq_rows", G)

    def contains(self, v, tol: float = MEMBERSHIP_TOL) -> bool:
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.shape[0] != self.dim:
            raise InputError("dimension mismatch")
        E = _normalize_rows(self.eq_rows)
        G = _normalize_rows(self.ineq_rows)
        eq_ok = E.shape[0] == 0 or np.abs(E @ v).max() <= tol
        ineq_ok = G.shape[0] == 0 or (G @ v).max() <= tol
        return bool(eq_ok and ineq_ok)


class NontrivialityResult(NamedTuple):
    nontrivial: bool
    witness: np.ndarray | None

    def __bool__(self) -> bool:
        return self.nontrivial


def cone_is_nontrivial(K: PolyhedralCone, tol: float = NULLSPACE_TOL) -> NontrivialityResult:
    """Decide whether ``K`` contains a nonzero vector; return one with ``||v||_inf = 1``.

    Works in coordinates of ``ker E``: for each coordinate ``j`` and sign, the
    LP ``{(G N) y <= 0, sign * y_j = 1, |y| <= 1}`` is tested.  Rows are
    normalized first, so positive row scaling never changes the verdict.
    """
    E = _normalize_rows(K.eq_rows)
    G = _normalize_rows(K.ineq_rows)
    N = nullspace(E, tol).basis
    k = N.shape[1]
    if k == 0:
        return NontrivialityResult(False, None)
    H = G @ N
    bounds = [(-1.0, 1.0)] * k
    for j in range(k):
        for sign in (1.0, -1.0):
            row = np.zeros((1, k))
            row[0, j] = sign
            feasible, y = lp_feasible(row, [1.0], H if H.size else None, np.zeros(H.shape[0]) if H.size else None, bounds)
            if feasible:
                v = N @ y
                v = v / np.abs(v).max()
                v[np.abs(v) < 1e-15] = 0.0
                return NontrivialityResult(True, v)
    return NontrivialityResult(False, None)


def recession_cone(
    constraints: Sequence[QuadraticFunction], require_convex: bool = True, tol: float = PSD_TOL
) -> PolyhedralCone:
    """Right-hand side of the recession-cone formula for convex quadratic systems.

    For ``x^T B_i x + b_i^T x + c_i <= 0`` (``B_i`` PSD) this is
    ``{v : B_i v = 0, b_i^T v <= 0}``; the half-factor convention of the formula
    maps ``Q_i = 2 B_i`` and leaves the kernel unchanged.  Nonemptiness of the
    system is not checked here, see :func:`probe_nonempty`.
    """
    constraints = list(constraints)
    if not constraints:
        raise InputError("need at least one constraint")
    n = constraints[0].dim
    for i, g in enumerate(constraints):
        if g.dim != n:
            raise InputError(f"constraint {i} has dimension {g.dim}, expected {n}")
        if require_convex:
            res = is_psd(g.Q, tol)
            if not res:
                raise PreconditionError(
                    f"constraint {i} is not convex (smallest eigenvalue {res.margin:.3g})"
                )
    E = np.vstack([2.0 * g.Q for g in constraints])
    G = np.vstack([g.q[None, :] for g in constraints])
    return PolyhedralCone(n, E, G)


def probe_nonempty(constraints: Sequence[QuadraticFunction], seed: int = 0):
    """Look for a point of ``{g_i <= 0}``; returns ``(found, point, max_violation)``.

    Annotation only: a miss does not prove emptiness for nonconvex systems.
    """
    from .search import minimize_max

    res = minimize_max(list(constraints), seed=seed)
    return res.value <= 0.0, res.x, res.value

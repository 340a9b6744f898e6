"""Dense two-phase tableau simplex with Bland's rule.

Sized for the tiny feasibility problems that arise in cone tests: a handful of
variables and rows.  Bland's smallest-index rule rules out cycling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericalError

MAX_PIVOTS = 10_000
TOL = 1e-9


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    fun: float | None
    pivots: int

    @property
    def feasible(self) -> bool:
        return self.status in ("optimal", "unbounded")


def _as_rows(A, n):
    if A is None:
        return np.zeros((0, n))
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return np.zeros((0, n))
    A = np.atleast_2d(A)
    if A.shape[1] != n:
        raise InputError(f"constraint matrix has {A.shape[1]} columns, expected {n}")
    return A


def _as_rhs(b, k):
    if b is None:
        b = np.zeros(0)
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.shape[0] != k:
        raise InputError(f"right-hand side has length {b.shape[0]}, expected {k}")
    return b


class _Tableau:
    def __init__(self, T: np.ndarray, basis: list[int], tol: float):
        self.T = T
        self.basis = basis
        self.tol = tol
        self.pivots = 0

    def pivot(self, row: int, col: int) -> None:
        T = self.T
        T[row] /= T[row, col]
        for i in range(T.shape[0]):
            if i != row and T[i, col] != 0.0:
                T[i] -= T[i, col] * T[row]
        self.basis[row] = col
        self.pivots += 1
        if self.pivots > MAX_PIVOTS:
            raise NumericalError("simplex pivot cap exceeded")

    def run(self, allowed: np.ndarray) -> str:
        """Minimize the objective held in the last row; columns outside ``allowed`` never enter."""
        T = self.T
        m = T.shape[0] - 1
        while True:
            cost = T[-1, :-1]
            entering = -1
            for j in np.flatnonzero(allowed):
                if cost[j] < -self.tol:
                    entering = j
                    break
            if entering < 0:
                return "optimal"
            col = T[:m, entering]
            best_row = -1
            best_ratio = np.inf
            for i in range(m):
                if col[i] > self.tol:
                    ratio = T[i, -1] / col[i]
                    if ratio < best_ratio - 1e-15 or (
                        abs(ratio - best_ratio) <= 1e-15 and self.basis[i] < self.basis[best_row]
                    ):
                        best_ratio = ratio
                        best_row = i
            if best_row < 0:
                return "unbounded"
            self.pivot(best_row, entering)


def linprog(c=None, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None, tol: float = TOL) -> LPResult:
    """Minimize ``c^T x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq`` and bounds.

    ``bounds`` is a sequence of ``(lo, hi)`` pairs (``None`` means unbounded);
    by default every variable is free.
    """
    if c is not None:
        n = len(c)
    elif A_ub is not None and np.size(A_ub):
        n = np.atleast_2d(A_ub).shape[1]
    elif A_eq is not None and np.size(A_eq):
        n = np.atleast_2d(A_eq).shape[1]
    elif bounds is not None:
        n = len(bounds)
    else:
        raise InputError("cannot infer the number of variables")
    c = np.zeros(n) if c is None else np.asarray(c, dtype=float).reshape(-1)
    A_ub = _as_rows(A_ub, n)
    A_eq = _as_rows(A_eq, n)
    b_ub = _as_rhs(b_ub, A_ub.shape[0])
    b_eq = _as_rhs(b_eq, A_eq.shape[0])
    if bounds is None:
        bounds = [(None, None)] * n
    if len(bounds) != n:
        raise InputError("bounds length mismatch")

    # x = offset + S @ y with y >= 0
    cols = []  # (variable index, sign)
    offset = np.zeros(n)
    extra_ub = []
    for j, (lo, hi) in enumerate(bounds):
        lo = None if lo is None or lo == -np.inf else float(lo)
        hi = None if hi is None or hi == np.inf else float(hi)
        if lo is not None and hi is not None and hi < lo:
            return LPResult("infeasible", None, None, 0)
        if lo is not None:
            offset[j] = lo
            cols.append((j, 1.0))
            if hi is not None:
                extra_ub.append((len(cols) - 1, hi - lo))
        elif hi is not None:
            offset[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    S = np.zeros((n, len(cols)))
    for k, (j, s) in enumerate(cols):
        S[j, k] = s
    ny = S.shape[1]

    rows_ub = A_ub @ S
    rhs_ub = b_ub - A_ub @ offset
    if extra_ub:
        E = np.zeros((len(extra_ub), ny))
        for r, (k, ub) in enumerate(extra_ub):
            E[r, k] = 1.0
        rows_ub = np.vstack([rows_ub, E])
        rhs_ub = np.concatenate([rhs_ub, [ub for _, ub in extra_ub]])
    rows_eq = A_eq @ S
    rhs_eq = b_eq - A_eq @ offset

    k_ub, k_eq = rows_ub.shape[0], rows_eq.shape[0]
    m = k_ub + k_eq
    nvar = ny + k_ub  # structural + slack
    A = np.zeros((m, nvar))
    A[:k_ub, :ny] = rows_ub
    A[:k_ub, ny:] = np.eye(k_ub)
    A[k_ub:, :ny] = rows_eq
    rhs = np.concatenate([rhs_ub, rhs_eq])
    neg = rhs < 0
    A[neg] *= -1.0
    rhs = np.abs(rhs)

    # phase 1: one artificial per row
    T = np.zeros((m + 1, nvar + m + 1))
    T[:m, :nvar] = A
    T[:m, nvar : nvar + m] = np.eye(m)
    T[:m, -1] = rhs
    T[-1, :nvar] = -A.sum(axis=0)
    T[-1, -1] = -rhs.sum()
    tab = _Tableau(T, list(range(nvar, nvar + m)), tol)
    allowed = np.ones(nvar + m, dtype=bool)
    tab.run(allowed)
    scale = 1.0 + (rhs.max() if m else 0.0)
    if -tab.T[-1, -1] > tol * scale:
        return LPResult("infeasible", None, None, tab.pivots)

    # drive artificials out of the basis; drop redundant rows
    keep = []
    for i in range(m):
        if tab.basis[i] >= nvar:
            row = tab.T[i, :nvar]
            cand = np.flatnonzero(np.abs(row) > tol)
            if cand.size:
                tab.pivot(i, int(cand[0]))
                keep.append(i)
        else:
            keep.append(i)
    T2 = np.zeros((len(keep) + 1, nvar + 1))
    T2[:-1, :nvar] = tab.T[keep, :nvar]
    T2[:-1, -1] = tab.T[keep, -1]
    basis = [tab.basis[i] for i in keep]

    # phase 2
    cost = np.zeros(nvar)
    cost[:ny] = S.T @ c
    T2[-1, :nvar] = cost
    for i, bj in enumerate(basis):
        if T2[-1, bj] != 0.0:
            T2[-1] -= T2[-1, bj] * T2[i]
    tab2 = _Tableau(T2, basis, tol)
    tab2.pivots = tab.pivots
    status = tab2.run(np.ones(nvar, dtype=bool))
    z = np.zeros(nvar)
    for i, bj in enumerate(tab2.basis):
        z[bj] = tab2.T[i, -1]
    x = offset + S @ z[:ny]
    return LPResult(status, x, float(c @ x) if status == "optimal" else -np.inf, tab2.pivots)


def lp_feasible(A_eq=None, b_eq=None, A_ineq=None, b_ineq=None, bounds=None, tol: float = TOL):
    """Feasibility of ``{A_eq x = b_eq, A_ineq x <= b_ineq, bounds}``.

    Returns ``(feasible, point)``; ``point`` is ``None`` when infeasible.
    """
    res = linprog(None, A_ineq, b_ineq, A_eq, b_eq, bounds, tol=tol)
    return res.feasible, res.x

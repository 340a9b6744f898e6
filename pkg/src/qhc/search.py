"""Grid-plus-local-refinement searches over small boxes.

These are the brute-force oracles used to cross-check certificates: Slater
search (minimize the largest constraint value), feasibility probes and the
primal minimization oracle.  All are deterministic for a fixed seed.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .quad_core import QuadraticFunction

MAX_GRID_POINTS = 200_000


def grid(lo: np.ndarray, hi: np.ndarray, per_axis: int, cap: int = MAX_GRID_POINTS) -> np.ndarray:
    """Regular grid over the box ``[lo, hi]`` with at most ``cap`` points."""
    n = lo.size
    per_axis = max(2, min(per_axis, int(cap ** (1.0 / n))))
    axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(n)]
    return np.array(list(itertools.product(*axes))) if n > 1 else axes[0][:, None]


def values_matrix(funcs: Sequence[QuadraticFunction], X: np.ndarray) -> np.ndarray:
    """Column ``j`` holds ``funcs[j]`` evaluated on the rows of ``X``."""
    return np.column_stack([h.values(X) for h in funcs])


def sublevel_box(g: QuadraticFunction):
    """Bounding box of ``{g <= 0}`` when ``g`` is strictly convex, else ``None``."""
    if np.linalg.eigvalsh(g.Q)[0] <= 1e-12:
        return None
    Qinv = np.linalg.inv(g.Q)
    center = -0.5 * Qinv @ g.q
    r2 = float(center @ g.Q @ center - g.c)
    if r2 < 0:
        return None
    half = np.sqrt(r2 * np.diag(Qinv))
    return center - half, center + half


def auto_box(constraints: Sequence[QuadraticFunction], n: int, radius: float = 3.0):
    """Smallest box known to contain the feasible set, or ``[-radius, radius]^n``.

    The second return value is ``True`` when the box provably covers the whole
    feasible set (some constraint is strictly convex).
    """
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    exact = False
    for g in constraints:
        box = sublevel_box(g)
        if box is not None:
            lo = np.maximum(lo, box[0])
            hi = np.minimum(hi, box[1])
            exact = True
    if not exact:
        return np.full(n, -radius), np.full(n, radius), False
    if np.any(lo > hi):
        mid = 0.5 * (lo + hi)
        lo = np.minimum(lo, mid)
        hi = np.maximum(hi, mid)
    return lo, hi, True


def _epigraph_solve(funcs, shifts, x0, maxiter, bounds=None):
    """``min s`` s.t. ``funcs[j](x) - shifts[j] <= s``; returns ``(x, max_violation)``."""
    n = funcs[0].dim
    Qs = np.array([h.Q for h in funcs])
    qs = np.array([h.q for h in funcs])
    cs = np.array([h.c for h in funcs]) - np.asarray(shifts, dtype=float)

    def viol(x):
        return np.einsum("i,jik,k->j", x, Qs, x) + qs @ x + cs

    def cons(z):
        return z[n] - viol(z[:n])

    def cons_jac(z):
        x = z[:n]
        J = np.empty((len(funcs), n + 1))
        J[:, :n] = -(2.0 * Qs @ x + qs)
        J[:, n] = 1.0
        return J

    z0 = np.append(x0, viol(x0).max())
    zb = None
    if bounds is not None:
        zb = list(zip(bounds[0], bounds[1])) + [(None, None)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = minimize(
            lambda z: z[n],
            z0,
            jac=lambda z: np.eye(n + 1)[n],
            constraints=[{"type": "ineq", "fun": cons, "jac": cons_jac}],
            method="SLSQP",
            bounds=zb,
            options={"maxiter": maxiter, "ftol": 1e-14},
        )
    x = res.x[:n]
    v0 = viol(x0).max()
    v1 = viol(x).max()
    if not np.all(np.isfinite(x)) or v1 > v0:
        return np.asarray(x0, dtype=float), float(v0)
    return x, float(v1)


@dataclass
class MinMaxResult:
    x: np.ndarray
    value: float
    evaluations: int = 0


def minimize_max(
    funcs: Sequence[QuadraticFunction],
    shifts=None,
    seed: int = 0,
    grid_per_axis: int = 5,
    radius: float = 3.0,
    random_starts: int = 50,
    refine: int = 10,
    maxiter: int = 500,
    stop_below: float | None = None,
) -> MinMaxResult:
    """Multistart minimization of ``max_j (funcs[j](x) - shifts[j])``.

    Seeds: a ``grid_per_axis^n`` grid on ``[-radius, radius]^n`` plus random
    points; the ``refine`` best seeds are polished by SLSQP on the epigraph
    form.  For convex ``funcs`` every local minimum of the max is global.
    """
    funcs = list(funcs)
    n = funcs[0].dim
    shifts = np.zeros(len(funcs)) if shifts is None else np.asarray(shifts, dtype=float)
    rng = np.random.default_rng(seed)
    lo, hi = np.full(n, -radius), np.full(n, radius)
    X = np.vstack([grid(lo, hi, grid_per_axis), rng.uniform(lo, hi, size=(random_starts, n))])
    V = (values_matrix(funcs, X) - shifts).max(axis=1)
    order = np.argsort(V, kind="stable")
    best_x, best_v = X[order[0]].copy(), float(V[order[0]])
    if stop_below is not None and best_v < stop_below:
        return MinMaxResult(best_x, best_v, X.shape[0])
    for idx in order[:refine]:
        x, v = _epigraph_solve(funcs, shifts, X[idx], maxiter)
        if v < best_v:
            best_x, best_v = x, v
        if stop_below is not None and best_v < stop_below:
            break
    return MinMaxResult(best_x, best_v, X.shape[0])


@dataclass
class OracleConfig:
    """Budget for the brute-force primal oracle."""

    grid_per_axis: int = 41
    radius: float = 3.0
    keep: int = 20
    refine_steps: int = 200
    feas_tol: float = 1e-9
    max_points: int = MAX_GRID_POINTS


@dataclass
class PrimalResult:
    x: np.ndarray | None
    value: float
    feasible: bool
    box_relative: bool
    candidates: list = field(default_factory=list)


def _backtrack_feasible(gs, x, anchor, feas_tol):
    """Pull ``x`` toward a feasible ``anchor`` until every constraint holds."""
    if max(g(x) for g in gs) <= feas_tol:
        return x
    lo, hi = 0.0, 1.0  # fraction of the way from anchor to x
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        y = anchor + mid * (x - anchor)
        if max(g(y) for g in gs) <= feas_tol:
            lo = mid
        else:
            hi = mid
    return anchor + lo * (x - anchor)


def _constrained_refine(f, gs, x0, maxiter, bounds):
    n = f.dim
    cons = []
    if gs:
        Qs = np.array([g.Q for g in gs])
        qs = np.array([g.q for g in gs])
        cs = np.array([g.c for g in gs])
        cons = [
            {
                "type": "ineq",
                "fun": lambda x: -(np.einsum("i,jik,k->j", x, Qs, x) + qs @ x + cs),
                "jac": lambda x: -(2.0 * Qs @ x + qs),
            }
        ]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = minimize(
            lambda x: (float(x @ f.Q @ x + f.q @ x + f.c), 2.0 * f.Q @ x + f.q),
            x0,
            jac=True,
            constraints=cons,
            method="SLSQP",
            bounds=list(zip(bounds[0], bounds[1])),
            options={"maxiter": maxiter, "ftol": 1e-15},
        )
    return res.x


def primal_oracle(
    f: QuadraticFunction, gs: Sequence[QuadraticFunction], cfg: OracleConfig | None = None
) -> PrimalResult:
    """Brute-force ``min f`` over ``{g_i <= 0}``: grid, keep the best, refine, backtrack."""
    cfg = cfg or OracleConfig()
    gs = list(gs)
    n = f.dim
    lo, hi, exact = auto_box(gs, n, cfg.radius)
    X = grid(lo, hi, cfg.grid_per_axis, cfg.max_points)
    fv = f.values(X)
    gmax = values_matrix(gs, X).max(axis=1) if gs else np.zeros(len(X))
    feas = gmax <= cfg.feas_tol
    if feas.any():
        idx = np.flatnonzero(feas)
        idx = idx[np.argsort(fv[idx], kind="stable")[: cfg.keep]]
    else:
        idx = np.argsort(gmax, kind="stable")[: cfg.keep]
    best_x, best_v = None, np.inf
    cands = []
    for i in idx:
        x0 = X[i]
        x = _constrained_refine(f, gs, x0, cfg.refine_steps, (lo, hi))
        if feas[i]:
            x = _backtrack_feasible(gs, x, x0, cfg.feas_tol)
        ok = (max(g(x) for g in gs) if gs else 0.0) <= cfg.feas_tol
        v = f(x)
        cands.append((x, v, ok))
        if ok and v < best_v:
            best_x, best_v = x, v
    if best_x is None and feas.any():
        i = idx[0]
        best_x, best_v = X[i].copy(), float(fv[i])
    return PrimalResult(best_x, float(best_v), best_x is not None, not exact, cands)


def sample_feasible(gs: Sequence[QuadraticFunction], n: int, count: int, rng, radius: float = 3.0, max_batches: int = 200):
    """Uniform rejection samples of ``{g_i <= 0}`` inside the automatic box."""
    lo, hi, _ = auto_box(gs, n, radius)
    out = []
    total = 0
    for _ in range(max_batches):
        X = rng.uniform(lo, hi, size=(max(4 * count, 1000), n))
        ok = values_matrix(gs, X).max(axis=1) <= 0.0 if gs else np.ones(len(X), bool)
        out.append(X[ok])
        total += int(ok.sum())
        if total >= count:
            break
    pts = np.vstack(out) if out else np.zeros((0, n))
    return pts[:count]

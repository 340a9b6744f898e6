"""Global nonnegativity, S-lemma certificates and the Lagrangian dual.

For multipliers ``lam >= 0`` the Lagrangian is ``L_lam = f + sum lam_i g_i``
and the dual function is ``omega(lam) = inf_x L_lam(x)``.  Global
nonnegativity of a quadratic is equivalent to positive semidefiniteness of
its homogenization, which is the finite test used throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import lmi
from .assumptions import QCQPInstance, full_report
from .errors import InputError, PreconditionError
from .quad_core import PSD_TOL, PSDResult, QuadraticFunction, homogenize, is_psd, sym_eigen
from .search import OracleConfig, _backtrack_feasible, minimize_max, primal_oracle

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
LAMBDA_CAP = 1e6
GAP_TOL = 1e-5


def is_globally_nonneg(f: QuadraticFunction, tol: float = PSD_TOL) -> PSDResult:
    """``f(x) >= 0`` for every ``x``, decided by the homogenized PSD test."""
    return is_psd(homogenize(f), tol)


def lagrangian(instance: QCQPInstance, lam) -> QuadraticFunction:
    lam = _check_lambda(instance, lam)
    L = instance.f
    for li, g in zip(lam, instance.gs):
        if li:
            L = L + li * g
    return L


def _check_lambda(instance, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lam.size != instance.m:
        raise InputError(f"expected {instance.m} multipliers, got {lam.size}")
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise InputError("multipliers must be finite and nonnegative")
    return lam


class DualValue(NamedTuple):
    value: float  # -inf when the Lagrangian is unbounded below
    x: np.ndarray | None


def minimize_quadratic(L: QuadraticFunction, tol: float = PSD_TOL) -> DualValue:
    """``inf_x L(x)`` with a minimizer when finite (eigen-pseudoinverse)."""
    eig = sym_eigen(L.Q)
    w, V = eig.eigenvalues, eig.eigenvectors
    scale = 1.0 + np.abs(L.Q).sum(axis=1).max()
    if w[0] < -tol * scale:
        return DualValue(-math.inf, None)
    qv = V.T @ L.q
    zero = w <= tol * scale
    if np.any(np.abs(qv[zero]) > 1e-9 * (1.0 + np.abs(L.q).max())):
        return DualValue(-math.inf, None)
    y = np.zeros_like(qv)
    y[~zero] = -0.5 * qv[~zero] / w[~zero]
    x = V @ y
    return DualValue(float(L(x)), x)


def dual_value(instance: QCQPInstance, lam, tol: float = PSD_TOL) -> DualValue:
    """``omega(lam) = inf_x f(x) + sum lam_i g_i(x)``."""
    return minimize_quadratic(lagrangian(instance, lam), tol)


@dataclass
class DualResult:
    lambda_star: np.ndarray
    dual_value: float
    primal_value: float | None = None
    gap: float | None = None
    trace: list = field(default_factory=list)  # (lam, omega(lam))
    converged: bool = True
    method: str = ""
    primal_x: np.ndarray | None = None
    hypotheses: bool | None = None
    gap_ok: bool | None = None

    def as_dict(self) -> dict:
        return {
            "lambda_star": self.lambda_star.tolist(),
            "dual_value": self.dual_value,
            "primal_value": self.primal_value,
            "gap": self.gap,
            "converged": self.converged,
            "method": self.method,
            "primal_x": None if self.primal_x is None else self.primal_x.tolist(),
            "hypotheses_H1_H2_slater": self.hypotheses,
            "gap_ok": self.gap_ok,
            "trace": [[lam.tolist(), val] for lam, val in self.trace],
        }


def _golden_max(h, lo, hi, iters=200):
    """Maximize a concave (possibly ``-inf``-valued) scalar function on ``[lo, hi]``."""
    a, b = lo, hi
    x1, x2 = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    h1, h2 = h(x1), h(x2)
    for _ in range(iters):
        if b - a <= 1e-15 * (1.0 + abs(a) + abs(b)):
            break
        if h1 >= h2:
            b, x2, h2 = x2, x1, h1
            x1 = b - GOLDEN * (b - a)
            h1 = h(x1)
        else:
            a, x1, h1 = x1, x2, h2
            x2 = a + GOLDEN * (b - a)
            h2 = h(x2)
    best = max([(h(a), a), (h1, x1), (h2, x2), (h(b), b)])
    return best[1], best[0]


def _psd_interval(A, B, tol=PSD_TOL):
    """``[lo, hi]`` (within ``[0, cap]``) where ``A + lam B`` is PSD, or ``None``."""

    def h(lam):
        return sym_eigen(A + lam * B).smallest

    cap = LAMBDA_CAP
    scale = 1.0 + np.abs(A).sum(axis=1).max()
    peak, val = _golden_max(h, 0.0, cap, iters=150)
    if val < -tol * (scale + peak * (1.0 + np.abs(B).sum(axis=1).max())):
        return None

    def edge(inside, outside):
        for _ in range(100):
            mid = 0.5 * (inside + outside)
            if h(mid) >= 0.0:
                inside = mid
            else:
                outside = mid
        return inside

    lo = 0.0 if h(0.0) >= 0 else edge(peak, 0.0)
    hi = cap if h(cap) >= 0 else edge(peak, cap)
    return lo, hi


def _maximize_dual_1(instance: QCQPInstance, tol) -> DualResult:
    A, B = instance.f.Q, instance.gs[0].Q
    trace = []

    def omega(s):
        v = dual_value(instance, [s], tol).value
        trace.append((np.array([s]), v))
        return v

    interval = _psd_interval(A, B, tol)
    if interval is None:
        return DualResult(np.zeros(1), -math.inf, trace=[(np.zeros(1), omega(0.0))], method="golden")
    lo, hi = interval
    # ignore the huge right tail once omega starts decreasing
    right = lo + 1.0
    while right < hi and omega(right) > omega(0.5 * (lo + right)) - 1e-12 * (1 + abs(omega(right))):
        right = lo + 2.0 * (right - lo)
    right = min(right, hi)
    s, v = _golden_max(omega, lo, right)
    return DualResult(np.array([s]), v, trace=trace, method="golden")


def _supergradient(instance: QCQPInstance, lam0, tol, iters=500) -> DualResult:
    """Projected supergradient ascent with greedy entry into the finite region."""
    lam = np.array(lam0, dtype=float)
    trace = []
    for _ in range(100):
        dv = dual_value(instance, lam, tol)
        if math.isfinite(dv.value):
            break
        gains = []
        for i, g in enumerate(instance.gs):
            step = lam.copy()
            step[i] += 0.5
            gains.append(sym_eigen(lagrangian(instance, step).Q).smallest)
        lam[int(np.argmax(gains))] += 0.5
    best_lam, best = lam.copy(), dual_value(instance, lam, tol).value
    trace.append((lam.copy(), best))
    for k in range(1, iters + 1):
        dv = dual_value(instance, lam, tol)
        if not math.isfinite(dv.value):
            break
        sg = np.array([g(dv.x) for g in instance.gs])
        norm = np.linalg.norm(sg)
        if norm < 1e-12:
            break
        lam = np.maximum(0.0, lam + sg / (k * norm))
        val = dual_value(instance, lam, tol).value
        trace.append((lam.copy(), val))
        if val > best:
            best_lam, best = lam.copy(), val
    return DualResult(best_lam, best, trace=trace, converged=False, method="supergradient")


def _barrier_start(instance, E_is_identity: bool, upper: float, tol):
    m = instance.m
    M0 = homogenize(instance.f)
    Ms = [homogenize(g) for g in instance.gs]
    for s in 10.0 ** np.arange(0, 7):
        if s >= upper:
            break
        lam = np.full(m, s)
        P = M0 + np.tensordot(lam, Ms, axes=1)
        if E_is_identity:
            return lam, sym_eigen(P).smallest - 1.0
        L = lagrangian(instance, lam)
        if sym_eigen(L.Q).smallest > 1e-9 * (1.0 + np.abs(L.Q).max()):
            return lam, minimize_quadratic(L, tol).value - 1.0
    return None


def _snap(instance, lam, tol):
    """Zero out negligible multipliers when that does not lower ``omega``."""
    val = dual_value(instance, lam, tol).value
    for i in np.argsort(lam):
        if lam[i] < 1e-6 * (1.0 + lam.max()):
            trial = lam.copy()
            trial[i] = 0.0
            v = dual_value(instance, trial, tol).value
            if v >= val - 1e-12 * (1.0 + abs(val)):
                lam, val = trial, max(v, val)
    return lam, val


def maximize_dual(instance: QCQPInstance, tol: float = PSD_TOL) -> DualResult:
    """``max_{lam >= 0} omega(lam)``.

    One multiplier: golden-section search over the interval where the
    Lagrangian Hessian is PSD.  Several: a barrier method on the equivalent
    linear matrix inequality, falling back to projected supergradient ascent
    when no strictly feasible start exists.
    """
    if instance.m == 1:
        return _maximize_dual_1(instance, tol)
    start = _barrier_start(instance, False, LAMBDA_CAP, tol)
    if start is None:
        return _supergradient(instance, np.zeros(instance.m), tol)
    E = np.zeros((instance.n + 1, instance.n + 1))
    E[-1, -1] = 1.0
    res = lmi.maximize_lmi(
        homogenize(instance.f), [homogenize(g) for g in instance.gs], E, start[0], start[1], LAMBDA_CAP
    )
    trace = [(c, dual_value(instance, c, tol).value) for c in res.centers]
    lam, val = _snap(instance, res.lam, tol)
    trace.append((lam, val))
    return DualResult(lam, val, trace=trace, converged=res.converged, method="barrier")


# S-lemma ---------------------------------------------------------------------------


@dataclass
class SLemmaCertificate:
    kind: str  # "multiplier-found" | "counterexample" | "inconclusive"
    lambdas: np.ndarray | None = None
    psd_margin: float | None = None
    x: np.ndarray | None = None
    f_value: float | None = None
    max_g: float | None = None

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lambdas": None if self.lambdas is None else self.lambdas.tolist(),
            "psd_margin": self.psd_margin,
            "x": None if self.x is None else self.x.tolist(),
            "f_value": self.f_value,
            "max_g": self.max_g,
        }


def mu_value(instance: QCQPInstance, lam) -> float:
    """``lambda_min`` of the homogenized Lagrangian."""
    return sym_eigen(homogenize(lagrangian(instance, lam))).smallest


def mu_supergradient(instance: QCQPInstance, lam) -> np.ndarray:
    """``z^T hom(g_i) z`` for the unit eigenvector ``z`` of the smallest eigenvalue."""
    eig = sym_eigen(homogenize(lagrangian(instance, lam)))
    z = eig.eigenvectors[:, 0]
    return np.array([z @ homogenize(g) @ z for g in instance.gs])


def _slater_upper(instance: QCQPInstance, seed: int):
    """Upper bound on a maximizer of ``mu`` and the strictly feasible point behind it."""
    res = minimize_max(list(instance.gs), seed=seed, stop_below=-1e-3)
    if res.value >= -1e-9:
        return None, None
    x0 = res.x
    mu0 = mu_value(instance, np.zeros(instance.m))
    bound = (instance.f(x0) - mu0 * (1.0 + x0 @ x0)) / (-res.value)
    return max(bound, 1.0), x0


def _is_counterexample(instance, x, tol=1e-9):
    if x is None or not np.all(np.isfinite(x)):
        return False
    return max(g(x) for g in instance.gs) <= 0.0 and instance.f(x) < -tol


def _counterexample_search(instance: QCQPInstance, lam, seed: int, anchor=None):
    """Feasible point with ``f < 0``; near-boundary candidates are pulled toward ``anchor``."""
    eig = sym_eigen(homogenize(lagrangian(instance, lam)))
    cands = []
    z = eig.eigenvectors[:, 0]
    if abs(z[-1]) > 1e-12:
        cands.append(z[:-1] / z[-1])
    prim = primal_oracle(instance.f, instance.gs, OracleConfig(grid_per_axis=21, keep=5, refine_steps=200))
    cands += [c[0] for c in prim.candidates if c[2]]
    if anchor is not None:
        cands = [_backtrack_feasible(instance.gs, x, anchor, 0.0) if np.all(np.isfinite(x)) else x for x in cands]
    for x in cands:
        if _is_counterexample(instance, x):
            return x
    # rays along negative-curvature directions of f from feasible anchors
    anchors = [c for c in cands if max(g(c) for g in instance.gs) <= 0.0]
    dirs = [eig.eigenvectors[:-1, 0]]
    fe = sym_eigen(instance.f.Q)
    dirs += [fe.eigenvectors[:, k] for k in range(instance.n) if fe.eigenvalues[k] < 0]
    for x0 in anchors[:5]:
        for d in dirs:
            if np.linalg.norm(d) < 1e-12:
                continue
            for sgn in (1.0, -1.0):
                for s in 10.0 ** np.arange(-2, 7):
                    x = x0 + sgn * s * d
                    if _is_counterexample(instance, x):
                        return x
    return None


def slemma_decide(instance: QCQPInstance, seed: int = 0, tol: float = PSD_TOL) -> SLemmaCertificate:
    """Decide whether ``f >= 0`` on ``{g_i <= 0}`` by searching S-lemma multipliers.

    Maximizes ``mu(lam)``; a nonnegative maximum yields multipliers, otherwise
    a feasible point with ``f < 0`` is searched for.
    """
    m = instance.m
    upper, x_slater = _slater_upper(instance, seed)
    cap = LAMBDA_CAP if upper is None else upper
    M0 = homogenize(instance.f)
    scale = 1.0 + np.abs(M0).sum(axis=1).max()

    if m == 1:
        lam_s, mu = _golden_max(lambda s: mu_value(instance, [s]), 0.0, cap)
        lam = np.array([lam_s])
    else:
        start = _barrier_start(instance, True, cap, tol)
        lam0 = start[0] if start else np.full(m, min(1.0, cap / 2))
        t0 = start[1] if start else mu_value(instance, lam0) - 1.0
        res = lmi.maximize_lmi(M0, [homogenize(g) for g in instance.gs], np.eye(instance.n + 1), lam0, t0, cap, stop_t=0.0)
        lam = res.lam
        mu = mu_value(instance, lam)
        lam2, _ = _snap_mu(instance, lam)
        if mu_value(instance, lam2) >= mu:
            lam, mu = lam2, mu_value(instance, lam2)
    if mu >= -tol * scale:
        return SLemmaCertificate("multiplier-found", lam, float(mu))
    x = _counterexample_search(instance, lam, seed, x_slater)
    if x is not None:
        return SLemmaCertificate("counterexample", lam, float(mu), x, float(instance.f(x)), float(max(g(x) for g in instance.gs)))
    return SLemmaCertificate("inconclusive", lam, float(mu))


def _snap_mu(instance, lam):
    lam = lam.copy()
    lam[lam < 1e-7 * (1.0 + lam.max())] = 0.0
    return lam, mu_value(instance, lam)


# strong duality ------------------------------------------------------------------


def strong_duality_report(
    instance: QCQPInstance, cfg: OracleConfig | None = None, report=None, seed: int = 0, tol: float = PSD_TOL
) -> DualResult:
    """Dual maximization plus brute-force primal minimum and their gap.

    When H1, H2 and Slater are all certified the gap must vanish; ``gap_ok``
    records whether it is within ``1e-5``.
    """
    if instance.n > 4:
        raise PreconditionError("primal oracle supports n <= 4")
    res = maximize_dual(instance, tol)
    prim = primal_oracle(instance.f, instance.gs, cfg)
    report = report or full_report(instance, seed=seed)
    res.hypotheses = bool(report.strong_duality_hypotheses)
    if prim.feasible:
        res.primal_value = prim.value
        res.primal_x = prim.x
        if math.isfinite(res.dual_value):
            res.gap = prim.value - res.dual_value
    if res.hypotheses and res.gap is not None:
        res.gap_ok = abs(res.gap) <= GAP_TOL
    return res


def weak_duality_violations(trace, primal_value: float, tol: float = 1e-8) -> list:
    """Trace entries whose dual value exceeds a known primal value."""
    if primal_value is None:
        return []
    return [(lam, v) for lam, v in trace if v > primal_value + tol * (1.0 + abs(primal_value))]

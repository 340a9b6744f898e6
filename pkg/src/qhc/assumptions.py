"""Problem instances and decision procedures for the hidden-convexity hypotheses.

Indices are 0-based throughout: ``i0 = 0`` is the first constraint (the ball
of a trust-region instance).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .cones import (
    NULLSPACE_TOL,
    PolyhedralCone,
    cone_is_nontrivial,
    matrix_rank,
    nullspace,
    recession_cone,
)
from .errors import InputError, PreconditionError
from .quad_core import PSD_TOL, QuadraticFunction, is_pd, is_psd, sym_eigen
from .search import minimize_max

WITNESS_TOL = 1e-8


class Kind(str, enum.Enum):
    GENERIC = "generic"
    TP = "tp"
    AP = "ap"


class Verdict(str, enum.Enum):
    YES = "yes"
    NO = "no"
    NOT_APPLICABLE = "not-applicable"
    UNKNOWN = "unknown"


@dataclass(frozen=True, eq=False)
class APData:
    """Raw data of a two-ball trust-region problem with linear inequalities."""

    A: np.ndarray
    a: np.ndarray
    C: np.ndarray
    c: np.ndarray
    D: np.ndarray
    d: np.ndarray


@dataclass(frozen=True, eq=False)
class QCQPInstance:
    """Objective ``f`` and constraints ``g_1..g_m`` (all ``<= 0``)."""

    f: QuadraticFunction
    gs: tuple
    kind: Kind = Kind.GENERIC
    names: tuple = ()
    ap: APData | None = None

    def __post_init__(self):
        gs = tuple(self.gs)
        if not gs:
            raise InputError("an instance needs at least one constraint")
        for i, g in enumerate(gs):
            if g.dim != self.f.dim:
                raise InputError(f"constraint {i} has dimension {g.dim}, objective has {self.f.dim}")
        object.__setattr__(self, "gs", gs)
        object.__setattr__(self, "kind", Kind(self.kind))
        names = tuple(self.names) or tuple(f"g{i + 1}" for i in range(len(gs)))
        if len(names) != len(gs):
            raise InputError("one name per constraint")
        object.__setattr__(self, "names", names)
        if self.kind is Kind.TP:
            g1 = gs[0]
            if not np.array_equal(g1.Q, np.eye(self.n)):
                raise InputError("trust-region instance: first constraint must have Q = I")
            for i, g in enumerate(gs[1:], start=1):
                if np.any(g.Q != 0):
                    raise InputError(f"trust-region instance: constraint {i} must be affine")
        if self.kind is Kind.AP and self.ap is None:
            raise InputError("AP instance needs its raw data")

    @property
    def n(self) -> int:
        return self.f.dim

    @property
    def m(self) -> int:
        return len(self.gs)

    @classmethod
    def trust_region(cls, A, a, x0, alpha, bs=(), betas=(), const: float = 0.0) -> "QCQPInstance":
        """``min x^T A x + a^T x`` over ``||x - x0||^2 <= alpha``, ``b_i^T x <= beta_i``."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        n = A.shape[0]
        if not alpha > 0:
            raise InputError("trust-region radius alpha must be positive")
        f = QuadraticFunction(A, np.asarray(a, dtype=float).reshape(n), const)
        gs = [QuadraticFunction.ball(np.asarray(x0, dtype=float).reshape(n), alpha)]
        bs = np.asarray(bs, dtype=float).reshape(-1, n) if len(bs) else np.zeros((0, n))
        betas = np.asarray(betas, dtype=float).reshape(-1)
        if betas.size != bs.shape[0]:
            raise InputError("one beta per linear constraint")
        gs += [QuadraticFunction.affine(b, -beta) for b, beta in zip(bs, betas)]
        return cls(f, tuple(gs), Kind.TP)

    @classmethod
    def cdt(cls, A, a, C=None, c=None, D=None, d=None) -> "QCQPInstance":
        """``min x^T (A - lambda_min(A) I) x + a^T x`` over two balls and ``D x <= d``."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        n = A.shape[0]
        a = np.asarray(a, dtype=float).reshape(n)
        C = np.zeros((0, n)) if C is None else np.asarray(C, dtype=float).reshape(-1, n)
        c = np.zeros(C.shape[0]) if c is None else np.asarray(c, dtype=float).reshape(-1)
        D = np.zeros((0, n)) if D is None else np.asarray(D, dtype=float).reshape(-1, n)
        d = np.zeros(D.shape[0]) if d is None else np.asarray(d, dtype=float).reshape(-1)
        if c.size != C.shape[0] or d.size != D.shape[0]:
            raise InputError("AP data has inconsistent dimensions")
        lam = sym_eigen(A).smallest
        f = QuadraticFunction(A - lam * np.eye(n), a, 0.0)
        gs = [QuadraticFunction.ball(np.zeros(n), 1.0)]
        names = ["ball"]
        if C.shape[0]:
            gs.append(QuadraticFunction(C.T @ C, -2.0 * C.T @ c, float(c @ c) - 1.0))
            names.append("ball2")
        for k, (row, dk) in enumerate(zip(D, d)):
            gs.append(QuadraticFunction.affine(row, -dk))
            names.append(f"lin{k + 1}")
        return cls(f, tuple(gs), Kind.AP, tuple(names), APData(A, a, C, c, D, d))

    # trust-region views
    def tp_parts(self):
        """``(A, a, x0, alpha, B)`` with the rows of ``B`` the affine normals ``b_i``."""
        if self.kind is not Kind.TP:
            raise PreconditionError("not a trust-region instance")
        g1 = self.gs[0]
        x0 = -0.5 * g1.q
        alpha = float(x0 @ x0 - g1.c)
        B = np.array([g.q for g in self.gs[1:]]).reshape(-1, self.n)
        return self.f.Q, self.f.q, x0, alpha, B


@dataclass
class Check:
    """Outcome of one hypothesis test."""

    verdict: Verdict
    witness: Any = None
    detail: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.verdict is Verdict.YES


def _smallest_eig_kernel(A: np.ndarray, tol: float = NULLSPACE_TOL):
    """``(lambda_min, E)`` where ``E = A - lambda_min I`` with noise-level entries zeroed."""
    lam = sym_eigen(A).smallest
    E = A - lam * np.eye(A.shape[0])
    E[np.abs(E) <= 1e-14 * (1.0 + np.abs(A).max())] = 0.0
    return lam, E


def _normalize_witness(v):
    v = np.asarray(v, dtype=float)
    return v / np.abs(v).max()


# H1 / H2 ---------------------------------------------------------------


def check_H1(instance: QCQPInstance, i0: int, tol: float = PSD_TOL) -> Check:
    """Smallest ``lambda`` with ``A + lambda B_i0`` PSD, via Cholesky reduction.

    With ``B = L L^T`` the pencil reduces to ``L^{-1} A L^{-T}``; H1 holds for
    every ``lambda >= -mu_min``.  Not applicable unless ``B_i0`` is positive
    definite.
    """
    B = instance.gs[i0].Q
    pd = is_pd(B, tol)
    if not pd:
        return Check(Verdict.NOT_APPLICABLE, None, {"reason": "B_i0 not positive definite", "i0": i0})
    L = np.linalg.cholesky(B)
    Linv = np.linalg.inv(L)
    M = Linv @ instance.f.Q @ Linv.T
    lam_star = -sym_eigen(0.5 * (M + M.T)).smallest
    margin = is_psd(instance.f.Q + lam_star * B, tol)
    return Check(Verdict.YES, float(lam_star), {"i0": i0, "psd_margin": margin.margin})


def h2_cone(instance: QCQPInstance, i0: int, lam: float, tol: float = PSD_TOL) -> PolyhedralCone:
    F = instance.f + lam * instance.gs[i0]
    res = is_psd(F.Q, tol)
    if not res:
        raise PreconditionError(f"A + lambda B_i0 is not PSD (smallest eigenvalue {res.margin:.3g})")
    others = [g for i, g in enumerate(instance.gs) if i != i0]
    for i, g in enumerate(instance.gs):
        if i != i0 and not is_psd(g.Q, tol):
            raise PreconditionError(f"constraint {i} is not convex")
    return recession_cone([F] + others, require_convex=False)


def check_H2(instance: QCQPInstance, i0: int, lam: float, tol: float = PSD_TOL) -> Check:
    """Nontriviality of the recession cone of ``{f + lam g_i0 <= 0, g_i <= 0 (i != i0)}``."""
    K = h2_cone(instance, i0, lam, tol)
    res = cone_is_nontrivial(K)
    if res:
        return Check(Verdict.YES, res.witness, {"i0": i0, "lambda": lam})
    return Check(Verdict.NO, None, {"i0": i0, "lambda": lam})


def search_H1_H2(instance: QCQPInstance, tol: float = PSD_TOL) -> Check:
    """Try every ``i0`` with ``B_i0`` positive definite at ``lambda = lambda*``.

    For larger ``lambda`` the matrix ``A + lambda B_i0`` is positive definite and
    the H2 cone collapses to ``{0}``, so ``lambda*`` is the only candidate.
    """
    attempts = []
    for i0 in range(instance.m):
        h1 = check_H1(instance, i0, tol)
        if not h1.holds:
            continue
        try:
            h2 = check_H2(instance, i0, h1.witness, tol)
        except PreconditionError as exc:
            attempts.append({"i0": i0, "lambda": h1.witness, "skipped": str(exc)})
            continue
        attempts.append({"i0": i0, "lambda": h1.witness, "H2": h2.verdict.value})
        if h2.holds:
            return Check(Verdict.YES, h2.witness, {"i0": i0, "lambda": h1.witness, "attempts": attempts})
    if not attempts:
        return Check(Verdict.NOT_APPLICABLE, None, {"reason": "no constraint with B_i positive definite"})
    if all("skipped" in a for a in attempts):
        return Check(Verdict.NOT_APPLICABLE, None, {"reason": "H2 preconditions unmet", "attempts": attempts})
    return Check(Verdict.NO, None, {"attempts": attempts})


# trust-region hypotheses ------------------------------------------------


def _tp_data(instance: QCQPInstance):
    A, a, x0, alpha, B = instance.tp_parts()
    lam, E = _smallest_eig_kernel(A)
    return A, a, x0, B, lam, E


def h3_cone(instance: QCQPInstance) -> PolyhedralCone:
    A, a, x0, B, lam, E = _tp_data(instance)
    G = np.vstack([(a + 2.0 * lam * x0)[None, :], B])
    return PolyhedralCone(instance.n, E, G)


def check_H3(instance: QCQPInstance) -> Check:
    """``(A - lam I) v = 0``, ``(a + 2 lam x0)^T v <= 0``, ``b_i^T v <= 0`` has ``v != 0``."""
    _, _, _, _, lam, _ = _tp_data(instance)
    res = cone_is_nontrivial(h3_cone(instance))
    detail = {"lambda_min": lam}
    return Check(Verdict.YES if res else Verdict.NO, res.witness, detail)


def _kernel_and_b(instance: QCQPInstance):
    A, a, x0, B, lam, E = _tp_data(instance)
    N = nullspace(E).basis
    Bn = B.copy()
    norms = np.linalg.norm(Bn, axis=1)
    Bn = Bn[norms > 0] / norms[norms > 0, None]
    bscale = float(np.linalg.svd(Bn, compute_uv=False)[0]) if Bn.shape[0] else 1.0
    return lam, N, Bn, bscale


def check_H4(instance: QCQPInstance) -> Check:
    """``ker(A - lam I)`` meets every hyperplane ``b_i^perp`` nontrivially."""
    lam, N, Bn, bscale = _kernel_and_b(instance)
    if Bn.shape[0] == 0:
        Y = np.eye(N.shape[1])
    else:
        Y = nullspace(Bn @ N, scale=bscale).basis
    if Y.shape[1] == 0:
        return Check(Verdict.NO, None, {"lambda_min": lam, "dim_intersection": 0})
    v = _normalize_witness(N @ Y[:, 0])
    return Check(Verdict.YES, v, {"lambda_min": lam, "dim_intersection": Y.shape[1]})


def check_dimension_condition(instance: QCQPInstance) -> Check:
    """``dim ker(A - lam I) >= s + 1`` with ``s = dim span{b_i}``."""
    lam, N, Bn, bscale = _kernel_and_b(instance)
    dim_ker = N.shape[1]
    s = matrix_rank(Bn, scale=bscale) if Bn.shape[0] else 0
    verdict = Verdict.YES if dim_ker >= s + 1 else Verdict.NO
    return Check(verdict, None, {"dim_ker": dim_ker, "s": s, "lambda_min": lam})


def cdt_cone(A, a, C, D) -> PolyhedralCone:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    _, E = _smallest_eig_kernel(A)
    C = np.asarray(C, dtype=float).reshape(-1, n)
    D = np.asarray(D, dtype=float).reshape(-1, n)
    return PolyhedralCone(n, np.vstack([E, C]), np.vstack([D, np.asarray(a, dtype=float).reshape(1, n)]))


def check_cdt_condition(data: APData | QCQPInstance) -> Check:
    """``ker(A - lam I) & ker C & {D v <= 0, a^T v <= 0}`` is nontrivial."""
    if isinstance(data, QCQPInstance):
        if data.ap is None:
            raise PreconditionError("not an AP instance")
        data = data.ap
    A = np.atleast_2d(np.asarray(data.A, dtype=float))
    n = A.shape[0]
    if np.asarray(data.a).size != n:
        raise InputError("dimension mismatch in AP data")
    res = cone_is_nontrivial(cdt_cone(A, data.a, data.C, data.D))
    return Check(Verdict.YES if res else Verdict.NO, res.witness, {})


# Slater -------------------------------------------------------------------


def check_slater(instance: QCQPInstance | Sequence[QuadraticFunction], seed: int = 0, margin: float = 1e-9) -> Check:
    """Search for ``x`` with every ``g_i(x) < 0``.

    ``no`` is reported only when every ``g_i`` is convex (so any local minimum
    of ``max_i g_i`` is global) and the search bottoms out at or above zero;
    otherwise a miss is ``unknown``.
    """
    gs = list(instance.gs if isinstance(instance, QCQPInstance) else instance)
    res = minimize_max(gs, seed=seed, stop_below=-1e-3)
    detail = {"min_max_g": res.value}
    if res.value < -margin:
        return Check(Verdict.YES, res.x, {**detail, "g_values": [g(res.x) for g in gs]})
    if all(is_psd(g.Q) for g in gs):
        return Check(Verdict.NO, None, {**detail, "certificate": "convex system, global min of max g_i >= 0"})
    return Check(Verdict.UNKNOWN, None, detail)


# aggregate ------------------------------------------------------------------


@dataclass
class AssumptionReport:
    kind: Kind
    H1_H2: Check
    slater: Check
    H3: Check | None = None
    H4: Check | None = None
    dimension_condition: Check | None = None
    cdt_condition: Check | None = None
    issues: list = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return not self.issues

    @property
    def strong_duality_hypotheses(self) -> bool:
        """H1, H2 and Slater all certified."""
        return self.H1_H2.holds and self.slater.holds

    def as_dict(self) -> dict:
        out = {"kind": self.kind.value, "consistent": self.consistent, "issues": list(self.issues)}
        for name in ("H1_H2", "slater", "H3", "H4", "dimension_condition", "cdt_condition"):
            chk = getattr(self, name)
            if chk is not None:
                out[name] = {"verdict": chk.verdict.value, "witness": chk.witness, "detail": chk.detail}
        return out


def _revalidate(instance: QCQPInstance, report: AssumptionReport) -> list:
    issues = []
    if report.H1_H2.holds:
        i0, lam = report.H1_H2.detail["i0"], report.H1_H2.detail["lambda"]
        if not h2_cone(instance, i0, lam).contains(report.H1_H2.witness, WITNESS_TOL):
            issues.append("H2 witness fails re-validation")
    if report.H3 is not None and report.H3.holds:
        if not h3_cone(instance).contains(report.H3.witness, WITNESS_TOL):
            issues.append("H3 witness fails re-validation")
    if report.H4 is not None and report.H4.holds:
        A, a, x0, B, lam, E = _tp_data(instance)
        v = report.H4.witness
        if np.abs(E @ v).max() > WITNESS_TOL * (1 + np.abs(A).max()) or (
            B.shape[0] and np.abs(B @ v).max() > WITNESS_TOL * (1 + np.abs(B).max())
        ):
            issues.append("H4 witness fails re-validation")
    if report.slater.holds:
        if max(g(report.slater.witness) for g in instance.gs) >= 0:
            issues.append("Slater point fails re-validation")
    if report.cdt_condition is not None and report.cdt_condition.holds:
        ap = instance.ap
        if not cdt_cone(ap.A, ap.a, ap.C, ap.D).contains(report.cdt_condition.witness, WITNESS_TOL):
            issues.append("CDT witness fails re-validation")
    return issues


def full_report(instance: QCQPInstance, seed: int = 0) -> AssumptionReport:
    """Run every applicable checker, then cross-check implications and witnesses."""
    report = AssumptionReport(instance.kind, search_H1_H2(instance), check_slater(instance, seed=seed))
    if instance.kind is Kind.TP:
        report.H3 = check_H3(instance)
        report.H4 = check_H4(instance)
        report.dimension_condition = check_dimension_condition(instance)
        if report.H4.holds and not report.H3.holds:
            report.issues.append("H4 holds but H3 does not")
        if report.dimension_condition.holds and not report.H4.holds:
            report.issues.append("dimension condition holds but H4 does not")
        if report.H3.holds and not report.H1_H2.holds:
            report.issues.append("H3 holds but H1/H2 search failed")
    if instance.kind is Kind.AP:
        report.cdt_condition = check_cdt_condition(instance)
    report.issues.extend(_revalidate(instance, report))
    return report

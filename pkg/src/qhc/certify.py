"""Global-optimality certificates, boundary restoration and global trust-region solves.

A pair ``(x, lam)`` with ``lam >= 0``, ``x`` feasible, complementarity,
stationarity of the Lagrangian and a PSD Lagrangian Hessian proves that ``x``
is a global minimizer: the Lagrangian is then a convex quadratic minimized at
``x`` and it underestimates ``f`` on the feasible set.  No further hypothesis
is needed for that direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .assumptions import Kind, QCQPInstance, check_cdt_condition, check_H2, full_report
from .errors import InputError, InternalContradiction, PreconditionError
from .quad_core import gradient, is_pd, sym_eigen
from .search import OracleConfig, primal_oracle
from .simplex import linprog
from .slemma_duality import lagrangian, maximize_dual, minimize_quadratic
from .tolerances import DEFAULT, ToleranceProfile

ACTIVE_TOL = 1e-6


@dataclass
class GlobalCertificate:
    x_bar: np.ndarray
    lambdas: np.ndarray
    residuals: dict
    valid: bool
    failed: str | None = None
    hypotheses: bool | None = None
    note: str = ""

    @property
    def verdict(self) -> str:
        return "valid" if self.valid else "invalid"

    def as_dict(self) -> dict:
        return {
            "x_bar": self.x_bar.tolist(),
            "lambdas": self.lambdas.tolist(),
            "residuals": dict(self.residuals),
            "verdict": self.verdict,
            "failed": self.failed,
            "hypotheses_H1_H2_slater": self.hypotheses,
            "note": self.note,
        }


def verify_certificate(
    instance: QCQPInstance, x_bar, lambdas, profile: ToleranceProfile = DEFAULT, hypotheses: bool | None = None
) -> GlobalCertificate:
    """Residuals of the optimality conditions and the resulting verdict."""
    x = np.asarray(x_bar, dtype=float).reshape(-1)
    lam = np.asarray(lambdas, dtype=float).reshape(-1)
    if x.size != instance.n or lam.size != instance.m:
        raise InputError("dimension mismatch between instance, point and multipliers")
    if np.any(lam < 0):
        raise InputError("multipliers must be nonnegative")
    L = lagrangian(instance, lam)
    gvals = np.array([g(x) for g in instance.gs])
    res = {
        "stationarity": float(np.abs(gradient(L, x)).max()),
        "complementarity": float(np.abs(lam * gvals).max()),
        "feasibility": float(gvals.max()),
        "psd_margin": float(sym_eigen(L.Q).smallest),
        "min_lambda": float(lam.min()),
        "objective": float(instance.f(x)),
    }
    checks = [
        ("stationarity", res["stationarity"] <= profile.eq),
        ("complementarity", res["complementarity"] <= profile.eq),
        ("feasibility", res["feasibility"] <= profile.ineq),
        ("psd", res["psd_margin"] >= -profile.psd),
        ("nonnegativity", res["min_lambda"] >= 0),
    ]
    failed = next((name for name, ok in checks if not ok), None)
    valid = failed is None
    if not valid:
        note = f"conditions fail at {failed}"
    elif hypotheses:
        note = "global minimizer; the conditions are also necessary under H1, H2 and Slater"
    else:
        note = "global minimizer (sufficiency holds unconditionally; necessity needs H1, H2 and Slater)"
    return GlobalCertificate(x, lam, res, valid, failed, hypotheses, note)


# multiplier recovery --------------------------------------------------------------


def active_set(instance: QCQPInstance, x, tol: float = ACTIVE_TOL) -> list:
    return [i for i, g in enumerate(instance.gs) if g(x) >= -tol * (1.0 + abs(g.c))]


def recover_multipliers(instance: QCQPInstance, x, active=None) -> np.ndarray:
    """Nonnegative multipliers on the active set from stationarity.

    NNLS gives one solution of ``sum lam_i grad g_i = -grad f``.  When the
    active gradients are dependent the solution set is a polytope; an LP then
    pushes weight onto curved constraints, which can only raise the Hessian's
    smallest eigenvalue when their matrices are PSD.
    """
    x = np.asarray(x, dtype=float)
    act = active_set(instance, x) if active is None else list(active)
    lam = np.zeros(instance.m)
    if not act:
        return lam
    J = np.column_stack([gradient(instance.gs[i], x) for i in act])
    rhs = -gradient(instance.f, x)
    sol, _ = nnls(J, rhs)
    lam[act] = sol
    curved = [k for k, i in enumerate(act) if np.any(instance.gs[i].Q != 0)]
    if curved and np.linalg.matrix_rank(J) < len(act):
        if sym_eigen(lagrangian(instance, lam).Q).smallest < 0:
            c = np.zeros(len(act))
            c[curved] = -1.0
            bounds = [(0.0, 1e6)] * len(act)
            lp = linprog(c, A_eq=J, b_eq=J @ sol, bounds=bounds)
            if lp.status == "optimal":
                lam[act] = np.maximum(lp.x, 0.0)
    return lam


def kkt_polish(instance: QCQPInstance, x, lam, active, iters: int = 20) -> tuple:
    """Newton iterations on stationarity plus ``g_i(x) = 0`` for the active set."""
    n = instance.n
    x = np.asarray(x, dtype=float).copy()
    lam = np.asarray(lam, dtype=float).copy()
    act = list(active)
    for _ in range(iters):
        L = lagrangian(instance, np.maximum(lam, 0.0))
        r1 = gradient(L, x)
        r2 = np.array([instance.gs[i](x) for i in act])
        r = np.concatenate([r1, r2])
        if np.abs(r).max() <= 1e-14 * (1.0 + np.abs(x).max()):
            break
        J = np.zeros((n + len(act), n + len(act)))
        J[:n, :n] = 2.0 * L.Q
        for k, i in enumerate(act):
            gi = gradient(instance.gs[i], x)
            J[:n, n + k] = gi
            J[n + k, :n] = gi
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        x += step[:n]
        lam[act] += step[n:]
    return x, np.maximum(lam, 0.0)


def certify_point(instance: QCQPInstance, x, profile: ToleranceProfile = DEFAULT, hypotheses=None) -> GlobalCertificate:
    """Polish ``x`` on its active set, recover multipliers and verify."""
    x = np.asarray(x, dtype=float)
    act = active_set(instance, x)
    lam = recover_multipliers(instance, x, act)
    best = verify_certificate(instance, x, lam, profile, hypotheses)
    if best.valid:
        return best
    xp, lp = kkt_polish(instance, x, lam, act)
    if np.all(np.isfinite(xp)) and np.linalg.norm(xp - x) <= 1e-3 * (1.0 + np.linalg.norm(x)):
        for lam_try in (recover_multipliers(instance, xp, act), lp):
            cert = verify_certificate(instance, xp, lam_try, profile, hypotheses)
            if cert.valid:
                return cert
    return best


# boundary restoration ---------------------------------------------------------------


@dataclass
class RestorationResult:
    x_in: np.ndarray
    v_bar: np.ndarray
    t0: float
    x_out: np.ndarray
    target_index: int
    checks: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "x_in": self.x_in.tolist(),
            "v_bar": self.v_bar.tolist(),
            "t0": self.t0,
            "x_out": self.x_out.tolist(),
            "target_index": self.target_index,
            "checks": dict(self.checks),
        }


def _positive_root(a: float, b: float, c: float) -> float:
    """Positive root of ``a t^2 + b t + c`` for ``a > 0 > c`` (roots of opposite sign)."""
    disc = b * b - 4.0 * a * c
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    return max(q / a, c / q)


def boundary_restoration(instance: QCQPInstance, i0: int, lam: float, x_in, omega, v_bar=None, tol: float = 1e-8) -> RestorationResult:
    """Move from ``x_in`` along a recession direction until ``g_i0`` reaches ``omega_i0``.

    Along ``v_bar`` the other constraints and ``f + lam g_i0`` never increase,
    while ``g_i0`` grows quadratically, so a unique positive step exists.
    """
    x_in = np.asarray(x_in, dtype=float).reshape(-1)
    omega = np.asarray(omega, dtype=float).reshape(-1)
    if x_in.size != instance.n or omega.size != instance.m:
        raise InputError("x_in needs n entries and omega needs m entries")
    g0 = instance.gs[i0]
    if not is_pd(g0.Q):
        raise InputError(f"constraint {i0} is not strictly convex")
    if not g0(x_in) < omega[i0]:
        raise InputError("start point must satisfy g_i0(x_in) < omega_i0")
    if v_bar is None:
        h2 = check_H2(instance, i0, lam)
        if not h2.holds:
            raise InputError("recession cone of the H2 system is trivial")
        v_bar = h2.witness
    v = np.asarray(v_bar, dtype=float).reshape(instance.n)
    a = float(v @ g0.Q @ v)
    b = float((2.0 * g0.Q @ x_in + g0.q) @ v)
    c = float(g0(x_in) - omega[i0])
    if not a > 0:
        raise InternalContradiction("no positive root: v_bar^T B v_bar is not positive")
    t0 = _positive_root(a, b, c)
    x_out = x_in + t0 * v
    F = instance.f + lam * g0
    checks = {
        "target_residual": float(g0(x_out) - omega[i0]),
        "objective_increase": float(F(x_out) - F(x_in)),
        "constraint_increase": max(
            [float(g(x_out) - g(x_in)) for i, g in enumerate(instance.gs) if i != i0] or [0.0]
        ),
    }
    scale = 1.0 + abs(omega[i0]) + abs(F(x_in))
    if abs(checks["target_residual"]) > tol * (1.0 + abs(omega[i0])):
        raise InternalContradiction(f"restored point misses the target: {checks['target_residual']:.3g}")
    if checks["objective_increase"] > tol * scale:
        raise InternalContradiction("objective increased along the recession direction")
    if checks["constraint_increase"] > tol * scale:
        raise InternalContradiction("a constraint increased along the recession direction")
    return RestorationResult(x_in, v, float(t0), x_out, i0, checks)


# trust-region global solve ---------------------------------------------------------


@dataclass
class TPSolution:
    x_star: np.ndarray | None
    value: float
    certificate: GlobalCertificate | None
    dual: object = None
    path: str = ""
    restoration: RestorationResult | None = None

    def as_dict(self) -> dict:
        return {
            "x_star": None if self.x_star is None else self.x_star.tolist(),
            "value": self.value,
            "certificate": None if self.certificate is None else self.certificate.as_dict(),
            "dual": None if self.dual is None else self.dual.as_dict(),
            "path": self.path,
            "restoration": None if self.restoration is None else self.restoration.as_dict(),
        }


def solve_tp_global(
    instance: QCQPInstance, profile: ToleranceProfile = DEFAULT, seed: int = 0, report=None, oracle: OracleConfig | None = None
) -> TPSolution:
    """Global minimizer of a trust-region instance with a certificate.

    Path: maximize the dual, take the Lagrangian minimizer, repair the hard
    case along a recession direction onto the sphere, polish on the active
    set and verify.  Brute-force oracle candidates serve as fallback starts.
    """
    if instance.kind is not Kind.TP:
        raise PreconditionError("solve_tp_global needs a trust-region instance")
    report = report or full_report(instance, seed=seed)
    hyp = bool(report.strong_duality_hypotheses)
    dual = maximize_dual(instance, profile.psd)
    restoration = None
    tried = []
    if math.isfinite(dual.dual_value):
        L = lagrangian(instance, dual.lambda_star)
        x = minimize_quadratic(L, profile.psd).x
        if x is not None:
            tried.append(("dual", x))
            ball = instance.gs[0]
            lin_ok = all(g(x) <= profile.ineq for g in instance.gs[1:])
            if lin_ok and ball(x) < -ACTIVE_TOL and dual.lambda_star[0] > ACTIVE_TOL:
                try:
                    restoration = boundary_restoration(
                        instance, 0, float(dual.lambda_star[0]), x, np.zeros(instance.m)
                    )
                    tried.insert(0, ("dual+restoration", restoration.x_out))
                except (InputError, InternalContradiction):
                    restoration = None
    prim = primal_oracle(instance.f, instance.gs, oracle)
    cands = sorted((c for c in prim.candidates if c[2]), key=lambda c: c[1])
    tried += [("oracle", c[0]) for c in cands]
    best = None
    for path, x in tried:
        cert = certify_point(instance, x, profile, hyp)
        if cert.valid:
            return TPSolution(cert.x_bar, float(instance.f(cert.x_bar)), cert, dual, path,
                              restoration if path == "dual+restoration" else None)
        if best is None and cert.residuals["feasibility"] <= profile.ineq:
            best = (path, cert)
    if best is None:
        return TPSolution(None, math.inf, None, dual, "none")
    path, cert = best
    cert.note = "no valid certificate found; " + ("best KKT candidate" if hyp else "hypotheses unmet, local/KKT point only")
    return TPSolution(cert.x_bar, float(instance.f(cert.x_bar)), cert, dual, path)


# CDT sphere minimizer ----------------------------------------------------------------


@dataclass
class SphereResult:
    x_star: np.ndarray
    value: float
    interior_value: float
    pushed: bool
    restoration: RestorationResult | None = None

    def as_dict(self) -> dict:
        return {
            "x_star": self.x_star.tolist(),
            "value": self.value,
            "interior_value": self.interior_value,
            "norm": float(np.linalg.norm(self.x_star)),
            "pushed": self.pushed,
            "restoration": None if self.restoration is None else self.restoration.as_dict(),
        }


def cdt_sphere_minimizer(instance: QCQPInstance, oracle: OracleConfig | None = None) -> SphereResult:
    """Minimize an AP instance, then slide the minimizer onto the unit sphere.

    The slide follows the witness of the kernel condition: it keeps the
    objective, the second ball and the linear constraints non-increasing.
    """
    if instance.kind is not Kind.AP:
        raise PreconditionError("cdt_sphere_minimizer needs an AP instance")
    cond = check_cdt_condition(instance)
    if not cond.holds:
        raise PreconditionError("kernel condition fails for this AP instance")
    prim = primal_oracle(instance.f, instance.gs, oracle)
    if not prim.feasible:
        raise PreconditionError("no feasible point found")
    x = prim.x
    val = float(instance.f(x))
    ball = instance.gs[0]
    if ball(x) >= -1e-12:
        return SphereResult(x, val, val, False)
    res = boundary_restoration(instance, 0, 0.0, x, np.zeros(instance.m), v_bar=cond.witness)
    return SphereResult(res.x_out, float(instance.f(res.x_out)), val, True, res)


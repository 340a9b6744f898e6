"""Acceptance suite: bundled worked examples and randomized property suites.

Each criterion is a function ``(ctx) -> (passed, detail)``; :func:`run_suite`
times them and collects :class:`CriterionResult` rows.  ``detail`` holds only
deterministic values so reports can be compared byte for byte.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from . import generators as gen
from .assumptions import Verdict, check_H1, check_H2, full_report
from .certify import cdt_sphere_minimizer, certify_point, solve_tp_global, verify_certificate
from .errors import InternalContradiction, QHCError
from .hidden_convexity import (
    THETAS,
    MembershipOracleConfig,
    classify_region_1d,
    membership_1d,
    membership_1d_batch,
    membership_exact,
    sample_U_convexity,
    segment_witness,
)
from .io import instance_digest, load_instance, strip_timings
from .quad_core import QuadraticFunction, restrict_to_line
from .search import OracleConfig, primal_oracle, sample_feasible
from .slemma_duality import dual_value, maximize_dual, slemma_decide, strong_duality_report, weak_duality_violations

FIXTURE_NAMES = ("ex3_1", "ex3_2", "ex3_3", "ex5_2")


def bundled_fixtures() -> Path:
    return Path(str(resources.files("qhc") / "fixtures"))


@dataclass
class Context:
    seed: int = 7
    fixtures: Path = field(default_factory=bundled_fixtures)
    threads: int = 1
    # weak-duality bookkeeping shared across suites
    dual_points: int = 0
    weak_violations: list = field(default_factory=list)

    def fixture(self, name):
        return load_instance(self.fixtures / f"{name}.json")

    def rng(self, salt: int):
        return np.random.default_rng([self.seed, salt])

    def record_trace(self, source, trace, primal_value):
        if primal_value is None or not math.isfinite(primal_value):
            return
        self.dual_points += len(trace)
        for lam, v in weak_duality_violations(trace, primal_value):
            self.weak_violations.append({"source": source, "lambda": np.asarray(lam).tolist(), "omega": v, "primal": primal_value})


@dataclass
class CriterionResult:
    id: int
    name: str
    family: str
    passed: bool
    detail: dict
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return {"id": self.id, "name": self.name, "family": self.family, "passed": self.passed, "detail": self.detail}


# worked examples ----------------------------------------------------------------


def c1_ex3_1(ctx):
    inst = ctx.fixture("ex3_1")
    rep = full_report(inst, seed=ctx.seed)
    h3, dim = rep.H3, rep.dimension_condition
    samp = sample_U_convexity(inst, trials=10_000, seed=ctx.seed)
    ok_h3 = h3.holds and float(np.asarray(h3.witness)[0]) < 0
    ok_dim = dim.verdict is Verdict.NO and (dim.detail["dim_ker"], dim.detail["s"]) == (1, 1)
    return ok_h3 and ok_dim and samp.ok and rep.consistent, {
        "H3": h3.verdict.value,
        "H3_witness": h3.witness,
        "dimension_condition": dim.verdict.value,
        "dim_ker_s": [dim.detail["dim_ker"], dim.detail["s"]],
        "sampler": {"trials": samp.trials, "certified": samp.certified, "candidates": samp.candidates},
    }


def c2_ex3_2(ctx):
    inst = ctx.fixture("ex3_2")
    rep = full_report(inst, seed=ctx.seed)
    h4, dim = rep.H4, rep.dimension_condition
    w = None if h4.witness is None else np.asarray(h4.witness, dtype=float)
    prop = w is not None and abs(w[0]) > 0 and abs(w[1]) <= 1e-9 * abs(w[0])
    samp = sample_U_convexity(inst, trials=5_000, seed=ctx.seed, threads=ctx.threads)
    return bool(h4.holds and prop and dim.verdict is Verdict.NO and samp.ok and rep.consistent), {
        "H4": h4.verdict.value,
        "H4_witness": w,
        "dimension_condition": dim.verdict.value,
        "sampler": {"trials": samp.trials, "certified": samp.certified, "candidates": samp.candidates, "resolved": samp.resolved},
    }


def c3_ex3_3(ctx):
    inst = ctx.fixture("ex3_3")
    rep = full_report(inst, seed=ctx.seed)
    # H2 must fail at every index where H1 holds
    h2_direct = []
    for i0 in range(inst.m):
        h1 = check_H1(inst, i0)
        if h1.holds:
            h2_direct.append(check_H2(inst, i0, h1.witness).verdict.value)
    h2_no = rep.H1_H2.verdict is Verdict.NO and all(v == "no" for v in h2_direct)
    # the fixture pair x in {0, 1} must certify on its own
    funcs = [inst.f, *inst.gs]
    F = lambda x: np.array([h(np.array([x])) for h in funcs])
    mid = 0.5 * (F(0.0) + F(1.0))
    lines = [restrict_to_line(h, np.zeros(1), np.ones(1)) for h in funcs]
    pair_member = membership_exact(lines, mid).member
    samp = sample_U_convexity(inst, trials=1_000, seed=ctx.seed, pairs=[[[0.0], [1.0]]])
    pair_hits = [
        v for v in samp.violations
        if v.status == "certified" and {float(v.x_u[0]), float(v.x_v[0])} == {0.0, 1.0}
    ]
    pair_reported = any(np.allclose(v.w, [0.0, -0.5, -0.5], atol=1e-12) for v in pair_hits)
    passed = h2_no and rep.H3.verdict is Verdict.NO and rep.H4.verdict is Verdict.NO
    passed = passed and samp.certified >= 1 and not pair_member and pair_reported
    return passed, {
        "H2": rep.H1_H2.verdict.value,
        "H2_direct": h2_direct,
        "H3": rep.H3.verdict.value,
        "H4": rep.H4.verdict.value,
        "midpoint": mid,
        "pair_certifies": not pair_member,
        "certified_violations": samp.certified,
        "pair_violation_thetas": [v.theta for v in pair_hits],
    }


def c4_ex5_2(ctx):
    inst = ctx.fixture("ex5_2")
    rep = full_report(inst, seed=ctx.seed)
    sl = rep.slater
    g_at = [float(g(sl.witness)) for g in inst.gs] if sl.holds else None
    w1 = dual_value(inst, [1.0, 0.0]).value
    w05 = dual_value(inst, [0.5, 0.0]).value
    dual = maximize_dual(inst)
    sdr = strong_duality_report(inst, report=rep, seed=ctx.seed)
    ctx.record_trace("ex5_2", sdr.trace, sdr.primal_value)
    xbar = np.array([1.0, -1.0]) / math.sqrt(2.0)
    cert = verify_certificate(inst, xbar, [1.0, 0.0])
    alt = full_report(ctx.fixture("ex5_2_a01"), seed=ctx.seed)  # other reading of the linear term
    checks = {
        "H3": rep.H3.holds and alt.H3.holds,
        "slater": sl.holds and all(v < 0 for v in g_at),
        "omega(1,0)": abs(w1 + 1.0) <= 1e-9,
        "omega(0.5,0)": w05 == -math.inf,
        "max_dual": abs(dual.dual_value + 1.0) <= 1e-6,
        "gap": sdr.gap is not None and abs(sdr.gap) <= 1e-5,
        "certificate": cert.valid,
    }
    return all(checks.values()), {
        "checks": checks,
        "slater_g": g_at,
        "omega_1_0": w1,
        "omega_05_0": w05,
        "dual_value": dual.dual_value,
        "lambda_star": dual.lambda_star,
        "gap": sdr.gap,
        "certificate_residuals": cert.residuals,
    }


# property suites --------------------------------------------------------------------


def c5_one_dim_images(ctx, pairs: int = 10_000, scan_instances: int = 100, scan_points: int = 1_000_000):
    rng = ctx.rng(5)
    rejected = 0
    first_bad = None
    for k in range(pairs):
        alpha, beta = gen.random_pair_1d(rng)
        xs = rng.uniform(-3.0, 3.0, size=2)
        shifts = np.where(rng.random((2, 2)) < 0.5, 0.0, rng.exponential(1.0, size=(2, 2)))
        u = np.array([alpha(xs[0]), beta(xs[0])]) + shifts[0]
        v = np.array([alpha(xs[1]), beta(xs[1])]) + shifts[1]
        for th in THETAS:
            t = th * u + (1 - th) * v
            if not membership_1d(alpha, beta, t).member:
                rejected += 1
                if first_bad is None:
                    first_bad = {"pair": k, "theta": float(th), "target": t}

    # exact decisions against a dense scan of preimages
    disagreements = 0
    region_mismatch = 0
    targets_checked = 0
    for _ in range(scan_instances):
        alpha, beta = gen.random_pair_1d(rng)
        T = np.column_stack([alpha(rng.uniform(-4, 4, 2000)), beta(rng.uniform(-4, 4, 2000))])
        T += rng.normal(scale=2.0, size=T.shape)
        big = np.abs(T).max()
        R = 1.0
        for q in (alpha, beta):
            if q.a1:
                R = max(R, 1.0 + (abs(q.a2) + abs(q.a3) + big) / abs(q.a1))
            elif q.a2:
                R = max(R, 1.0 + (abs(q.a3) + big) / abs(q.a2))
        xs = np.linspace(-R, R, scan_points)
        av, bv = alpha(xs), beta(xs)
        order = np.argsort(av, kind="stable")
        a_sorted = av[order]
        b_prefix = np.minimum.accumulate(bv[order])
        member, pre = membership_1d_batch(alpha, beta, T)
        band = 1e-9 * (1.0 + np.abs(T))
        # scan finds a strictly interior preimage: exact must say member
        idx = np.searchsorted(a_sorted, T[:, 0] - band[:, 0], side="right") - 1
        scan_inside = (idx >= 0) & (b_prefix[np.maximum(idx, 0)] <= T[:, 1] - band[:, 1])
        disagreements += int(np.sum(scan_inside & ~member))
        # exact members must evaluate inside the band
        ok_eval = (alpha(pre) <= T[:, 0] + 10 * band[:, 0]) & (beta(pre) <= T[:, 1] + 10 * band[:, 1])
        disagreements += int(np.sum(member & ~ok_eval))
        reg = classify_region_1d(alpha, beta)
        if reg.shape.value != "ClosedConvexEpigraphLike":
            region_mismatch += sum(reg.contains(t) != bool(m) for t, m in zip(T[:200], member[:200]))
        targets_checked += len(T)
    passed = rejected == 0 and disagreements == 0 and region_mismatch == 0
    return passed, {
        "pairs": pairs,
        "combinations_rejected": rejected,
        "first_rejection": first_bad,
        "scan_instances": scan_instances,
        "scan_points": scan_points,
        "targets_checked": targets_checked,
        "disagreements": disagreements,
        "region_mismatches": int(region_mismatch),
    }


def c6_segment_witness(ctx, trials: int = 2_000):
    rng = ctx.rng(6)
    contradictions = 0
    successes = 0
    first = None
    for k in range(trials):
        n = int(rng.integers(1, 5))
        f = QuadraticFunction(gen.int_sym(rng, n), rng.integers(-3, 4, n).astype(float), float(rng.integers(-3, 4)))
        g = QuadraticFunction(gen.int_sym(rng, n), rng.integers(-3, 4, n).astype(float), float(rng.integers(-3, 4)))
        dim = int(rng.integers(1, n + 1))
        base = rng.normal(size=n)
        basis = rng.normal(size=(n, dim))
        a = base + basis @ rng.normal(size=dim)
        b = base + basis @ rng.normal(size=dim)
        Fa, Fb = np.array([f(a), g(a)]), np.array([f(b), g(b)])
        for th in THETAS:
            shift = np.where(rng.random(2) < 0.5, 0.0, rng.exponential(1.0, 2))
            w = th * Fa + (1 - th) * Fb + shift
            try:
                sw = segment_witness(f, g, base, basis, a, b, w)
            except InternalContradiction as exc:
                contradictions += 1
                if first is None:
                    first = {"trial": k, "theta": float(th), "error": str(exc)}
                continue
            successes += bool(f(sw.x) <= w[0] + 1e-7 * (1 + abs(w[0])) and g(sw.x) <= w[1] + 1e-7 * (1 + abs(w[1])))
    return contradictions == 0 and successes == trials * len(THETAS), {
        "trials": trials,
        "targets": trials * len(THETAS),
        "successes": successes,
        "internal_contradictions": contradictions,
        "first_failure": first,
    }


def c7_polyak(ctx, instances: int = 500, trials: int = 2_000):
    rng = ctx.rng(7)
    certified = candidates = 0
    resolved = {"line": 0, "grid_or_local": 0, "reverified": 0}
    bad = []
    for k in range(instances):
        inst = gen.random_tp_m1(rng, n=2)
        rep = sample_U_convexity(inst, trials=trials, seed=int(rng.integers(2**31)), threads=ctx.threads)
        certified += rep.certified
        candidates += rep.candidates
        for key in resolved:
            resolved[key] += rep.resolved[key]
        if not rep.ok and len(bad) < 5:
            bad.append({"instance": k, "digest": instance_digest(inst), "violations": [v.as_dict() for v in rep.violations[:2]]})
    return certified == 0 and candidates == 0, {
        "instances": instances,
        "trials_each": trials,
        "certified": certified,
        "unresolved_candidates": candidates,
        "resolved": resolved,
        "examples": bad,
    }


def c8_implications(ctx, instances: int = 1_000):
    rng = ctx.rng(8)
    counter = {"dim=>H4": 0, "H4=>H3": 0, "H3=>H1H2": 0}
    witness_issues = 0
    strict = 0
    tally = {"dimension": 0, "H4": 0, "H3": 0, "H1_H2": 0}
    for _ in range(instances):
        inst = gen.random_tp(rng)
        rep = full_report(inst, seed=ctx.seed)
        dim, h4, h3, h12 = rep.dimension_condition.holds, rep.H4.holds, rep.H3.holds, rep.H1_H2.holds
        counter["dim=>H4"] += dim and not h4
        counter["H4=>H3"] += h4 and not h3
        counter["H3=>H1H2"] += h3 and not h12
        witness_issues += sum("re-validation" in s for s in rep.issues)
        strict += h4 and not dim
        for key, val in zip(tally, (dim, h4, h3, h12)):
            tally[key] += val
    counter = {k: int(v) for k, v in counter.items()}
    return sum(counter.values()) == 0 and witness_issues == 0 and strict >= 50, {
        "instances": instances,
        "counterexamples": counter,
        "witness_issues": int(witness_issues),
        "H4_and_not_dimension": int(strict),
        "holds_counts": {k: int(v) for k, v in tally.items()},
    }


def c9_certificates(ctx, wanted: int = 300, points: int = 10_000, max_attempts: int = 3_000):
    rng = ctx.rng(9)
    # soundness
    valid = attempts = sound_viol = 0
    worst = 0.0
    while valid < wanted and attempts < max_attempts:
        attempts += 1
        inst = gen.random_tp_slater(rng)
        sol = solve_tp_global(inst, seed=ctx.seed)
        ctx.record_trace("solve_tp_global", sol.dual.trace, sol.value if sol.x_star is not None else None)
        if sol.certificate is None or not sol.certificate.valid:
            continue
        valid += 1
        X = sample_feasible(inst.gs, inst.n, points, rng)
        gap = float(inst.f.values(X).min() - sol.value) if len(X) else 0.0
        worst = min(worst, gap)
        sound_viol += gap < -1e-6
    # completeness under H1, H2 and Slater
    comp = comp_fail = comp_attempts = 0
    failures = []
    while comp < wanted and comp_attempts < max_attempts:
        comp_attempts += 1
        inst = gen.random_tp_slater(rng)
        rep = full_report(inst, seed=ctx.seed)
        if not rep.strong_duality_hypotheses:
            continue
        comp += 1
        prim = primal_oracle(inst.f, inst.gs)
        cert = certify_point(inst, prim.x, hypotheses=True) if prim.feasible else None
        if cert is None or not cert.valid:
            comp_fail += 1
            if len(failures) < 5:
                failures.append({"digest": instance_digest(inst), "failed": None if cert is None else cert.failed})
    passed = valid == wanted and sound_viol == 0 and comp == wanted and comp_fail == 0
    return passed, {
        "soundness": {"valid_instances": valid, "attempts": attempts, "points_each": points,
                      "violations": int(sound_viol), "worst_gap": worst},
        "completeness": {"instances": comp, "attempts": comp_attempts, "failures": comp_fail, "examples": failures},
    }


def c10_slemma(ctx, instances: int = 500, points: int = 10_000):
    rng = ctx.rng(10)
    kinds = {"multiplier-found": 0, "counterexample": 0, "inconclusive": 0}
    check_fail = []
    for k in range(instances):
        inst = gen.random_slater_m1(rng)
        cert = slemma_decide(inst, seed=ctx.seed)
        kinds[cert.kind] += 1
        n = inst.n
        X = rng.uniform(-10.0, 10.0, size=(points, n))
        if cert.kind == "multiplier-found":
            L = inst.f + float(cert.lambdas[0]) * inst.gs[0]
            lv = L.values(X)
            feas = inst.gs[0].values(X) <= 0
            fv = inst.f.values(X[feas])
            scale = 1e-7 * (1.0 + np.abs(L.values(X)).max())
            if lv.min() < -scale or (fv.size and fv.min() < -scale):
                check_fail.append({"instance": k, "kind": cert.kind})
        elif cert.kind == "counterexample":
            if not (inst.gs[0](cert.x) <= 0 and inst.f(cert.x) < 0):
                check_fail.append({"instance": k, "kind": cert.kind})
        # weak duality on the dual trace and on random multipliers
        dual = maximize_dual(inst)
        prim = primal_oracle(inst.f, inst.gs, OracleConfig(grid_per_axis=21, keep=5))
        if prim.feasible:
            extra = [(np.array([s]), dual_value(inst, [s]).value) for s in rng.exponential(2.0, size=5)]
            ctx.record_trace("slemma_m1", dual.trace + extra, prim.value)
    passed = kinds["inconclusive"] == 0 and not check_fail and not ctx.weak_violations
    return passed, {
        "instances": instances,
        "verdicts": kinds,
        "check_failures": check_fail[:5],
        "weak_duality_points": ctx.dual_points,
        "weak_duality_violations": ctx.weak_violations[:5],
        "weak_duality_violation_count": len(ctx.weak_violations),
    }


def c11_cdt(ctx, wanted: int = 100, max_attempts: int = 1_000):
    rng = ctx.rng(11)
    done = attempts = 0
    failures = []
    worst_norm = worst_obj = 0.0
    pushed = 0
    while done < wanted and attempts < max_attempts:
        attempts += 1
        inst = gen.random_ap(rng)
        if not full_report(inst, seed=ctx.seed).cdt_condition.holds:
            continue
        done += 1
        try:
            res = cdt_sphere_minimizer(inst)
        except QHCError as exc:
            failures.append({"digest": instance_digest(inst), "error": str(exc)})
            continue
        dn = abs(float(np.linalg.norm(res.x_star)) - 1.0)
        do = res.value - res.interior_value
        worst_norm, worst_obj = max(worst_norm, dn), max(worst_obj, do)
        pushed += res.pushed
        feas = max(g(res.x_star) for g in inst.gs) <= 1e-8
        if dn > 1e-8 or do > 1e-7 or not feas:
            failures.append({"digest": instance_digest(inst), "norm_error": dn, "objective_increase": do, "feasible": feas})
    return done == wanted and not failures, {
        "instances": done,
        "attempts": attempts,
        "pushed_to_sphere": int(pushed),
        "max_norm_error": worst_norm,
        "max_objective_increase": worst_obj,
        "failures": failures[:5],
    }


def fixture_reports(ctx) -> list:
    """Deterministic check/solve/sample reports for the bundled worked examples."""
    out = []
    for name in FIXTURE_NAMES:
        inst = ctx.fixture(name)
        rep = full_report(inst, seed=ctx.seed)
        sol = solve_tp_global(inst, seed=ctx.seed, report=rep)
        samp = sample_U_convexity(inst, trials=500, seed=ctx.seed, threads=ctx.threads)
        out.append(strip_timings({"fixture": name, "digest": instance_digest(inst), "report": rep.as_dict(),
                                  "solution": sol.as_dict(), "sampler": samp.as_dict()}))
    return out


def c12_determinism(ctx):
    from .io import dumps_report

    first = dumps_report({"runs": fixture_reports(ctx)})
    second = dumps_report({"runs": fixture_reports(ctx)})
    return first == second, {"fixtures": list(FIXTURE_NAMES), "bytes": len(first), "identical": first == second}


@dataclass(frozen=True)
class Criterion:
    id: int
    name: str
    family: str
    run: Callable


CRITERIA = (
    Criterion(1, "ex3_1: H3 yes, dimension condition no, U convex", "ex3_1", c1_ex3_1),
    Criterion(2, "ex3_2: H4 yes, dimension condition no, U convex", "ex3_2", c2_ex3_2),
    Criterion(3, "ex3_3: H2/H3/H4 no, certified nonconvexity", "ex3_3", c3_ex3_3),
    Criterion(4, "ex5_2: dual values, zero gap, valid certificate", "ex5_2", c4_ex5_2),
    Criterion(5, "one-dimensional image sets", "one_dim", c5_one_dim_images),
    Criterion(6, "segment witnesses", "segment", c6_segment_witness),
    Criterion(7, "single-ball trust region convexity", "single_ball", c7_polyak),
    Criterion(8, "assumption implication chain", "implications", c8_implications),
    Criterion(9, "certificate soundness and completeness", "certificates", c9_certificates),
    Criterion(10, "S-lemma with one constraint, weak duality", "slemma", c10_slemma),
    Criterion(11, "sphere minimizer for two-ball problems", "cdt", c11_cdt),
    Criterion(12, "determinism", "determinism", c12_determinism),
)


def select(filters=None) -> list:
    """Criteria whose id, family or name contains one of ``filters``."""
    if not filters:
        return list(CRITERIA)
    keys = [str(f).strip().lower() for f in filters]

    def hit(c, k):
        if k.isdigit():
            return int(k) == c.id
        return k in c.family.lower() or k in c.name.lower()

    return [c for c in CRITERIA if any(hit(c, k) for k in keys)]


def run_criterion(crit: Criterion, ctx: Context) -> CriterionResult:
    t0 = time.perf_counter()
    try:
        passed, detail = crit.run(ctx)
    except QHCError as exc:
        passed, detail = False, {"error": f"{type(exc).__name__}: {exc}"}
    return CriterionResult(crit.id, crit.name, crit.family, bool(passed), detail, time.perf_counter() - t0)


def run_suite(ctx: Context | None = None, filters=None, on_result=None) -> list:
    ctx = ctx or Context()
    results = []
    for crit in select(filters):
        res = run_criterion(crit, ctx)
        results.append(res)
        if on_result is not None:
            on_result(res)
    return results


def format_line(res: CriterionResult) -> str:
    return f"[{'PASS' if res.passed else 'FAIL'}] {res.id:>2} {res.name} ({res.seconds:.1f}s)"

"""``qhc`` command line: check, solve, sample, slemma, certify and repro.

Exit codes: 0 ok, 1 acceptance or internal failure, 2 bad input, 3 precondition.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import acceptance
from .assumptions import Kind, full_report
from .certify import cdt_sphere_minimizer, certify_point, solve_tp_global, verify_certificate
from .errors import InputError, PreconditionError, QHCError
from .hidden_convexity import MembershipOracleConfig, sample_U_convexity
from .io import ParseError, dumps_report, instance_digest, load_instance, report_to_csv
from .search import OracleConfig, primal_oracle
from .slemma_duality import slemma_decide, strong_duality_report, weak_duality_violations
from .tolerances import ToleranceProfile

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_PRECONDITION = 0, 1, 2, 3

log = logging.getLogger("qhc")


def _resolve_instance(arg: str) -> Path:
    """A path, or the name of a bundled worked example such as ``ex3_1``."""
    p = Path(arg)
    if p.exists():
        return p
    bundled = acceptance.bundled_fixtures() / f"{p.stem}.json"
    if p.suffix in ("", ".json") and p.parent == Path(".") and bundled.exists():
        return bundled
    return p


def _floats(text: str, what: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.replace(",", " ").split()], dtype=float)
    except ValueError as exc:
        raise InputError(f"{what}: expected comma-separated numbers") from exc


def _oracle(budget: int) -> OracleConfig:
    if budget < 1:
        raise InputError("--budget must be a positive integer")
    base = OracleConfig()
    return OracleConfig(
        grid_per_axis=base.grid_per_axis * budget,
        keep=base.keep * budget,
        refine_steps=base.refine_steps * budget,
        max_points=base.max_points * budget,
    )


class Run:
    """Timing and report assembly for one command."""

    def __init__(self, args, inst):
        self.args = args
        self.inst = inst
        self.timings = {}
        self.report = {
            "command": args.command,
            "instance_digest": instance_digest(inst),
            "seed": args.seed,
            "tolerance_profile": args.profile.as_dict(),
            "assumption_report": None,
            "results": {},
            "violations": [],
            "certificates": [],
        }

    def timed(self, name, fn, *a, **kw):
        t0 = time.perf_counter()
        out = fn(*a, **kw)
        self.timings[name] = time.perf_counter() - t0
        return out

    def assumptions(self):
        rep = self.timed("assumptions", full_report, self.inst, seed=self.args.seed)
        self.report["assumption_report"] = rep.as_dict()
        return rep

    def finish(self) -> dict:
        self.report["timings"] = self.timings
        return self.report


def cmd_check(args, run: Run):
    rep = run.assumptions()
    run.report["results"] = {"consistent": rep.consistent, "strong_duality_hypotheses": rep.strong_duality_hypotheses}
    return EXIT_OK


def cmd_solve(args, run: Run):
    inst = run.inst
    rep = run.assumptions()
    oracle = _oracle(args.budget)
    if inst.n > 4:
        raise PreconditionError("solve supports n <= 4 (brute-force primal oracle)")
    dual = run.timed("strong_duality", strong_duality_report, inst, oracle, rep, args.seed, args.profile.psd)
    results = {"duality": dual.as_dict()}
    if inst.kind is Kind.TP:
        sol = run.timed("solve_tp_global", solve_tp_global, inst, args.profile, args.seed, rep, oracle)
        results["solution"] = sol.as_dict()
        if sol.certificate is not None:
            run.report["certificates"].append(sol.certificate.as_dict())
    elif dual.primal_x is not None:
        cert = run.timed("certify", certify_point, inst, dual.primal_x, args.profile, rep.strong_duality_hypotheses)
        results["solution"] = {"x_star": dual.primal_x.tolist(), "value": dual.primal_value}
        run.report["certificates"].append(cert.as_dict())
    wd = weak_duality_violations(dual.trace, dual.primal_value)
    results["weak_duality_violations"] = len(wd)
    if not dual.hypotheses and dual.gap is not None and abs(dual.gap) > 1e-5:
        results["note"] = "H1, H2 and Slater not all certified; a positive gap is allowed"
    run.report["results"] = results
    return EXIT_OK


def cmd_sample(args, run: Run):
    cfg = MembershipOracleConfig() if args.box is None else MembershipOracleConfig(box_radius=args.box)
    rep = run.timed(
        "sampler", sample_U_convexity, run.inst, cfg, trials=args.trials, seed=args.seed, threads=args.threads
    )
    d = rep.as_dict()
    run.report["violations"] = d.pop("violations")
    run.report["results"] = d
    return EXIT_OK


def cmd_slemma(args, run: Run):
    cert = run.timed("slemma", slemma_decide, run.inst, args.seed, args.profile.psd)
    run.report["results"] = cert.as_dict()
    run.report["certificates"].append(cert.as_dict())
    return EXIT_OK


def cmd_certify(args, run: Run):
    inst = run.inst
    rep = run.assumptions()
    hyp = rep.strong_duality_hypotheses
    results = {}
    if args.x is not None:
        x = _floats(args.x, "--x")
        if args.lam is not None:
            cert = run.timed("verify", verify_certificate, inst, x, _floats(args.lam, "--lambda"), args.profile, hyp)
        else:
            cert = run.timed("certify", certify_point, inst, x, args.profile, hyp)
    elif inst.kind is Kind.TP:
        sol = run.timed("solve_tp_global", solve_tp_global, inst, args.profile, args.seed, rep, _oracle(args.budget))
        results["solution"] = sol.as_dict()
        cert = sol.certificate
    elif inst.kind is Kind.AP:
        sph = run.timed("sphere", cdt_sphere_minimizer, inst, _oracle(args.budget))
        results["sphere"] = sph.as_dict()
        cert = run.timed("certify", certify_point, inst, sph.x_star, args.profile, hyp)
    else:
        prim = run.timed("primal", primal_oracle, inst.f, inst.gs, _oracle(args.budget))
        if not prim.feasible:
            raise PreconditionError("no feasible point found to certify")
        cert = run.timed("certify", certify_point, inst, prim.x, args.profile, hyp)
    if cert is not None:
        run.report["certificates"].append(cert.as_dict())
        results["verdict"] = cert.verdict
    run.report["results"] = results
    return EXIT_OK


COMMANDS = {"check": cmd_check, "solve": cmd_solve, "sample": cmd_sample, "slemma": cmd_slemma, "certify": cmd_certify}


def cmd_repro(args) -> int:
    ctx = acceptance.Context(seed=args.seed, threads=args.threads)
    if args.fixtures_dir is not None:
        ctx.fixtures = Path(args.fixtures_dir)
    filters = [f for item in args.filter or () for f in item.split(",") if f.strip()]
    crits = acceptance.select(filters)
    if not crits:
        raise InputError(f"--filter matches no criterion: {filters}")
    results = acceptance.run_suite(ctx, filters, on_result=lambda r: print(acceptance.format_line(r), flush=True))
    failed = [r.id for r in results if not r.passed]
    report = {
        "command": "repro",
        "seed": args.seed,
        "tolerance_profile": args.profile.as_dict(),
        "results": [r.as_dict() for r in results],
        "failed": failed,
        "timings": {str(r.id): r.seconds for r in results},
    }
    if args.out:
        _emit(args, report)
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    if failed:
        print("failed criteria: " + ", ".join(map(str, failed)), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _emit(args, report):
    text = report_to_csv(report) if args.csv else dumps_report(report)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", help="tolerance profile, e.g. 'eq=1e-7,ineq=1e-8,psd=1e-9' (overrides QHC_TOL)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="write the report here instead of stdout")
    fmt = common.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="JSON report (default)")
    fmt.add_argument("--csv", action="store_true", help="flattened key,value CSV report")
    common.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")

    p = argparse.ArgumentParser(prog="qhc", description="Hidden convexity and global optimality tools for QCQPs.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("check", "assumption report"),
        ("solve", "dual, primal, gap and certificate"),
        ("sample", "empirical convexity sampler"),
        ("slemma", "S-lemma multipliers or a counterexample"),
        ("certify", "global optimality certificate"),
    ):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("instance", help="instance JSON path or bundled example name (ex3_1, ...)")
        if name in ("solve", "certify"):
            sp.add_argument("--budget", type=int, default=1, help="primal oracle budget multiplier")
        if name == "sample":
            sp.add_argument("--trials", type=int, default=1000)
            sp.add_argument("--box", type=float, default=None, help="sampling box radius")
        if name == "certify":
            sp.add_argument("--x", help="candidate point, comma separated")
            sp.add_argument("--lambda", dest="lam", help="multipliers, comma separated (recovered when omitted)")
    rp = sub.add_parser("repro", parents=[common], help="run the acceptance suite")
    rp.set_defaults(seed=7)
    rp.add_argument("--filter", action="append", help="criterion id or family (repeatable, comma separated)")
    rp.add_argument("--fixtures-dir", help="directory holding ex3_1.json, ex3_2.json, ex3_3.json, ex5_2.json")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="qhc: %(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        args.profile = ToleranceProfile.parse(args.tol or "", ToleranceProfile.from_env())
        if args.threads < 1:
            raise InputError("--threads must be positive")
        if args.command == "repro":
            return cmd_repro(args)
        inst = load_instance(_resolve_instance(args.instance))
        run = Run(args, inst)
        code = COMMANDS[args.command](args, run)
        _emit(args, run.finish())
        return code
    except ParseError as exc:
        print(f"qhc: parse error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InputError as exc:
        print(f"qhc: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PreconditionError as exc:
        print(f"qhc: precondition: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except QHCError as exc:
        print(f"qhc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

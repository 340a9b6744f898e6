"""Images of quadratic maps: exact 1-D membership, segment witnesses and a convexity sampler.

The set under study is ``U = {(f(x), g_1(x), ..., g_m(x))} + R^{m+1}_+``.  In
one variable every membership question reduces to intersecting solution sets
of scalar quadratic inequalities, which is exact.  In higher dimension the
sampler restricts to the line through two preimages first (exact), then
falls back to a grid and local search; misses there are only *candidates*.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InputError, InternalContradiction, PreconditionError
from .quad_core import Quadratic1D, QuadraticFunction, restrict_to_line
from .search import _epigraph_solve, grid

MAX_SAMPLER_DIM = 4
INF = math.inf


# scalar quadratic inequalities ------------------------------------------------


def _solve_batch(a, b, c):
    """Solution sets of ``a t^2 + b t + c <= 0`` for arrays of coefficients.

    Returns ``(lo0, hi0, lo1, hi1)``: the set is ``[lo0, hi0] u [lo1, hi1]``
    where an empty piece has ``lo > hi``.
    """
    a, b, c = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, c)))
    shape = a.shape
    lo0 = np.full(shape, INF)
    hi0 = np.full(shape, -INF)
    lo1 = np.full(shape, INF)
    hi1 = np.full(shape, -INF)

    disc = b * b - 4.0 * a * c
    quad = a != 0
    real = quad & (disc >= 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        sq = np.sqrt(np.where(real, disc, 0.0))
        # stable pair: q = -(b + sign(b) sqrt(disc)) / 2, roots q/a and c/q
        qq = -0.5 * (b + np.where(b >= 0, 1.0, -1.0) * sq)
        r_a = qq / a
        r_b = np.where(qq != 0, c / qq, r_a)
    r1 = np.minimum(r_a, r_b)
    r2 = np.maximum(r_a, r_b)

    up = real & (a > 0)
    lo0[up], hi0[up] = r1[up], r2[up]
    down_real = real & (a < 0)
    lo0[down_real], hi0[down_real] = -INF, r1[down_real]
    lo1[down_real], hi1[down_real] = r2[down_real], INF
    down_none = quad & (a < 0) & (disc < 0)
    lo0[down_none], hi0[down_none] = -INF, INF

    lin = ~quad
    with np.errstate(divide="ignore", invalid="ignore"):
        root = -c / b
    pos = lin & (b > 0)
    lo0[pos], hi0[pos] = -INF, root[pos]
    neg = lin & (b < 0)
    lo0[neg], hi0[neg] = root[neg], INF
    const_ok = lin & (b == 0) & (c <= 0)
    lo0[const_ok], hi0[const_ok] = -INF, INF
    return lo0, hi0, lo1, hi1


def solve_quad_inequality_1d(q: Quadratic1D, level: float = 0.0, slack: float = 0.0) -> tuple:
    """Exact solution set of ``q(t) <= level + slack`` as a tuple of closed intervals.

    Each interval is a ``(lo, hi)`` pair with ``+-inf`` for unbounded ends.
    At most two intervals are returned; an empty tuple means no solution.
    """
    pieces = _solve_batch(q.a1, q.a2, q.a3 - level - slack)
    out = []
    for lo, hi in ((pieces[0], pieces[1]), (pieces[2], pieces[3])):
        lo, hi = float(lo), float(hi)
        if lo <= hi:
            out.append((lo, hi))
    return tuple(out)


def _intersect_sets(sets: Sequence[tuple]) -> list:
    current = [(-INF, INF)]
    for s in sets:
        nxt = []
        for lo, hi in current:
            for lo2, hi2 in s:
                a, b = max(lo, lo2), min(hi, hi2)
                if a <= b:
                    nxt.append((a, b))
        current = nxt
        if not current:
            break
    return sorted(current)


def _pick_point(lo, hi):
    """A representative point of ``[lo, hi]`` that avoids infinities."""
    lo_f, hi_f = np.isfinite(lo), np.isfinite(hi)
    with np.errstate(invalid="ignore"):
        return np.where(
            lo_f & hi_f,
            0.5 * (lo + hi),
            np.where(lo_f, lo + 1.0, np.where(hi_f, hi - 1.0, 0.0)),
        )


def _slack(levels, scale=1e-9):
    return scale * (1.0 + np.abs(levels))


class Membership(NamedTuple):
    member: bool
    witness: float | None
    solution_sets: tuple  # per function, tuple of intervals
    separator: tuple | None = None  # (lambda_1, lambda_2, margin) for a nonmember pair

    def __bool__(self) -> bool:
        return self.member


def membership_exact(funcs: Sequence[Quadratic1D], levels, slack_scale: float = 1e-9) -> Membership:
    """Is there ``t`` with ``funcs[j](t) <= levels[j]`` for every ``j``?"""
    levels = np.asarray(levels, dtype=float).reshape(-1)
    if levels.size != len(funcs):
        raise InputError("one level per function")
    sets = tuple(solve_quad_inequality_1d(q, lv) for q, lv in zip(funcs, levels))
    inter = _intersect_sets(sets)
    if not inter:
        # tangencies lost to rounding: retry with a relative slack
        slack = _slack(levels, slack_scale)
        sets = tuple(solve_quad_inequality_1d(q, lv, s) for q, lv, s in zip(funcs, levels, slack))
        inter = _intersect_sets(sets)
    if not inter:
        return Membership(False, None, sets)
    lo, hi = inter[0]
    return Membership(True, float(_pick_point(np.float64(lo), np.float64(hi))), sets)


def _separator(alpha: Quadratic1D, beta: Quadratic1D, t, samples: int = 2001):
    """Search ``s in [0, 1]`` maximizing ``min_x s(alpha - t1) + (1 - s)(beta - t2)``.

    A positive maximum gives multipliers ``(s, 1 - s)`` whose aggregate stays
    strictly above the target everywhere, a separating halfspace for ``V``.
    """

    def h(s):
        s = np.asarray(s, dtype=float)
        A = s * alpha.a1 + (1 - s) * beta.a1
        B = s * alpha.a2 + (1 - s) * beta.a2
        C = s * (alpha.a3 - t[0]) + (1 - s) * (beta.a3 - t[1])
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(A > 0, C - B * B / (4.0 * np.where(A > 0, A, 1.0)), np.where((A == 0) & (B == 0), C, -INF))
        return val

    s = np.linspace(0.0, 1.0, samples)
    vals = h(s)
    k = int(np.argmax(vals))
    lo, hi = s[max(k - 1, 0)], s[min(k + 1, samples - 1)]
    gr = (math.sqrt(5) - 1) / 2
    for _ in range(60):
        m1, m2 = hi - gr * (hi - lo), lo + gr * (hi - lo)
        if h(m1) >= h(m2):
            hi = m2
        else:
            lo = m1
    cands = [(float(vals[k]), float(s[k])), (float(h(0.5 * (lo + hi))), 0.5 * (lo + hi))]
    best, sbest = max(cands)
    if best > 0:
        return (sbest, 1.0 - sbest, best)
    return None


def membership_1d(alpha: Quadratic1D, beta: Quadratic1D, t) -> Membership:
    """Decide ``t in V = {(alpha(x), beta(x))} + R^2_+`` exactly.

    A member comes with a preimage ``x``; a nonmember with the two disjoint
    solution sets and, when found, separating multipliers.
    """
    t = np.asarray(t, dtype=float).reshape(2)
    res = membership_exact([alpha, beta], t)
    if res.member:
        return res
    return res._replace(separator=_separator(alpha, beta, t))


def membership_1d_batch(alpha: Quadratic1D, beta: Quadratic1D, T, tol: float = 1e-9):
    """Vectorized :func:`membership_1d` for targets ``T`` of shape ``(k, 2)``.

    Returns ``(member mask, preimages)``; preimages of nonmembers are 0.
    """
    T = np.asarray(T, dtype=float).reshape(1, -1, 2)
    Qs = np.array([[[alpha.a1]], [[beta.a1]]])
    qs = np.array([[alpha.a2], [beta.a2]])
    cs = np.array([alpha.a3, beta.a3])
    found, pts = _line_stage(Qs, qs, cs, np.zeros((1, 1)), np.ones((1, 1)), T, tol)
    return found[0], pts[0, :, 0]


# classification of V --------------------------------------------------------------


class Shape(str, enum.Enum):
    FULL_PLANE = "FullPlane"
    HALF_PLANE_X = "HalfPlaneProductX"
    HALF_PLANE_Y = "HalfPlaneProductY"
    EPIGRAPH_LIKE = "ClosedConvexEpigraphLike"


@dataclass(frozen=True)
class Region1D:
    """``V`` for a pair of scalar quadratics, tagged by shape.

    ``c1`` / ``c2`` are the thresholds of the half-plane products
    ``[c1, inf) x R`` and ``R x [c2, inf)``.  Membership is always decided
    exactly through :func:`membership_1d`.
    """

    shape: Shape
    alpha: Quadratic1D
    beta: Quadratic1D
    c1: float | None = None
    c2: float | None = None

    def contains(self, t) -> bool:
        t = np.asarray(t, dtype=float).reshape(2)
        if self.shape is Shape.FULL_PLANE:
            return True
        if self.shape is Shape.HALF_PLANE_X:
            return bool(t[0] >= self.c1)
        if self.shape is Shape.HALF_PLANE_Y:
            return bool(t[1] >= self.c2)
        return membership_1d(self.alpha, self.beta, t).member


def _to_minus_inf(q: Quadratic1D):
    """Directions (+1 / -1) along which ``q`` tends to ``-inf``."""
    if q.a1 < 0:
        return {1, -1}
    if q.a1 == 0 and q.a2 != 0:
        return {1} if q.a2 < 0 else {-1}
    return set()


def _is_constant(q: Quadratic1D) -> bool:
    return q.a1 == 0 and q.a2 == 0


def classify_region_1d(alpha: Quadratic1D, beta: Quadratic1D) -> Region1D:
    """Shape of ``V = {(alpha(x), beta(x))} + R^2_+``.

    * both tend to ``-inf`` along a common direction: the whole plane;
    * ``alpha`` constant ``c1`` and ``beta`` unbounded below: ``[c1, inf) x R``;
    * ``beta`` constant ``c2`` and ``alpha`` unbounded below: ``R x [c2, inf)``;
    * otherwise a closed convex set bounded by the curve, decided exactly.
    """
    da, db = _to_minus_inf(alpha), _to_minus_inf(beta)
    if da & db:
        return Region1D(Shape.FULL_PLANE, alpha, beta)
    if _is_constant(alpha) and db:
        return Region1D(Shape.HALF_PLANE_X, alpha, beta, c1=alpha.a3)
    if _is_constant(beta) and da:
        return Region1D(Shape.HALF_PLANE_Y, alpha, beta, c2=beta.a3)
    return Region1D(Shape.EPIGRAPH_LIKE, alpha, beta)


# segment witness ------------------------------------------------------------------


class SegmentWitness(NamedTuple):
    x: np.ndarray
    t: float


def segment_witness(f: QuadraticFunction, g: QuadraticFunction, base, basis, a, b, w, tol: float = 1e-8) -> SegmentWitness:
    """Find ``x = t a + (1 - t) b`` with ``f(x) <= w1`` and ``g(x) <= w2``.

    ``a`` and ``b`` must lie on the affine manifold ``base + span(basis)``.  On
    the line through them the pair restricts to two scalar quadratics whose
    image-plus-orthant is convex, so any target dominating a convex
    combination of the endpoint images is reachable.
    """
    n = f.dim
    base = np.asarray(base, dtype=float).reshape(n)
    basis = np.asarray(basis, dtype=float).reshape(n, -1)
    a = np.asarray(a, dtype=float).reshape(n)
    b = np.asarray(b, dtype=float).reshape(n)
    w = np.asarray(w, dtype=float).reshape(2)
    for name, p in (("a", a), ("b", b)):
        r = p - base
        if basis.shape[1]:
            coef, *_ = np.linalg.lstsq(basis, r, rcond=None)
            r = r - basis @ coef
        if np.abs(r).max() > tol * (1.0 + np.abs(p).max()):
            raise InputError(f"point {name} is not on the affine manifold")
    d = a - b
    fl = restrict_to_line(f, b, d)
    gl = restrict_to_line(g, b, d)
    res = membership_exact([fl, gl], w)
    if not res.member:
        raise InternalContradiction(
            f"no point on the segment reaches target {w.tolist()}: solution sets {res.solution_sets}"
        )
    t = res.witness
    # prefer a point inside [0, 1] when one is available
    for lo, hi in _intersect_sets(res.solution_sets):
        clo, chi = max(lo, 0.0), min(hi, 1.0)
        if clo <= chi:
            t = 0.5 * (clo + chi)
            break
    x = b + t * d
    scale = 1.0 + np.abs(w)
    if f(x) > w[0] + 1e-7 * scale[0] or g(x) > w[1] + 1e-7 * scale[1]:
        raise InternalContradiction("segment witness fails direct evaluation")
    return SegmentWitness(x, float(t))


# sampler ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MembershipOracleConfig:
    grid_points_per_axis: int = 41
    box_radius: float = 5.0
    refine_steps: int = 200
    tolerance: float = 1e-9
    max_grid_points: int = 20_000
    local_starts: int = 2

    def __post_init__(self):
        for name in ("grid_points_per_axis", "box_radius", "refine_steps", "tolerance", "max_grid_points", "local_starts"):
            if not getattr(self, name) > 0:
                raise InputError(f"oracle config field {name} must be positive")

    def scaled(self, k: int) -> "MembershipOracleConfig":
        """Budget multiplied by ``k``: more grid points, iterations and starts, wider box."""
        return replace(
            self,
            max_grid_points=self.max_grid_points * k,
            grid_points_per_axis=self.grid_points_per_axis * k,
            refine_steps=self.refine_steps * k,
            local_starts=self.local_starts * k,
            box_radius=self.box_radius * 2,
        )


@dataclass
class ConvexityViolation:
    u: np.ndarray
    v: np.ndarray
    x_u: np.ndarray
    x_v: np.ndarray
    theta: float
    w: np.ndarray
    status: str  # "certified" | "candidate"
    reason: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "u": self.u.tolist(),
            "v": self.v.tolist(),
            "x_u": self.x_u.tolist(),
            "x_v": self.x_v.tolist(),
            "theta": self.theta,
            "w": self.w.tolist(),
            "status": self.status,
            "reason": self.reason,
        }


@dataclass
class SamplerReport:
    trials: int
    targets: int
    violations: list
    certified: int
    candidates: int
    resolved: dict
    box_radius: float

    @property
    def ok(self) -> bool:
        return self.certified == 0 and self.candidates == 0

    def as_dict(self) -> dict:
        return {
            "trials": self.trials,
            "targets": self.targets,
            "certified": self.certified,
            "candidates": self.candidates,
            "resolved": dict(self.resolved),
            "box_radius": self.box_radius,
            "violations": [v.as_dict() for v in self.violations],
        }


THETAS = np.linspace(0.0, 1.0, 11)


def _stack(funcs):
    return (
        np.array([h.Q for h in funcs]),
        np.array([h.q for h in funcs]),
        np.array([h.c for h in funcs]),
    )


def _image(Qs, qs, cs, X):
    """``F(X)`` for rows of ``X``: shape ``(k, m+1)``."""
    return np.einsum("ki,jil,kl->kj", X, Qs, X) + X @ qs.T + cs


def _line_stage(Qs, qs, cs, base, direction, W, tol):
    """Exact search on the lines ``base + t * direction`` (one line per trial).

    ``W`` has shape ``(T, K, p)``; returns ``(member mask (T, K), points (T, K, n))``.
    """
    T, K, p = W.shape
    A = np.einsum("ti,jil,tl->tj", direction, Qs, direction)  # (T, p)
    B = np.einsum("jil,tl,ti->tj", 2.0 * Qs, base, direction) + direction @ qs.T
    C0 = _image(Qs, qs, cs, base)  # (T, p)
    slack = _slack(W, tol)
    lo0, hi0, lo1, hi1 = _solve_batch(A[:, None, :], B[:, None, :], C0[:, None, :] - W - slack)
    # combine one piece per function: 2^p combinations
    best_lo = np.full((T, K), INF)
    best_hi = np.full((T, K), -INF)
    found = np.zeros((T, K), dtype=bool)
    for combo in range(1 << p):
        lo = np.full((T, K), -INF)
        hi = np.full((T, K), INF)
        for j in range(p):
            if combo >> j & 1:
                lo = np.maximum(lo, lo1[..., j])
                hi = np.minimum(hi, hi1[..., j])
            else:
                lo = np.maximum(lo, lo0[..., j])
                hi = np.minimum(hi, hi0[..., j])
        ok = (lo <= hi) & ~found
        best_lo[ok], best_hi[ok] = lo[ok], hi[ok]
        found |= ok
    t = _pick_point(best_lo, np.where(found, best_hi, 0.0))
    t = np.where(found, t, 0.0)
    pts = base[:, None, :] + t[..., None] * direction[:, None, :]
    return found, pts


def _verify(Qs, qs, cs, X, W, tol):
    """Direct evaluation: ``F(X) <= W`` up to ``tol * (1 + |W|)``."""
    shape = W.shape
    vals = _image(Qs, qs, cs, X.reshape(-1, X.shape[-1])).reshape(shape)
    return np.all(vals <= W + _slack(W, tol) * 10.0, axis=-1)


def _grid_stage(Qs, qs, cs, n, W, cfg: MembershipOracleConfig):
    """Grid search for each target row of ``W`` (shape ``(R, p)``)."""
    r = cfg.box_radius
    G = grid(np.full(n, -r), np.full(n, r), cfg.grid_points_per_axis, cfg.max_grid_points)
    GV = _image(Qs, qs, cs, G)
    R = W.shape[0]
    found = np.zeros(R, dtype=bool)
    best_idx = np.zeros(R, dtype=int)
    chunk = max(1, 4_000_000 // max(1, G.shape[0] * W.shape[1]))
    for s in range(0, R, chunk):
        Wc = W[s : s + chunk]
        excess = (GV[None, :, :] - Wc[:, None, :]).max(axis=2)  # (c, P)
        idx = np.argmin(excess, axis=1)
        best_idx[s : s + chunk] = idx
        found[s : s + chunk] = excess[np.arange(len(Wc)), idx] <= 0.0
    return found, G[best_idx]


def _local_one(args):
    funcs, w, seeds, cfg = args
    best_x, best_v = None, INF
    for x0 in seeds:
        x, v = _epigraph_solve(funcs, w, x0, cfg.refine_steps)
        if v < best_v:
            best_x, best_v = x, v
        if best_v <= 0.0:
            break
    return best_x, best_v


def _search_targets(funcs, W, seeds_line, cfg, rng, threads):
    """Grid then local search; returns ``(found mask, points, best residuals)``."""
    Qs, qs, cs = _stack(funcs)
    n = funcs[0].dim
    found, X = _grid_stage(Qs, qs, cs, n, W, cfg)
    found &= _verify(Qs, qs, cs, X, W, cfg.tolerance)
    resid = np.where(found, 0.0, INF)
    todo = np.flatnonzero(~found)
    if todo.size:
        jobs = []
        for i in todo:
            seeds = [X[i], seeds_line[i]]
            seeds += list(rng.uniform(-cfg.box_radius, cfg.box_radius, size=(max(0, cfg.local_starts - 2), n)))
            jobs.append((funcs, W[i], seeds[: max(cfg.local_starts, 2)], cfg))
        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                outs = list(pool.map(_local_one, jobs))
        else:
            outs = [_local_one(j) for j in jobs]
        for i, (x, v) in zip(todo, outs):
            X[i] = x
            resid[i] = v
            found[i] = bool(_verify(Qs, qs, cs, x[None, :], W[i][None, :], cfg.tolerance)[0])
    return found, X, resid


def sample_U_convexity(
    instance,
    oracle_cfg: MembershipOracleConfig | None = None,
    trials: int = 1000,
    seed: int = 0,
    pairs: Sequence = (),
    threads: int = 1,
    max_stored: int = 20,
) -> SamplerReport:
    """Look for points of ``U`` whose convex combinations leave ``U``.

    Each trial draws two preimages in the sampling box, adds random
    nonnegative shifts to their images, and tests 11 equally spaced convex
    combinations.  ``pairs`` adds explicit preimage pairs (zero shift) tested
    before the random ones.  With ``n = 1`` every verdict is exact and
    violations are ``certified``; otherwise unresolved targets are re-checked
    at four times the budget and survivors are reported as ``candidate``.
    """
    cfg = oracle_cfg or MembershipOracleConfig()
    funcs = [instance.f, *instance.gs]
    n = instance.n
    if n > MAX_SAMPLER_DIM:
        raise PreconditionError(f"sampler supports n <= {MAX_SAMPLER_DIM}, got n = {n}")
    if trials < 0:
        raise InputError("trials must be nonnegative")
    p = len(funcs)
    rng = np.random.default_rng(seed)
    r = cfg.box_radius
    Xu = rng.uniform(-r, r, size=(trials, n))
    Xv = rng.uniform(-r, r, size=(trials, n))
    mask = rng.random((2, trials, p)) < 0.5
    shifts = np.where(mask, 0.0, rng.exponential(1.0, size=(2, trials, p)))
    if len(pairs):
        P = np.asarray(pairs, dtype=float).reshape(-1, 2, n)
        Xu = np.vstack([P[:, 0], Xu])
        Xv = np.vstack([P[:, 1], Xv])
        shifts = np.concatenate([np.zeros((2, P.shape[0], p)), shifts], axis=1)
    T = Xu.shape[0]
    Qs, qs, cs = _stack(funcs)
    U = _image(Qs, qs, cs, Xu) + shifts[0]
    V = _image(Qs, qs, cs, Xv) + shifts[1]
    W = THETAS[None, :, None] * U[:, None, :] + (1 - THETAS)[None, :, None] * V[:, None, :]  # (T, 11, p)
    resolved = {"line": 0, "grid_or_local": 0, "reverified": 0}
    violations: list = []
    certified = candidates = 0
    if T == 0:
        return SamplerReport(0, 0, [], 0, 0, resolved, r)

    if n == 1:
        base = np.zeros((T, 1))
        direction = np.ones((T, 1))
    else:
        base, direction = Xv, Xu - Xv
    found, pts = _line_stage(Qs, qs, cs, base, direction, W, cfg.tolerance)
    if n > 1:
        found &= _verify(Qs, qs, cs, pts, W, cfg.tolerance)
    resolved["line"] = int(found.sum())

    miss = np.argwhere(~found)
    if n == 1:
        for k, j in miss:
            certified += 1
            if len(violations) < max_stored:
                w = W[k, j]
                sets = tuple(solve_quad_inequality_1d(Quadratic1D(*_coeffs_1d(h)), lv, s) for h, lv, s in zip(funcs, w, _slack(w, cfg.tolerance)))
                violations.append(
                    ConvexityViolation(U[k], V[k], Xu[k], Xv[k], float(THETAS[j]), w, "certified",
                                       {"solution_sets": [list(map(list, s)) for s in sets], "intersection": "empty"})
                )
    elif miss.size:
        Wm = W[miss[:, 0], miss[:, 1]]
        seeds = pts[miss[:, 0], miss[:, 1]]
        ok, _, _ = _search_targets(funcs, Wm, seeds, cfg, rng, threads)
        resolved["grid_or_local"] = int(ok.sum())
        still = np.flatnonzero(~ok)
        if still.size:
            ok2, _, resid = _search_targets(funcs, Wm[still], seeds[still], cfg.scaled(4), rng, threads)
            resolved["reverified"] = int(ok2.sum())
            for i, good, res in zip(still, ok2, resid):
                if good:
                    continue
                candidates += 1
                k, j = miss[i]
                if len(violations) < max_stored:
                    violations.append(
                        ConvexityViolation(U[k], V[k], Xu[k], Xv[k], float(THETAS[j]), W[k, j], "candidate",
                                           {"best_max_residual": float(res), "search": "grid + local, budget x4"})
                    )
    return SamplerReport(T, T * len(THETAS), violations, certified, candidates, resolved, r)


def _coeffs_1d(h: QuadraticFunction):
    return float(h.Q[0, 0]), float(h.q[0]), float(h.c)

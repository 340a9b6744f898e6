"""Small log-det barrier solver for ``max t  s.t.  M0 + sum lam_i M_i - t E >= 0, 0 <= lam <= U``.

With ``M_i`` homogenized quadratics and ``E = e_last e_last^T`` the optimum is
the Lagrangian dual value; with ``E = I`` it is the best smallest eigenvalue
of the homogenized aggregate.  Sizes here are a handful of rows, so dense
Newton steps are cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MU_START = 1.0
MU_FACTOR = 0.1
MU_STOP = 1e-11
NEWTON_MAX = 60


@dataclass
class BarrierResult:
    lam: np.ndarray
    t: float
    converged: bool
    centers: list = field(default_factory=list)  # lam at each outer round


def _chol_ok(P):
    try:
        np.linalg.cholesky(P)
        return True
    except np.linalg.LinAlgError:
        return False


def maximize_lmi(M0, Ms, E, lam0, t0, upper: float, stop_t: float | None = None) -> BarrierResult:
    """Path-following barrier method from the strictly feasible point ``(lam0, t0)``."""
    Ms = [np.asarray(M, dtype=float) for M in Ms]
    m = len(Ms)
    lam = np.asarray(lam0, dtype=float).copy()
    t = float(t0)
    mu = MU_START * max(1.0, abs(t0))
    centers = []

    def P_of(lam, t):
        return M0 + np.tensordot(lam, Ms, axes=1) - t * E if m else M0 - t * E

    def phi(lam, t, mu):
        P = P_of(lam, t)
        sign, logdet = np.linalg.slogdet(P)
        if sign <= 0 or np.any(lam <= 0) or np.any(lam >= upper):
            return -np.inf
        return t + mu * (logdet + np.log(lam).sum() + np.log(upper - lam).sum())

    A = Ms + [-E]
    converged = False
    while True:
        for _ in range(NEWTON_MAX):
            P = P_of(lam, t)
            S = np.linalg.inv(P)
            SA = [S @ Ai for Ai in A]
            g = np.array([mu * np.trace(X) for X in SA])
            g[:m] += mu * (1.0 / lam - 1.0 / (upper - lam))
            g[m] += 1.0
            H = -mu * np.array([[np.sum(X * Y.T) for Y in SA] for X in SA])
            H[np.arange(m), np.arange(m)] -= mu * (1.0 / lam**2 + 1.0 / (upper - lam) ** 2)
            try:
                dy = -np.linalg.solve(H, g)
            except np.linalg.LinAlgError:
                dy = g.copy()
            dec = float(g @ dy)
            if dec < 1e-12:
                break
            base = phi(lam, t, mu)
            step = 1.0
            while step > 1e-12:
                nl, nt = lam + step * dy[:m], t + step * dy[m]
                val = phi(nl, nt, mu)
                if val >= base + 0.25 * step * dec and _chol_ok(P_of(nl, nt)):
                    lam, t = nl, nt
                    break
                step *= 0.5
            else:
                break
            if stop_t is not None and t >= stop_t:
                return BarrierResult(lam, t, True, centers + [lam.copy()])
        centers.append(lam.copy())
        if mu < MU_STOP * max(1.0, abs(t)):
            converged = True
            break
        mu *= MU_FACTOR
    return BarrierResult(lam, t, converged, centers)

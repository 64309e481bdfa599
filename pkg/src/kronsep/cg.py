"""Conjugate gradients applied directly to the Kronecker-form system."""
import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericalBreakdown
from .profiling import NULL_TIMER
from .report import SolveReport


@dataclass(frozen=True)
class CgConfig:
    tol: float = 1e-8
    max_iter: int = 10_000
    record_history: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigurationError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ConfigurationError(f"max_iter must be >= 1, got {self.max_iter}")


def solve_cg(op, rhs, cfg=None, *, callback=None, timer=NULL_TIMER):
    """Solve ``op @ mu = rhs`` by unpreconditioned CG from ``mu_0 = 0``.

    Parameters
    ----------
    op : PosteriorOperator
        Any object with ``apply(X, timer)`` on ``(N, m)`` blocks that is SPD.
    rhs : ndarray (N, m)
    cfg : CgConfig, optional
    callback : callable, optional
        Called as ``callback(i, x, r)`` after iteration ``i`` with the
        current iterate and recursively updated residual (do not mutate).

    Returns
    -------
    mu : ndarray (N, m)
    report : SolveReport
        ``converged`` is False when ``max_iter`` ran out; the best iterate is
        still returned.
    """
    cfg = cfg or CgConfig()
    t0 = time.perf_counter()
    b = np.array(rhs, dtype=float)
    if not np.all(np.isfinite(b)):
        raise NumericalBreakdown("right-hand side contains non-finite values", iteration=0)

    x = np.zeros_like(b)
    peak = 4 * b.nbytes
    bnorm = np.linalg.norm(b)
    history = [] if cfg.record_history else None
    if bnorm == 0.0:
        return x, SolveReport("cg", 0, 0.0, time.perf_counter() - t0, peak, True, history)

    r = b.copy()
    p = r.copy()
    rr = np.vdot(r, r)
    converged = False
    it = 0
    while it < cfg.max_iter:
        it += 1
        q = op.apply(p, timer=timer)
        with timer.phase("vector_updates"):
            pq = np.vdot(p, q)
            if not np.isfinite(pq) or pq <= 0.0:
                raise NumericalBreakdown(f"non-positive curvature p^T A p = {pq}", iteration=it)
            alpha = rr / pq
            x += alpha * p
            r -= alpha * q
            rr_new = np.vdot(r, r)
            if not np.isfinite(rr_new):
                raise NumericalBreakdown("residual became non-finite", iteration=it)
            rel = np.sqrt(rr_new) / bnorm
        if history is not None:
            history.append(float(rel))
        if callback is not None:
            callback(it, x, r)
        if rel <= cfg.tol:
            converged = True
            break
        with timer.phase("vector_updates"):
            p *= rr_new / rr
            p += r
            rr = rr_new

    with timer.phase("final_residual"):
        true_res = np.linalg.norm(b - op.apply(x)) / bnorm
    report = SolveReport("cg", it, float(true_res), time.perf_counter() - t0, peak, converged, history,
                         extra={"recursive_rel_residual": float(np.sqrt(rr_new) / bnorm)})
    return x, report

"""Sparse-dense Sylvester baseline: Schur form of the small matrix plus
shifted solves with the large one, one Schur column at a time."""
import time

import numpy as np
import scipy.linalg as sla

from .errors import ConfigurationError, NumericalBreakdown, OutOfMemoryError, SingularPencilError
from .grid import assemble_D
from .profiling import NULL_TIMER
from .report import SolveReport

MAX_ASSEMBLED_LEVEL = 6


def assembled_memory_estimate(grid):
    """Bytes needed to hold ``H`` in CSR form plus a banded LU factor of ``H + sI``.

    Row-major ordering gives ``D^2`` a half bandwidth of ``2 * side``, so the
    factor stores at most ``N (2 * side + 1)`` entries in each of ``L`` and
    ``U``. Entries cost 8 bytes of value and 4 of index.
    """
    npix, side = grid.npix, grid.side
    nnz_h = 13 * npix  # 13-point stencil of D^2, an upper bound at the boundary
    csr = 12 * nnz_h + 4 * (npix + 1)
    factor = 2 * 12 * npix * (2 * side + 1)
    return csr + factor


def _shifted_cg(problem, shift, f, tol, max_iter, timer):
    """CG for ``(H + shift I) x = f`` in the ``Nhits``-weighted inner product."""
    w = problem.N_weights
    x = np.zeros_like(f)
    r = f.copy()
    p = r.copy()
    rr = np.dot(w * r, r)
    fnorm = np.sqrt(rr)
    if fnorm == 0.0:
        return x, 0
    for it in range(1, max_iter + 1):
        q = problem.apply_H(p[:, None], timer)[:, 0]
        with timer.phase("shifted_solve"):
            q += shift * p
            pq = np.dot(w * p, q)
            if not np.isfinite(pq) or pq <= 0.0:
                raise NumericalBreakdown(f"shifted operator lost definiteness (p^T A p = {pq})", it)
            alpha = rr / pq
            x += alpha * p
            r -= alpha * q
            rr_new = np.dot(w * r, r)
            if np.sqrt(rr_new) <= tol * fnorm:
                return x, it
            p *= rr_new / rr
            p += r
            rr = rr_new
    return x, max_iter


def solve_sparse_dense(problem, shifted_solver_tol=1e-12, *, assembled=False, mem_budget=None,
                       max_inner_iter=10_000, timer=NULL_TIMER):
    """Solve ``H M + M S_hat = Y_hat`` by real Schur back-substitution.

    With ``S_hat = W R W^T`` and ``F_hat = Y_hat W``, solves for each Schur
    column ``i`` the shifted system
    ``(H + R_ii I) X_i = F_hat_i - sum_{k<i} X_k R_ki`` and returns
    ``X W^T``.

    Parameters
    ----------
    problem : SylvesterProblem
    shifted_solver_tol : float
        Relative tolerance of the matrix-free shifted CG solves.
    assembled : bool
        Assemble ``H`` as a sparse matrix and factor each shifted system
        directly (``level <= 6``), subject to ``mem_budget``.
    mem_budget : int, optional
        Bytes available to the assembled path. Implies ``assembled=True``.

    Raises
    ------
    OutOfMemoryError
        When the assembled path would exceed ``mem_budget``.
    SingularPencilError
        When a shifted system is singular.
    """
    t0 = time.perf_counter()
    grid = problem.grid
    Yhat = problem.Yhat
    npix, m = Yhat.shape
    assembled = assembled or mem_budget is not None
    extra = {"assembled": assembled}

    if assembled:
        need = assembled_memory_estimate(grid)
        extra["assembled_bytes"] = need
        if mem_budget is not None and need > mem_budget:
            raise OutOfMemoryError(
                f"assembling H at level {grid.level} needs ~{need} bytes, budget is {mem_budget}",
                required_bytes=need, budget_bytes=mem_budget)
        if grid.level > MAX_ASSEMBLED_LEVEL:
            raise ConfigurationError(f"assembled path supports level <= {MAX_ASSEMBLED_LEVEL}")

    yn = np.linalg.norm(Yhat)
    peak = 3 * Yhat.nbytes + (extra.get("assembled_bytes", 0))
    if yn == 0.0:
        return np.zeros_like(Yhat), SolveReport("sparse-dense", 0, 0.0, time.perf_counter() - t0,
                                                peak, True, None, extra)

    with timer.phase("small_dense"):
        R, W = sla.schur(problem.Shat, output="real")
        subdiag = np.max(np.abs(np.tril(R, -1))) if m > 1 else 0.0
        if subdiag > 1e-10 * np.max(np.abs(R)):
            raise ConfigurationError("small matrix has complex eigenvalues; real Schur form is not triangular")
        shifts = np.diag(R).copy()
        scale = np.max(np.abs(shifts))
        Fhat = Yhat @ W

    if assembled:
        import scipy.sparse as sp
        from scipy.sparse.linalg import splu

        with timer.phase("assemble"):
            D = assemble_D(grid)
            H = sp.diags(1.0 / problem.N_weights) @ (D @ D)
            eye = sp.identity(npix, format="csr")

    Xhat = np.zeros_like(Fhat)
    inner = 0
    for i in range(m):
        if abs(shifts[i]) < 1e-14 * max(scale, 1.0):
            raise SingularPencilError(f"shift R[{i},{i}] = {shifts[i]} makes H + sI singular")
        with timer.phase("shifted_solve"):
            rhs = Fhat[:, i] - Xhat[:, :i] @ R[:i, i]
        if assembled:
            with timer.phase("shifted_solve"):
                lu = splu((H + shifts[i] * eye).tocsc(), permc_spec="NATURAL")
                Xhat[:, i] = lu.solve(rhs)
            inner += 1
        else:
            Xhat[:, i], its = _shifted_cg(problem, shifts[i], rhs, shifted_solver_tol,
                                          max_inner_iter, timer)
            inner += its
    with timer.phase("small_dense"):
        M = Xhat @ W.T

    with timer.phase("final_residual"):
        res = np.linalg.norm(problem.residual(M)) / yn
    extra["schur_subdiag"] = float(subdiag)
    return M, SolveReport("sparse-dense", inner, float(res), time.perf_counter() - t0, peak,
                          True, None, extra)

"""Block Lanczos projection solver for the reshaped Sylvester equation.

Dividing the reshaped system on the left by ``diag(Nhits)`` and on the right
by ``diag(P)`` gives

    H M + M S = Y_hat,   H = Nhits^-1 D^2,   S = A^T T A P^-1,
                         Y_hat = Y T A P^-1.

``H`` is self-adjoint in the ``Nhits``-weighted inner product and ``S`` in
the ``P^-1``-weighted one, so a symmetric block Lanczos process in the
weighted inner product builds an orthonormal basis of the block Krylov space
``K_j(H, Y_hat)``. The projected equation ``T_j Z + Z S = E_1 B_0`` is
diagonalized by the eigendecompositions of ``T_j`` and ``S``. Only two basis
blocks are kept: the residual norm is monitored from small matrices, and
the solution is assembled by re-running the recurrence with the stored
coefficients.
"""
import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import NumericalBreakdown, ShapeError, SingularPencilError
from .grid import apply_D
from .profiling import NULL_TIMER
from .report import SolveReport

REORTH_THRESHOLD = 1e-8
# ||W||_N below this fraction of ||H V_i||_N means the Krylov space is
# invariant (the new block carries no information).
INVARIANT_TOL = 1e-12
# Smallest admissible R_kk / ||W||_N in the weighted QR. Cholesky of the Gram
# matrix cannot resolve pivots much below sqrt(eps), so this sits above it.
RANK_TOL = 1e-7


@dataclass(frozen=True)
class SylvesterProblem:
    """``H M + M S_hat = Y_hat`` for one face.

    Build with :func:`sylvester_problem` (from maps) or
    :func:`sylvester_problem_from_rhs` (from the Kronecker right-hand side).
    """

    grid: object
    model: object
    Yhat: np.ndarray
    Shat: np.ndarray

    @property
    def N_weights(self):
        return self.model.Nhits

    @property
    def Ninv_weights(self):
        return 1.0 / self.model.Nhits

    @cached_property
    def weights(self):
        """Hit counts for the weighted inner product, or None when all are one."""
        Nw = self.model.Nhits
        return None if np.all(Nw == 1.0) else Nw

    def apply_H(self, X, timer=NULL_TIMER):
        with timer.phase("apply_D"):
            out = apply_D(self.grid, apply_D(self.grid, X))
            if self.weights is not None:
                out /= self.weights[:, None]
        return out

    def residual(self, M, timer=NULL_TIMER):
        """Explicit ``H M + M S_hat - Y_hat``."""
        R = self.apply_H(M, timer)
        R += M @ self.Shat
        R -= self.Yhat
        return R


def _small_matrix(model):
    AtTA = model.A.T @ (model.T[:, None] * model.A)
    return AtTA / model.P[None, :]


def sylvester_problem(grid, model, Y):
    """Sylvester form from the ``(N, n)`` observed maps ``Y``."""
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (grid.npix, model.n):
        raise ShapeError(f"Y must have shape {(grid.npix, model.n)}, got {Y.shape}")
    if model.npix != grid.npix:
        raise ShapeError("model and grid disagree on the number of pixels")
    Yhat = ((Y * model.T[None, :]) @ model.A) / model.P[None, :]
    return SylvesterProblem(grid, model, Yhat, _small_matrix(model))


def sylvester_problem_from_rhs(grid, model, rhs):
    """Sylvester form from the reshaped Kronecker right-hand side ``B^T C y``."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (grid.npix, model.m):
        raise ShapeError(f"rhs must have shape {(grid.npix, model.m)}, got {rhs.shape}")
    Yhat = rhs / model.Nhits[:, None] / model.P[None, :]
    return SylvesterProblem(grid, model, Yhat, _small_matrix(model))


# --------------------------------------------------------------------------
# weighted QR
# --------------------------------------------------------------------------

def weighted_gram(X, weights, Y=None):
    """``X^T diag(weights) Y`` (``Y`` defaults to ``X``; ``weights=None`` is unit)."""
    Y = X if Y is None else Y
    if weights is None:
        return X.T @ Y
    return X.T @ (weights[:, None] * Y)


def _cholesky_upper(G, iteration):
    try:
        return np.linalg.cholesky(G).T
    except np.linalg.LinAlgError:
        raise NumericalBreakdown("weighted Gram matrix is not positive definite", iteration) from None


def _right_solve_upper(W, R):
    # W R^-1 through the small triangular inverse: one pass over the tall block
    Rinv = sla.solve_triangular(R, np.eye(R.shape[0]), lower=False, check_finite=False)
    return W @ Rinv


def weighted_block_qr(W, weights, iteration=None, gram=None):
    """Factor ``W = V R`` with ``V^T diag(weights) V = I``.

    Cholesky QR on the small Gram matrix (``gram`` may be passed in when the
    caller already has it). A second Cholesky pass runs when ``R`` is
    ill-conditioned enough for the first pass to lose orthogonality. ``R`` is
    upper triangular with positive diagonal. ``weights=None`` means unit
    weights.

    Raises
    ------
    NumericalBreakdown
        When ``W`` is numerically rank deficient.
    """
    W = np.asarray(W, dtype=float)
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
    if W.ndim != 2 or (weights is not None and W.shape[0] != weights.shape[0]):
        raise ShapeError(f"W of shape {W.shape} does not match the weights")
    G = weighted_gram(W, weights) if gram is None else gram
    if not np.all(np.isfinite(G)):
        raise NumericalBreakdown("block contains non-finite values", iteration)
    scale = np.sqrt(np.trace(G))
    if scale == 0.0:
        raise NumericalBreakdown("block is identically zero", iteration)

    R = _cholesky_upper(G, iteration)
    if np.min(np.abs(np.diag(R))) <= RANK_TOL * scale:
        raise NumericalBreakdown("block is numerically rank deficient", iteration)
    V = _right_solve_upper(W, R)
    # Cholesky QR loses orthogonality like eps * cond(R)^2
    if np.linalg.cond(R) > 1e2:
        R2 = _cholesky_upper(weighted_gram(V, weights), iteration)
        V = _right_solve_upper(V, R2)
        R = R2 @ R
    return V, R


# --------------------------------------------------------------------------
# Lanczos process
# --------------------------------------------------------------------------

@dataclass
class LanczosState:
    """Two resident basis blocks plus the block-tridiagonal coefficients.

    ``H_blocks[i-1]`` is ``H_i`` and ``B_blocks[i]`` is ``B_i`` for
    ``i = 0 .. iteration+1`` (``B_1`` is unused and stored as ``None``).
    ``corrections[i-1]`` is the reorthogonalization coefficient applied
    against ``V_{i-1}`` at step ``i`` (``None`` when no pass was needed);
    the second pass replays it.
    """

    V_cur: np.ndarray
    V_old: np.ndarray
    B_blocks: list
    H_blocks: list = field(default_factory=list)
    corrections: list = field(default_factory=list)
    iteration: int = 0
    invariant: bool = False
    basis: list = None

    @property
    def B0(self):
        return self.B_blocks[0]

    @property
    def m(self):
        return self.B_blocks[0].shape[0]

    def T(self, j=None):
        """Assemble the symmetric ``jm x jm`` matrix ``T_j``."""
        j = self.iteration if j is None else j
        m = self.m
        T = np.zeros((j * m, j * m))
        for i in range(j):
            H = self.H_blocks[i]
            T[i * m:(i + 1) * m, i * m:(i + 1) * m] = 0.5 * (H + H.T)
            if i + 1 < j:
                B = self.B_blocks[i + 2]
                T[(i + 1) * m:(i + 2) * m, i * m:(i + 1) * m] = B
                T[i * m:(i + 1) * m, (i + 1) * m:(i + 2) * m] = B.T
        return T

    def T_under(self, j=None):
        """The ``(j+1)m x jm`` matrix with ``B_{j+1}`` appended below ``T_j``."""
        j = self.iteration if j is None else j
        m = self.m
        out = np.zeros(((j + 1) * m, j * m))
        out[:j * m] = self.T(j)
        out[j * m:, (j - 1) * m:] = self.B_blocks[j + 1]
        return out


def lanczos_start(problem, keep_basis=False):
    """Weighted QR of the starting block ``Y_hat = V_1 B_0``."""
    V, B0 = weighted_block_qr(problem.Yhat, problem.weights, iteration=0)
    state = LanczosState(V_cur=V, V_old=None, B_blocks=[B0, None])
    if keep_basis:
        state.basis = [V]
    return state


def lanczos_step(problem, state, timer=NULL_TIMER):
    """Advance the block Lanczos recurrence by one step (in place).

    Produces ``V_{i+1}``, ``H_i`` and ``B_{i+1}`` with
    ``V_{i+1} B_{i+1} = H V_i - V_i H_i - V_{i-1} B_i^T``. When the new
    block vanishes the state is marked ``invariant`` and ``B_{i+1} = 0``.
    """
    w = problem.weights
    i = state.iteration + 1
    V = state.V_cur
    W = problem.apply_H(V, timer)
    with timer.phase("orthogonalization"):
        Bi = state.B_blocks[i] if i > 1 else None
        if Bi is not None:
            W -= state.V_old @ Bi.T
        Hi = weighted_gram(V, w, W)
        W -= V @ Hi
        C1 = weighted_gram(V, w, W)
        G = weighted_gram(W, w)
        # ||H V_i||_N^2 splits over the orthogonal pieces V_{i-1}, V_i and W
        hv2 = np.sum(Hi * Hi) + (0.0 if Bi is None else np.sum(Bi * Bi))
        w2 = np.trace(G)
        correction = None
        if w2 > INVARIANT_TOL ** 2 * (hv2 + w2) and np.max(np.abs(C1)) > REORTH_THRESHOLD * np.sqrt(w2):
            W -= V @ C1
            Hi = Hi + C1
            if i > 1:
                correction = weighted_gram(state.V_old, w, W)
                W -= state.V_old @ correction
            G = weighted_gram(W, w)
            w2 = np.trace(G)
        invariant = bool(w2 <= INVARIANT_TOL ** 2 * (hv2 + w2))
        if invariant:
            Vnew, Bnew = np.zeros_like(V), np.zeros((V.shape[1], V.shape[1]))
        else:
            Vnew, Bnew = weighted_block_qr(W, w, iteration=i, gram=G)
    state.H_blocks.append(Hi)
    state.corrections.append(correction)
    state.B_blocks.append(Bnew)
    state.V_old, state.V_cur = V, Vnew
    state.iteration = i
    state.invariant = invariant
    if state.basis is not None and not invariant:
        state.basis.append(Vnew)
    return state


# --------------------------------------------------------------------------
# small dense work
# --------------------------------------------------------------------------

def small_eig(Shat, P):
    """Eigendecomposition ``S_hat = U diag(rho) U^T P^-1`` with ``U^T P^-1 U = I``.

    Symmetrizes with ``L = diag(P)^-1/2`` so that ``L S_hat L^-1`` is
    symmetric, then maps the eigenvectors back with ``U = L^-1 X``.
    """
    P = np.asarray(P, dtype=float)
    sq = np.sqrt(P)
    sym = Shat * sq[None, :] / sq[:, None]
    sym = 0.5 * (sym + sym.T)
    rho, X = np.linalg.eigh(sym)
    return rho, sq[:, None] * X


def _coefficients(phi, Q, rho, U, B0, m):
    """Diagonal-basis coefficients ``F`` with ``F_kl = (Q^T E_1 B_0 U)_kl / (phi_k + rho_l)``."""
    denom = phi[:, None] + rho[None, :]
    scale = max(np.max(np.abs(phi)), np.max(np.abs(rho)))
    if np.any(np.abs(denom) < 1e-14 * scale):
        raise SingularPencilError("phi_i + rho_j vanishes: projected Sylvester pencil is singular")
    rhs = Q[:m, :].T @ (B0 @ U)
    return rhs / denom


def solve_projected(T, Shat, B0, P):
    """Solve ``T Z + Z S_hat = E_1 B_0`` for ``Z`` (``jm x m``).

    ``T`` is symmetric; ``S_hat`` is self-adjoint in the ``P^-1`` inner
    product. Returns ``Z = Q F U^T P^-1``.
    """
    T = np.atleast_2d(np.asarray(T, dtype=float))
    Shat = np.atleast_2d(np.asarray(Shat, dtype=float))
    B0 = np.atleast_2d(np.asarray(B0, dtype=float))
    P = np.atleast_1d(np.asarray(P, dtype=float))
    m = Shat.shape[0]
    phi, Q = np.linalg.eigh(T)
    rho, U = small_eig(Shat, P)
    F = _coefficients(phi, Q, rho, U, B0, m)
    return Q @ F @ (U.T / P[None, :])


def residual_estimate(state, phi, Q, rho, U):
    """Squared residual norm ``gamma`` of the current projected solution.

    Accumulates ``||(e_j^T S) K_j^-1 J||^2`` over the columns of the small
    eigenbasis, with ``S = (Q^T E_1 B_0 U)^T``, ``J = (E_m^T Q)^T B_{i+1}^T``
    and ``K_j = rho_j I + Phi``. ``sqrt(gamma)`` equals the norm of the
    Sylvester residual weighted by ``Nhits`` on rows and ``P`` on columns,
    i.e. ``sqrt(trace(R^T N R P))``.
    """
    m = state.m
    S = (U.T @ state.B0.T) @ Q[:m, :]
    J = Q[-m:, :].T @ state.B_blocks[state.iteration + 1].T
    gamma = 0.0
    for j in range(m):
        row = (S[j] / (rho[j] + phi)) @ J
        gamma += float(row @ row)
    return gamma


# --------------------------------------------------------------------------
# driver
# --------------------------------------------------------------------------

def weighted_norm(R, Nw=None, P=None):
    """``sqrt(trace(R^T diag(Nw) R diag(P)))`` (unit weights when ``None``)."""
    if Nw is None:
        col = np.einsum("ij,ij->j", R, R)
    else:
        col = np.einsum("i,ij,ij->j", Nw, R, R)
    if P is not None:
        col = col * P
    return float(np.sqrt(np.sum(col)))


def solve_sylvester(problem, tol=1e-8, max_iter=None, *, keep_basis=False, callback=None,
                    timer=NULL_TIMER):
    """Two-pass block Lanczos solve of ``H M + M S_hat = Y_hat``.

    Parameters
    ----------
    problem : SylvesterProblem
    tol : float
        Stop when ``sqrt(gamma) <= tol * ||B_0 U||_F``; for ``P = I`` this is
        ``||B_0||_F``.
    max_iter : int, optional
        Defaults to ``ceil(N / m)``.
    keep_basis : bool
        Retain every basis block in ``report.extra["state"].basis`` (test
        mode; breaks the two-block memory contract).
    callback : callable, optional
        ``callback(i, state, phi, Q, rho, U, gamma)`` after each step.

    Returns
    -------
    M : ndarray (N, m)
    report : SolveReport
        ``rel_residual`` is the explicit Frobenius residual relative to
        ``||Y_hat||_F``; ``extra`` adds the weighted variants and the final
        estimate.
    """
    t0 = time.perf_counter()
    Yhat = problem.Yhat
    npix, m = Yhat.shape
    P = problem.model.P
    w = problem.weights
    block_bytes = Yhat.nbytes
    max_iter = int(np.ceil(npix / m)) if max_iter is None else int(max_iter)
    with timer.phase("bookkeeping"):
        yn = weighted_norm(Yhat)
    if yn == 0.0:
        return np.zeros_like(Yhat), SolveReport("lanczos-sylvester", 0, 0.0, time.perf_counter() - t0,
                                                3 * block_bytes, True, [])

    with timer.phase("small_dense"):
        rho, U = small_eig(problem.Shat, P)
    with timer.phase("orthogonalization"):
        state = lanczos_start(problem, keep_basis=keep_basis)
    with timer.phase("small_dense"):
        ref = np.linalg.norm(state.B0 @ U)

    history = []
    converged = False
    while state.iteration < max_iter:
        lanczos_step(problem, state, timer)
        with timer.phase("small_dense"):
            phi, Q = np.linalg.eigh(state.T())
            gamma = residual_estimate(state, phi, Q, rho, U)
            est = np.sqrt(gamma) / ref
        history.append(float(est))
        if callback is not None:
            callback(state.iteration, state, phi, Q, rho, U, gamma)
        if est <= tol or state.invariant:
            converged = True
            break

    with timer.phase("small_dense"):
        F = _coefficients(phi, Q, rho, U, state.B0, m)
        Z = Q @ F @ (U.T / P[None, :])
    M = assemble_solution(problem, state, Z, timer)

    with timer.phase("final_residual"):
        R = problem.residual(M, timer)
    with timer.phase("bookkeeping"):
        extra = {
            "estimated_rel_residual": history[-1],
            "rel_residual_N": weighted_norm(R, w) / weighted_norm(Yhat, w),
            "rel_residual_NP": weighted_norm(R, w, P) / ref,
            "peak_resident_blocks": 4,
            "invariant_subspace": state.invariant,
        }
        rel = weighted_norm(R) / yn
    if keep_basis:
        extra["state"] = state
        extra["Z"] = Z
    report = SolveReport("lanczos-sylvester", state.iteration, rel, time.perf_counter() - t0,
                         4 * block_bytes, converged, history, extra)
    return M, report


def assemble_solution(problem, state, Z, timer=NULL_TIMER):
    """Second pass: regenerate ``V_1 .. V_j`` from the stored coefficients.

    ``M = sum_i V_i G_i`` with ``G_i`` the ``i``-th ``m x m`` block of ``Z``;
    the first block is recovered as ``Y_hat B_0^-1``.
    """
    m = state.m
    j = state.iteration
    with timer.phase("assembly"):
        V = _right_solve_upper(problem.Yhat, state.B0)
        V_old = None
        M = V @ Z[:m]
    for i in range(1, j):
        W = problem.apply_H(V, timer)
        with timer.phase("assembly"):
            if i > 1:
                W -= V_old @ state.B_blocks[i].T
            W -= V @ state.H_blocks[i - 1]
            if state.corrections[i - 1] is not None:
                W -= V_old @ state.corrections[i - 1]
            V_old = V
            V = _right_solve_upper(W, state.B_blocks[i + 1])
            M += V @ Z[i * m:(i + 1) * m]
    return M

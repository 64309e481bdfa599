"""Matrix-free Kronecker matvecs for the posterior precision.

A length ``N*k`` vector and its ``(N, k)`` reshape hold the same numbers: the
vector stacks the columns of the block. Every operator here accepts either
form and returns the same form it was given, so no ``mN x mN`` matrix is
ever built.
"""
import numpy as np

from .errors import ShapeError
from .grid import apply_D
from .profiling import NULL_TIMER


def reshape(u, rows, cols):
    """Arrange every ``rows`` consecutive entries of ``u`` as a column."""
    u = np.asarray(u)
    if u.size != rows * cols:
        raise ShapeError(f"cannot reshape {u.size} entries into ({rows}, {cols})")
    return u.reshape((rows, cols), order="F")


def vectorize(U):
    """Stack the columns of ``U`` (inverse of :func:`reshape`)."""
    return np.asarray(U).reshape(-1, order="F")


def _block(X, npix, cols):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        return reshape(X, npix, cols), True
    if X.shape != (npix, cols):
        raise ShapeError(f"expected block of shape {(npix, cols)}, got {X.shape}")
    return X, False


def _check(model, grid):
    if model.npix != grid.npix:
        raise ShapeError(f"model has {model.npix} pixels but grid has {grid.npix}")


def apply_Q(model, grid, U):
    """Prior precision ``(P kron D^2) vec(U)`` computed as ``D^2 U P``."""
    _check(model, grid)
    U, flat = _block(U, grid.npix, model.m)
    out = apply_D(grid, apply_D(grid, U)) * model.P[None, :]
    return vectorize(out) if flat else out


def apply_BtCB(model, grid, X):
    """Data precision ``B^T C B vec(X)``.

    Follows the reshaped sequence ``X A^T``, scale rows by ``Nhits`` and
    columns by ``T``, then right-multiply by ``A``; cost ``O(N n m)``.
    """
    _check(model, grid)
    X, flat = _block(X, grid.npix, model.m)
    Z = X @ model.A.T
    Z *= model.Nhits[:, None]
    Z *= model.T[None, :]
    out = Z @ model.A
    return vectorize(out) if flat else out


class PosteriorOperator:
    """The SPD map ``x -> (Q + B^T C B) x`` on ``(N, m)`` blocks.

    Parameters
    ----------
    grid : SkyGrid
    model : ModelSpec
    """

    def __init__(self, grid, model):
        _check(model, grid)
        self.grid = grid
        self.model = model
        # Nhits acts on rows and A, T on columns, so the column part of
        # B^T C B collapses to the m x m product A^T T A.
        self._AtTA = model.A.T @ (model.T[:, None] * model.A)

    @property
    def shape(self):
        n = self.grid.npix * self.model.m
        return (n, n)

    def apply(self, X, timer=NULL_TIMER):
        X, flat = _block(X, self.grid.npix, self.model.m)
        with timer.phase("apply_D"):
            out = apply_D(self.grid, apply_D(self.grid, X))
        with timer.phase("mixing"):
            out *= self.model.P[None, :]
            out += self.model.Nhits[:, None] * (X @ self._AtTA)
        return vectorize(out) if flat else out

    def __matmul__(self, X):
        return self.apply(X)

    def as_linear_operator(self):
        """Wrap as a :class:`scipy.sparse.linalg.LinearOperator` on flat vectors."""
        from scipy.sparse.linalg import LinearOperator

        return LinearOperator(self.shape, matvec=lambda v: self.apply(np.ravel(v)), dtype=float)


def apply_posterior(op, X):
    """``(Q + B^T C B) X`` via the component matvecs."""
    return op.apply(X)

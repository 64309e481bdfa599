"""Dense ground truth for small faces: explicit Kronecker assembly of the
posterior precision and a direct Cholesky solve."""
import numpy as np
import scipy.linalg as sla

from .errors import ConfigurationError, SizeGuardError
from .grid import assemble_D
from .model import build_rhs

MAX_DENSE_DIM = 8192


def dense_D(grid):
    return assemble_D(grid).toarray()


def dense_Q(grid, model):
    """``P kron D^2``."""
    D = dense_D(grid)
    return np.kron(np.diag(model.P), D @ D)


def dense_BtCB(grid, model):
    """``(A kron I)^T (T kron Nhits) (A kron I)``."""
    B = np.kron(model.A, np.eye(grid.npix))
    c = np.kron(model.T, model.Nhits)
    return B.T @ (c[:, None] * B)


def assemble_dense(grid, model):
    """Explicit posterior precision and a right-hand-side builder.

    Returns
    -------
    Qhat : ndarray (mN, mN)
    rhs_builder : callable
        Maps the ``(N, n)`` maps ``Y`` to the flat vector ``B^T C vec(Y)``.

    Raises
    ------
    SizeGuardError
        When ``m * N`` exceeds the dense size guard.
    """
    dim = model.m * grid.npix
    if dim > MAX_DENSE_DIM:
        raise SizeGuardError(f"dense assembly refused: m*N = {dim} > {MAX_DENSE_DIM}")
    if model.npix != grid.npix:
        raise ConfigurationError("model and grid disagree on the number of pixels")
    Qhat = dense_BtCB(grid, model) + dense_Q(grid, model)
    Qhat = 0.5 * (Qhat + Qhat.T)

    def rhs_builder(Y):
        return build_rhs(model, Y).reshape(-1, order="F")

    return Qhat, rhs_builder


def solve_dense(Qhat, rhs):
    """Cholesky solve of ``Qhat x = rhs``.

    Raises ``numpy.linalg.LinAlgError`` when ``Qhat`` is not positive
    definite, which means the model invariants were violated.
    """
    c, low = sla.cho_factor(Qhat)
    return sla.cho_solve((c, low), rhs)

"""Single HEALPix base face as a square four-neighbour grid.

Pixels are numbered row-major over the ``2**level x 2**level`` face, so the
edge neighbours of pixel ``j`` are ``j +- 1`` and ``j +- side`` (clipped at
the face boundary).
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ShapeError

MAX_LEVEL = 12


@dataclass(frozen=True)
class SkyGrid:
    """Pixel topology of one base face at refinement ``level``.

    Attributes
    ----------
    level : int
        HEALPix refinement level ``h``.
    side : int
        Number of pixels along one face edge, ``2**h``.
    npix : int
        Number of pixels ``N = 4**h``.
    neighbor_counts : ndarray of int
        Row sums of the off-diagonal part of ``D`` (2, 3 or 4 per pixel,
        0 when the face is a single pixel).
    """

    level: int
    side: int = field(init=False)
    npix: int = field(init=False)
    neighbor_counts: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        level = self.level
        if isinstance(level, bool) or not isinstance(level, (int, np.integer)):
            raise ConfigurationError(f"level must be an integer, got {level!r}")
        if not 0 <= level <= MAX_LEVEL:
            raise ConfigurationError(f"level must be in [0, {MAX_LEVEL}], got {level}")
        side = 1 << int(level)
        object.__setattr__(self, "level", int(level))
        object.__setattr__(self, "side", side)
        object.__setattr__(self, "npix", side * side)

        counts = np.full((side, side), 4, dtype=np.int64)
        counts[0, :] -= 1
        counts[-1, :] -= 1
        counts[:, 0] -= 1
        counts[:, -1] -= 1
        if side == 1:
            counts[:] = 0
        counts = counts.ravel()
        counts.setflags(write=False)
        object.__setattr__(self, "neighbor_counts", counts)


def new_grid(level):
    """Return the :class:`SkyGrid` for one base face at ``level``."""
    return SkyGrid(level)


def neighbors(grid, j):
    """Edge-sharing neighbours of pixel ``j`` within the face, ascending."""
    if isinstance(j, bool) or not isinstance(j, (int, np.integer)):
        raise TypeError(f"pixel index must be an integer, got {j!r}")
    if not 0 <= j < grid.npix:
        raise IndexError(f"pixel index {j} out of range for N={grid.npix}")
    side = grid.side
    row, col = divmod(int(j), side)
    out = []
    if row > 0:
        out.append(j - side)
    if col > 0:
        out.append(j - 1)
    if col < side - 1:
        out.append(j + 1)
    if row < side - 1:
        out.append(j + side)
    return out


def _as_block(grid, v):
    v = np.asarray(v, dtype=np.float64)
    vector = v.ndim == 1
    if vector:
        v = v[:, None]
    if v.ndim != 2 or v.shape[0] != grid.npix:
        raise ShapeError(f"expected {grid.npix} rows, got array of shape {v.shape}")
    return v, vector


def _neg_counts(grid, k):
    # -neighbor_counts laid out as (side, side * k), cached per column count
    cache = grid.__dict__.setdefault("_neg_counts_cache", {})
    arr = cache.get(k)
    if arr is None:
        arr = np.repeat(-grid.neighbor_counts.astype(np.float64), k).reshape(grid.side, grid.side * k)
        arr.setflags(write=False)
        cache[k] = arr
    return arr


def apply_D(grid, v):
    """Apply the neighbour operator ``D`` to each column of ``v``.

    ``out[j] = sum(v[nbrs(j)]) - len(nbrs(j)) * v[j]``. Accepts a length-N
    vector or an ``(N, k)`` block; the output has the same shape.
    """
    v, vector = _as_block(grid, v)
    side = grid.side
    k = v.shape[1]
    # row-major pixels with k columns interleaved: vertical neighbours are
    # one face row apart, horizontal neighbours k entries apart
    g = v.reshape(side, side * k)
    out = g * _neg_counts(grid, k)
    out[1:] += g[:-1]
    out[:-1] += g[1:]
    out[:, k:] += g[:, :-k]
    out[:, :-k] += g[:, k:]
    out = out.reshape(grid.npix, k)
    return out[:, 0] if vector else out


def apply_D_squared(grid, v):
    """Apply ``D @ D`` (the unit-scale prior precision block) to ``v``."""
    return apply_D(grid, apply_D(grid, v))


def assemble_D(grid):
    """Sparse CSR assembly of ``D``; used by the assembled baseline and tests."""
    import scipy.sparse as sp

    side, npix = grid.side, grid.npix
    idx = np.arange(npix).reshape(side, side)
    rows = [idx[:, :-1].ravel(), idx[:, 1:].ravel(), idx[:-1, :].ravel(), idx[1:, :].ravel()]
    cols = [idx[:, 1:].ravel(), idx[:, :-1].ravel(), idx[1:, :].ravel(), idx[:-1, :].ravel()]
    r = np.concatenate(rows + [np.arange(npix)])
    c = np.concatenate(cols + [np.arange(npix)])
    vals = np.concatenate([np.ones(sum(len(x) for x in rows)), -grid.neighbor_counts.astype(float)])
    return sp.csr_matrix((vals, (r, c)), shape=(npix, npix))

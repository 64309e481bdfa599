"""Simulated data and the on-disk formats for map stacks and solve reports.

Random streams
--------------
Each column (``m`` source columns, then ``n`` noise columns) draws from its
own ``numpy.random.PCG64`` stream spawned from ``SeedSequence(seed)``;
normal variates use numpy's ziggurat ``standard_normal``. A fixed seed
therefore reproduces ``S_true`` and ``Y`` bit for bit.

Map file layout (little endian)
-------------------------------
====== ====== =====================================
offset size   field
====== ====== =====================================
0      8      magic ``b"KSEPMAP1"``
8      4      u32 format version (1)
12     4      u32 HEALPix level
16     4      u32 rows ``N``
20     4      u32 columns ``k``
24     8      u64 seed (0 when not simulated)
32     8 N k  f64 values, column-major
====== ====== =====================================
"""
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, MapFormatError, ShapeError
from .report import SolveReport

MAGIC = b"KSEPMAP1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIIIIQ")
HEADER_SIZE = _HEADER.size  # 32


@dataclass(frozen=True)
class SimConfig:
    level: int
    m: int = 4
    n: int = 9
    seed: int = 0
    source_std: float = 1.0
    noise: bool = True

    def __post_init__(self):
        if self.level < 0 or self.m < 1 or self.n < 1:
            raise ConfigurationError("level must be >= 0 and m, n positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigurationError("seed must fit in an unsigned 64-bit integer")
        if self.source_std < 0:
            raise ConfigurationError("source_std must be non-negative")


def column_streams(seed, count):
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(count)]


def simulate(cfg, grid, model):
    """Draw true sources and noisy maps ``Y = S A^T + noise``.

    Sources are iid ``Normal(0, source_std^2)``; the noise at pixel ``j`` of
    map ``k`` has variance ``1 / (T_k Nhits_j)``.

    Returns
    -------
    S_true : ndarray (N, m)
    Y : ndarray (N, n)
    """
    if (model.m, model.n) != (cfg.m, cfg.n):
        raise ShapeError(f"config asks for m={cfg.m}, n={cfg.n}; model has m={model.m}, n={model.n}")
    if grid.level != cfg.level or model.npix != grid.npix:
        raise ShapeError("grid, model and config disagree on the level")
    npix = grid.npix
    streams = column_streams(cfg.seed, cfg.m + cfg.n)
    S = np.empty((npix, cfg.m))
    for l in range(cfg.m):
        S[:, l] = cfg.source_std * streams[l].standard_normal(npix)
    Y = S @ model.A.T
    if cfg.noise:
        for k in range(cfg.n):
            sigma = 1.0 / np.sqrt(model.T[k] * model.Nhits)
            Y[:, k] += sigma * streams[cfg.m + k].standard_normal(npix)
    return S, Y


@dataclass(frozen=True)
class MapHeader:
    version: int
    level: int
    rows: int
    cols: int
    seed: int


def write_maps(path, stack, level, seed=0):
    """Write an ``(N, k)`` stack in the binary map format."""
    stack = np.asarray(stack, dtype="<f8")
    if stack.ndim == 1:
        stack = stack[:, None]
    if stack.ndim != 2:
        raise ShapeError("map stack must be one- or two-dimensional")
    rows, cols = stack.shape
    if rows != 4 ** level:
        raise ShapeError(f"{rows} rows do not match level {level} (N = {4 ** level})")
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, level, rows, cols, seed)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(stack.tobytes(order="F"))


def _parse_header(buf):
    if len(buf) < HEADER_SIZE:
        raise MapFormatError(f"truncated header: {len(buf)} of {HEADER_SIZE} bytes", len(buf))
    magic, version, level, rows, cols, seed = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise MapFormatError(f"bad magic {magic!r}", 0)
    if version != FORMAT_VERSION:
        raise MapFormatError(f"unsupported format version {version}", 8)
    if rows != 4 ** level:
        raise MapFormatError(f"rows {rows} inconsistent with level {level}", 16)
    return MapHeader(version, level, rows, cols, seed)


def read_map_header(path):
    with open(path, "rb") as fh:
        return _parse_header(fh.read(HEADER_SIZE))


def read_maps(path, with_header=False):
    """Read a map file; returns the ``(N, k)`` stack (and header if asked)."""
    buf = Path(path).read_bytes()
    header = _parse_header(buf)
    expected = HEADER_SIZE + 8 * header.rows * header.cols
    if len(buf) != expected:
        raise MapFormatError(f"expected {expected} bytes, file has {len(buf)}", min(len(buf), expected))
    data = np.frombuffer(buf, dtype="<f8", offset=HEADER_SIZE)
    stack = data.reshape((header.rows, header.cols), order="F").astype(np.float64)
    return (stack, header) if with_header else stack


def write_report(path, report):
    Path(path).write_text(report.to_json(indent=2) + "\n")


def read_report(path):
    return SolveReport.from_dict(json.loads(Path(path).read_text()))

"""Physical model constants: mixing matrix, noise and prior scales.

The posterior mean system is ``(Q + B^T C B) mu = B^T C y`` with
``B = A kron I_N``, ``C = T kron Nhits`` and ``Q = P kron D^2``; everything
here is stored in its small factored form.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ShapeError

PLANCK_H = 6.62607015e-34  # J s
BOLTZMANN_K = 1.380649e-23  # J / K
T1_KELVIN = 18.1

PLANCK_FREQUENCIES_GHZ = (30.0, 44.0, 70.0, 100.0, 143.0, 217.0, 353.0, 545.0, 857.0)
PLANCK_REF_INDEX = 3
KAPPA_S = -2.65
KAPPA_D = 1.5
FREE_FREE_INDEX = -2.14


def _psi(nu_ghz):
    return PLANCK_H * np.asarray(nu_ghz, dtype=float) * 1e9 / (BOLTZMANN_K * T1_KELVIN)


def planck_conversion(nu):
    """Conversion factor ``c(nu) = (e^psi - 1)^2 / (psi^2 e^psi)``.

    Parameters
    ----------
    nu : float or array_like
        Frequency in GHz, strictly positive.
    """
    nu_arr = np.asarray(nu, dtype=float)
    if np.any(~(nu_arr > 0)):
        raise ValueError(f"frequency must be positive, got {nu}")
    psi = _psi(nu_arr)
    em1 = np.expm1(psi)
    # (e^psi - 1)^2 / (psi^2 e^psi), written to stay accurate as psi -> 0
    out = (em1 / psi) ** 2 * np.exp(-psi)
    return float(out) if out.ndim == 0 else out


def _blackbody(nu_ghz):
    return np.asarray(nu_ghz, dtype=float) / np.expm1(_psi(nu_ghz))


def build_mixing_matrix(frequencies=PLANCK_FREQUENCIES_GHZ, kappa_s=KAPPA_S, kappa_d=KAPPA_D,
                        ref_index=PLANCK_REF_INDEX):
    """Four-source mixing matrix (CMB, synchrotron, dust, free-free).

    Parameters
    ----------
    frequencies : sequence of float
        Map frequencies in GHz.
    kappa_s, kappa_d : float
        Synchrotron and dust spectral indices.
    ref_index : int
        Index into ``frequencies`` of the reference frequency ``nu_0``.

    Returns
    -------
    A : ndarray, shape (n, 4)
    """
    nu = np.asarray(frequencies, dtype=float)
    if nu.ndim != 1 or nu.size == 0:
        raise ConfigurationError("frequencies must be a non-empty 1-d sequence")
    if np.any(~(nu > 0)):
        raise ValueError("frequencies must be positive")
    if not 0 <= ref_index < nu.size:
        raise ConfigurationError(f"ref_index {ref_index} out of range for {nu.size} frequencies")
    nu0 = nu[ref_index]
    c = planck_conversion(nu)
    ratio = nu / nu0
    A = np.empty((nu.size, 4))
    A[:, 0] = 1.0
    A[:, 1] = c * ratio ** kappa_s
    A[:, 2] = c * _blackbody(nu) / _blackbody(nu0) * ratio ** kappa_d
    A[:, 3] = c * ratio ** FREE_FREE_INDEX
    return A


def default_T():
    """Noise precision scales for the nine Planck frequency maps."""
    return np.array([629881.6, 694444.4, 783146.7, 12755102.0] + [30864197.5] * 5)


@dataclass(frozen=True)
class ModelSpec:
    """Small factors of the Kronecker-structured posterior system.

    Attributes
    ----------
    A : ndarray (n, m)
        Mixing matrix, first column all ones.
    T : ndarray (n,)
        Noise precision scale per frequency map (``tau_k``).
    Nhits : ndarray (N,)
        Per-pixel hit counts (``n_j``).
    P : ndarray (m,)
        Prior smoothness scale per source (``phi_l``).
    frequencies : ndarray (n,) or None
        Map frequencies in GHz, informational.
    ref_freq_index : int
    """

    A: np.ndarray
    T: np.ndarray
    Nhits: np.ndarray
    P: np.ndarray
    frequencies: np.ndarray = None
    ref_freq_index: int = PLANCK_REF_INDEX

    def __post_init__(self):
        A = np.array(self.A, dtype=float, ndmin=2)
        T = np.array(self.T, dtype=float, ndmin=1)
        Nhits = np.array(self.Nhits, dtype=float, ndmin=1)
        P = np.array(self.P, dtype=float, ndmin=1)
        n, m = A.shape
        if T.shape != (n,):
            raise ShapeError(f"T must have length n={n}, got shape {T.shape}")
        if P.shape != (m,):
            raise ShapeError(f"P must have length m={m}, got shape {P.shape}")
        if Nhits.ndim != 1:
            raise ShapeError("Nhits must be one-dimensional")
        for name, arr in (("T", T), ("Nhits", Nhits), ("P", P)):
            if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
                raise ConfigurationError(f"all entries of {name} must be finite and positive")
        if m > n or np.linalg.matrix_rank(A) < m:
            raise ConfigurationError("mixing matrix must have full column rank m <= n")
        for arr in (A, T, Nhits, P):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "Nhits", Nhits)
        object.__setattr__(self, "P", P)
        if self.frequencies is not None:
            object.__setattr__(self, "frequencies", np.asarray(self.frequencies, dtype=float))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.A.shape[1]

    @property
    def npix(self):
        return self.Nhits.shape[0]


def planck_model(npix, *, kappa_s=KAPPA_S, kappa_d=KAPPA_D, T=None, Nhits=None, P=None):
    """Default nine-map, four-source model on a face of ``npix`` pixels.

    Hit counts default to ones and smoothness scales to ``phi_l = 1``.
    """
    A = build_mixing_matrix(PLANCK_FREQUENCIES_GHZ, kappa_s, kappa_d, PLANCK_REF_INDEX)
    return ModelSpec(
        A=A,
        T=default_T() if T is None else T,
        Nhits=np.ones(npix) if Nhits is None else Nhits,
        P=np.ones(A.shape[1]) if P is None else P,
        frequencies=np.array(PLANCK_FREQUENCIES_GHZ),
    )


def build_rhs(model, Y):
    """Right-hand side ``B^T C y`` in reshaped ``(N, m)`` form.

    Computed as ``Nhits * Y * T @ A``; ``Y`` is the ``(N, n)`` map stack.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (model.npix, model.n):
        raise ShapeError(f"Y must have shape {(model.npix, model.n)}, got {Y.shape}")
    return (model.Nhits[:, None] * Y * model.T[None, :]) @ model.A

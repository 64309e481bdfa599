import numpy as np
import pytest

from kronsep import (
    ConfigurationError,
    ModelSpec,
    ShapeError,
    build_mixing_matrix,
    build_rhs,
    default_T,
    new_grid,
    planck_conversion,
    planck_model,
)
from kronsep.dense import dense_Q, dense_BtCB
from kronsep.model import PLANCK_FREQUENCIES_GHZ, PLANCK_REF_INDEX
from kronsep.operators import apply_Q

PRINTED_A = np.array([
    [1.000, 24.314, 0.181, 13.158],
    [1.000, 8.817, 0.315, 5.801],
    [1.000, 2.581, 0.612, 2.151],
    [1.000, 1.006, 1.006, 1.006],
    [1.000, 0.392, 1.630, 0.471],
    [1.000, 0.132, 2.783, 0.196],
    [1.000, 0.038, 4.931, 0.072],
    [1.000, 0.013, 7.704, 0.032],
    [1.000, 0.005, 11.337, 0.015],
])


def test_mixing_matrix_reproduces_printed_values():
    A = build_mixing_matrix()
    assert A.shape == (9, 4)
    np.testing.assert_allclose(A, PRINTED_A, rtol=0, atol=5e-3)


def test_conversion_factor_limits():
    assert planck_conversion(1e-6) == pytest.approx(1.0, rel=1e-9)
    # 100 GHz entry of the free-free column is c(nu_0) exactly
    assert planck_conversion(100.0) == pytest.approx(1.006, abs=5e-4)
    assert np.all(np.diff(planck_conversion(np.array(PLANCK_FREQUENCIES_GHZ))) > 0)


@pytest.mark.parametrize("nu", [0.0, -30.0])
def test_conversion_rejects_nonpositive(nu):
    with pytest.raises(ValueError):
        planck_conversion(nu)


def test_reference_row_is_uniform():
    A = build_mixing_matrix()
    c0 = planck_conversion(PLANCK_FREQUENCIES_GHZ[PLANCK_REF_INDEX])
    np.testing.assert_allclose(A[PLANCK_REF_INDEX, 1:], c0, rtol=1e-14)


def test_spectral_indices_move_columns():
    base = build_mixing_matrix()
    steeper = build_mixing_matrix(kappa_s=-3.0)
    assert steeper[0, 1] > base[0, 1]
    np.testing.assert_array_equal(steeper[:, 2:], base[:, 2:])


def test_mixing_matrix_errors():
    with pytest.raises(ConfigurationError):
        build_mixing_matrix([], 0, 0, 0)
    with pytest.raises(ConfigurationError):
        build_mixing_matrix([30.0, 44.0], ref_index=5)
    with pytest.raises(ValueError):
        build_mixing_matrix([30.0, -1.0], ref_index=0)


def test_default_T_printed():
    T = default_T()
    assert T.shape == (9,)
    assert T[0] == 629881.6 and T[3] == 12755102.0
    assert np.all(T[4:] == 30864197.5)


def test_model_validation():
    A = build_mixing_matrix()
    with pytest.raises(ShapeError):
        ModelSpec(A=A, T=np.ones(8), Nhits=np.ones(4), P=np.ones(4))
    with pytest.raises(ShapeError):
        ModelSpec(A=A, T=np.ones(9), Nhits=np.ones(4), P=np.ones(3))
    with pytest.raises(ConfigurationError):
        ModelSpec(A=A, T=np.ones(9), Nhits=np.zeros(4), P=np.ones(4))
    with pytest.raises(ConfigurationError):
        ModelSpec(A=A, T=np.ones(9), Nhits=np.ones(4), P=-np.ones(4))
    rank_deficient = A.copy()
    rank_deficient[:, 3] = rank_deficient[:, 0]
    with pytest.raises(ConfigurationError):
        ModelSpec(A=rank_deficient, T=np.ones(9), Nhits=np.ones(4), P=np.ones(4))


def test_model_is_immutable():
    model = planck_model(16)
    with pytest.raises(ValueError):
        model.Nhits[0] = 2.0
    assert (model.n, model.m, model.npix) == (9, 4, 16)


@pytest.mark.parametrize("level", [1, 2, 3])
def test_posterior_precision_spd(level):
    g = new_grid(level)
    model = planck_model(g.npix)
    Qhat = dense_Q(g, model) + dense_BtCB(g, model)
    assert np.linalg.eigvalsh(0.5 * (Qhat + Qhat.T)).min() > 0


def test_prior_annihilates_constants():
    g = new_grid(3)
    model = planck_model(g.npix, P=np.array([1.0, 2.0, 0.5, 3.0]))
    out = apply_Q(model, g, np.ones((g.npix, 4)))
    assert np.max(np.abs(out)) <= 1e-12


def test_build_rhs_linear(rng):
    model = planck_model(64, Nhits=rng.uniform(1, 3, 64))
    Y1, Y2 = rng.standard_normal((2, 64, 9))
    lhs = build_rhs(model, Y1 + Y2)
    rhs = build_rhs(model, Y1) + build_rhs(model, Y2)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(lhs)


def test_build_rhs_matches_kronecker(rng):
    g = new_grid(1)
    model = planck_model(g.npix, Nhits=rng.uniform(1, 3, g.npix))
    Y = rng.standard_normal((g.npix, 9))
    B = np.kron(model.A, np.eye(g.npix))
    C = np.kron(model.T, model.Nhits)
    ref = B.T @ (C * Y.reshape(-1, order="F"))
    np.testing.assert_allclose(build_rhs(model, Y).reshape(-1, order="F"), ref, rtol=1e-12)


def test_build_rhs_shape_error():
    with pytest.raises(ShapeError):
        build_rhs(planck_model(16), np.ones((16, 8)))

import numpy as np
import pytest

from kronsep import SizeGuardError, assemble_dense, new_grid, planck_model, solve_dense
from kronsep.dense import MAX_DENSE_DIM, dense_D
from kronsep.grid import assemble_D

from conftest import make_case


def test_oracle_self_consistency():
    g, model, _, Y = make_case(2, seed=11)
    Qhat, rb = assemble_dense(g, model)
    rhs = rb(Y)
    mu = solve_dense(Qhat, rhs)
    assert np.linalg.norm(Qhat @ mu - rhs) <= 1e-12 * np.linalg.norm(rhs)


def test_oracle_is_symmetric():
    g = new_grid(2)
    Qhat, _ = assemble_dense(g, planck_model(g.npix))
    np.testing.assert_array_equal(Qhat, Qhat.T)


def test_size_guard():
    g = new_grid(6)  # m N = 16384
    assert 4 * g.npix > MAX_DENSE_DIM
    with pytest.raises(SizeGuardError):
        assemble_dense(g, planck_model(g.npix))


def test_dense_D_matches_sparse():
    g = new_grid(2)
    np.testing.assert_array_equal(dense_D(g), assemble_D(g).toarray())


def test_not_positive_definite_raises():
    with pytest.raises(np.linalg.LinAlgError):
        solve_dense(-np.eye(3), np.ones(3))

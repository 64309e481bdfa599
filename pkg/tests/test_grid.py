import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kronsep import ConfigurationError, ShapeError, apply_D, apply_D_squared, neighbors, new_grid
from kronsep.grid import assemble_D


def test_level_zero_is_single_pixel():
    g = new_grid(0)
    assert (g.side, g.npix) == (1, 1)
    assert list(g.neighbor_counts) == [0]


def test_level_one_all_corners():
    g = new_grid(1)
    assert g.npix == 4
    assert list(g.neighbor_counts) == [2, 2, 2, 2]


def test_level_five_face_and_full_sky_count():
    assert new_grid(5).npix == 1024
    assert 12 * new_grid(10).npix == 12_582_912


@pytest.mark.parametrize("level", [-1, 13, 2.5, True])
def test_level_out_of_range(level):
    with pytest.raises(ConfigurationError):
        new_grid(level)


def test_neighbor_counts_is_read_only():
    with pytest.raises(ValueError):
        new_grid(2).neighbor_counts[0] = 9


@pytest.mark.parametrize("level,j,expected", [(1, 0, [1, 2]), (2, 5, [1, 4, 6, 9]), (2, 3, [2, 7])])
def test_neighbors_examples(level, j, expected):
    assert neighbors(new_grid(level), j) == expected


def test_neighbors_errors():
    g = new_grid(2)
    with pytest.raises(IndexError):
        neighbors(g, 16)
    with pytest.raises(IndexError):
        neighbors(g, -1)
    with pytest.raises(TypeError):
        neighbors(g, 1.0)


@pytest.mark.parametrize("level", [1, 2, 3, 4])
def test_neighbor_structure(level):
    g = new_grid(level)
    side = g.side
    for j in range(g.npix):
        nb = neighbors(g, j)
        assert j not in nb
        assert len(nb) == g.neighbor_counts[j]
        for k in nb:
            assert j in neighbors(g, k)
        row, col = divmod(j, side)
        on_edge = (row in (0, side - 1)) + (col in (0, side - 1))
        assert len(nb) == {0: 4, 1: 3, 2: 2}[on_edge]


def test_apply_D_hand_example():
    out = apply_D(new_grid(1), np.array([1.0, 0, 0, 0]))
    np.testing.assert_array_equal(out, [-2.0, 1.0, 1.0, 0.0])


@pytest.mark.parametrize("level", [1, 3, 6])
def test_apply_D_annihilates_constants(level):
    g = new_grid(level)
    assert np.max(np.abs(apply_D(g, np.ones((g.npix, 3))))) <= 1e-12 * g.npix


def test_apply_D_matches_sparse_assembly(rng):
    g = new_grid(3)
    Ddense = assemble_D(g).toarray()
    v = rng.standard_normal((g.npix, 5))
    np.testing.assert_allclose(apply_D(g, v), Ddense @ v, rtol=0, atol=1e-12)
    np.testing.assert_allclose(apply_D(g, v[:, 0]), Ddense @ v[:, 0], rtol=0, atol=1e-12)


def test_apply_D_matches_neighbor_definition(rng):
    g = new_grid(2)
    v = rng.standard_normal(g.npix)
    ref = [sum(v[k] for k in neighbors(g, j)) - len(neighbors(g, j)) * v[j] for j in range(g.npix)]
    np.testing.assert_allclose(apply_D(g, v), ref, atol=1e-13)


def test_apply_D_shape_error():
    with pytest.raises(ShapeError):
        apply_D(new_grid(2), np.ones(15))
    with pytest.raises(ShapeError):
        apply_D(new_grid(2), np.ones((16, 2, 2)))


def test_apply_D_does_not_modify_input(rng):
    g = new_grid(3)
    v = rng.standard_normal((g.npix, 2))
    keep = v.copy()
    apply_D_squared(g, v)
    np.testing.assert_array_equal(v, keep)


@settings(max_examples=40, deadline=None)
@given(level=st.integers(1, 5), seed=st.integers(0, 2**32 - 1), k=st.integers(1, 4))
def test_D_symmetric(level, seed, k):
    g = new_grid(level)
    r = np.random.default_rng(seed)
    u, v = r.standard_normal((2, g.npix, k))
    lhs = np.sum(apply_D(g, u) * v)
    rhs = np.sum(u * apply_D(g, v))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, np.linalg.norm(apply_D(g, u)) * np.linalg.norm(v))


def test_D_squared_positive_semidefinite(rng):
    g = new_grid(4)
    for _ in range(100):
        v = rng.standard_normal(g.npix)
        q = v @ apply_D_squared(g, v)
        assert q >= 0
        assert q == pytest.approx(np.linalg.norm(apply_D(g, v)) ** 2, rel=1e-12)


@pytest.mark.parametrize("level", [1, 2, 3])
def test_D_squared_rank_deficiency_is_one(level):
    D = assemble_D(new_grid(level)).toarray()
    ev = np.abs(np.linalg.eigvalsh(D @ D))
    assert np.sum(ev <= 1e-8 * ev.max()) == 1


def test_D_squared_example():
    g = new_grid(2)
    D = assemble_D(g).toarray()
    v = np.arange(16.0)
    np.testing.assert_allclose(apply_D_squared(g, v), D @ (D @ v), atol=1e-12)

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from synthetic import draw_sized_training_set, draw_training_set, random_factor, random_kron_kernel


def test_random_factor_is_symmetric_pd():
    L = random_factor(5, np.random.default_rng(0))
    assert_array_equal(L, L.T)
    assert np.linalg.eigvalsh(L)[0] > 0
    assert np.all(L >= 0)


def test_random_kernel_is_deterministic_per_seed():
    a = random_kron_kernel((2, 3), np.random.default_rng(7))
    b = random_kron_kernel((2, 3), np.random.default_rng(7))
    assert a.dims == (2, 3)
    for A, B in zip(a.factors, b.factors):
        assert_array_equal(A, B)


def test_training_set_sizes_respect_window():
    rng = np.random.default_rng(3)
    K = random_kron_kernel((3, 3), rng)
    T = draw_training_set(K, 30, 2, 4, rng)
    assert T.n == 30
    assert T.ground_size == 9
    assert all(2 <= len(s) <= 4 for s in T.subsets)


def test_training_set_is_deterministic_per_seed():
    def draw(seed):
        rng = np.random.default_rng(seed)
        return draw_training_set(random_kron_kernel((2, 2), rng), 10, 1, 4, rng)

    assert [s.tolist() for s in draw(11).subsets] == [s.tolist() for s in draw(11).subsets]


def test_infeasible_window():
    rng = np.random.default_rng(0)
    K = random_kron_kernel((2, 2), rng)
    with pytest.raises(ValueError):
        draw_training_set(K, 1, 5, 6, rng, max_rejections=20)
    with pytest.raises(ValueError):
        draw_training_set(K, 1, 3, 2, rng)


def test_sized_training_set_covers_window():
    rng = np.random.default_rng(5)
    K = random_kron_kernel((4, 4), rng)
    T = draw_sized_training_set(K, 200, 2, 6, rng)
    sizes = [len(s) for s in T.subsets]
    assert T.ground_size == 16
    assert set(sizes) == {2, 3, 4, 5, 6}


def test_sized_training_set_is_deterministic_per_seed():
    def draw(seed):
        rng = np.random.default_rng(seed)
        return draw_sized_training_set(random_kron_kernel((3, 3), rng), 10, 1, 5, rng)

    assert [s.tolist() for s in draw(2).subsets] == [s.tolist() for s in draw(2).subsets]


def test_sized_training_set_rejects_bad_windows():
    rng = np.random.default_rng(0)
    K = random_kron_kernel((2, 2), rng)
    with pytest.raises(ValueError):
        draw_sized_training_set(K, 1, 3, 2, rng)
    with pytest.raises(ValueError):
        draw_sized_training_set(K, 1, 5, 5, rng)

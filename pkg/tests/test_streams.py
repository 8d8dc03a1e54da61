import numpy as np
import pytest

from gaflab import RngStream


def test_same_path_same_sequence():
    a = RngStream(123, (1, 2)).generator().standard_normal(100)
    b = RngStream(123, (1, 2)).generator().standard_normal(100)
    assert np.array_equal(a, b)


def test_child_derivation_matches_explicit_path():
    root = RngStream(99)
    assert root.child(4, 7) == RngStream(99, (4, 7))
    assert root.child(4).child(7) == RngStream(99, (4, 7))


def test_distinct_paths_differ():
    a = RngStream(5, (0,)).generator().standard_normal(8)
    b = RngStream(5, (1,)).generator().standard_normal(8)
    assert not np.array_equal(a, b)


def test_cross_stream_independence():
    # basic cross-correlation: sibling streams behave as independent sequences
    n = 200_000
    x = RngStream(7, (0,)).generator().standard_normal(n)
    y = RngStream(7, (1,)).generator().standard_normal(n)
    corr = float(np.mean(x * y))
    assert abs(corr) < 4.0 / np.sqrt(n)
    # lagged correlation too
    corr_lag = float(np.mean(x[:-1] * y[1:]))
    assert abs(corr_lag) < 4.0 / np.sqrt(n)


def test_complex_normal_convention():
    z = RngStream(11).standard_complex_normals(400_000)
    assert abs(np.mean(z)) < 0.005
    assert abs(np.mean(np.abs(z) ** 2) - 1.0) < 0.01
    assert abs(np.var(z.real) - 0.5) < 0.01
    assert abs(np.var(z.imag) - 0.5) < 0.01


def test_seed_and_path_bounds():
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(2**64)
    with pytest.raises(ValueError):
        RngStream(0, (2**32,))

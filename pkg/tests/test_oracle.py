import numpy as np
import pytest

from rarepatch.core import Shape, block_distance, cut_block, origins_disjoint
from rarepatch.oracle import (
    DistanceMap,
    argmax_origin,
    distance_outliers,
    nn_distance_map,
    rarest_block,
)
from rarepatch.synth import generate

from helpers import chebyshev, naive_distance_map, planted


def test_periodic_image_all_zero():
    img, _ = generate({"width": 32, "height": 32, "seed": 1,
                       "background": {"kind": "periodic", "period": 4}})
    d = nn_distance_map(img, Shape.square(4))
    assert np.all(d.values == 0)


def test_single_patch_on_constant():
    img = np.zeros((20, 20))
    img[8:12, 6:10] = 1.0
    (x, y), d = rarest_block(img, Shape.square(4))
    assert (x, y) == (6, 8)
    assert d == pytest.approx(4.0)


@pytest.mark.parametrize("norm", ["l2", "l1"])
@pytest.mark.parametrize("seed", range(4))
def test_matches_naive_loop(norm, seed):
    rng = np.random.default_rng(seed)
    img = rng.random((20, 22))
    shape = Shape.rectangle(4, 3) if seed % 2 else Shape.square(5)
    got = nn_distance_map(img, shape, norm).values
    np.testing.assert_array_equal(got, naive_distance_map(img, shape, norm))


def test_matches_naive_on_flat_image():
    img = np.full((18, 18), 0.25)
    img[3, 4] = 0.9
    shape = Shape.square(3)
    np.testing.assert_array_equal(nn_distance_map(img, shape).values,
                                  naive_distance_map(img, shape))


def test_upper_bound_spot_check():
    rng = np.random.default_rng(5)
    img = rng.random((24, 24))
    shape = Shape.square(4)
    d = nn_distance_map(img, shape).values
    for _ in range(50):
        x, y, x2, y2 = rng.integers(0, 21, 4)
        if origins_disjoint((x, y), (x2, y2), shape):
            pair = block_distance(cut_block(img, shape, (x, y)), cut_block(img, shape, (x2, y2)))
            assert d[y, x] <= pair + 1e-12


def test_transposition_invariance():
    rng = np.random.default_rng(6)
    img = rng.random((18, 25))
    a = nn_distance_map(img, Shape.rectangle(3, 5)).values
    b = nn_distance_map(img.T, Shape.rectangle(5, 3)).values
    np.testing.assert_allclose(a, b.T, rtol=1e-12)


def test_threads_identical():
    img = np.random.default_rng(7).random((30, 30))
    s = Shape.square(5)
    a = nn_distance_map(img, s, chunk=37).values
    b = nn_distance_map(img, s, threads=3, chunk=37).values
    assert a.tobytes() == b.tobytes()


def test_euclidean_rule_no_smaller_than_chebyshev():
    img = np.random.default_rng(8).random((24, 24))
    s = Shape.square(4)
    a = nn_distance_map(img, s).values
    b = nn_distance_map(img, s, rule="euclidean").values
    assert np.all(b >= a)


def test_no_disjoint_partner_raises():
    with pytest.raises(ValueError, match="disjoint"):
        nn_distance_map(np.zeros((10, 10)), Shape.square(6))


def test_shape_larger_than_image():
    with pytest.raises(ValueError):
        nn_distance_map(np.zeros((5, 5)), Shape.square(6))


def test_unknown_norm():
    with pytest.raises(ValueError):
        nn_distance_map(np.zeros((10, 10)), Shape.square(2), norm="linf")


def test_isolated_origins_are_nan():
    d = nn_distance_map(np.random.default_rng(0).random((10, 14)), Shape.square(6)).values
    # a 6x6 block at x=4 overlaps every other placement in a 14 wide image
    assert np.isnan(d[:, 3:6]).all() and np.isfinite(d[:, 0]).all()


@pytest.mark.parametrize("seed", range(3))
def test_planted_patch_is_rarest(seed):
    img, truth = planted(seed)
    assert rarest_block(img, Shape.square(8))[0] == truth


class TestOutliers:
    def test_constant_map(self):
        dm = DistanceMap(np.full((5, 5), 2.0), "l2", Shape.square(2))
        assert distance_outliers(dm) == []

    def test_single_spike(self):
        v = np.zeros((20, 20))
        v[7, 11] = 10.0
        out = distance_outliers(DistanceMap(v, "l2", Shape.square(3)))
        assert len(out) == 1
        (r, d, z), = out
        assert r == (11, 7) and d == 10.0 and z > 3

    def test_overlapping_outliers_suppressed(self):
        v = np.zeros((20, 20))
        v[7, 11] = 10.0
        v[8, 12] = 9.0
        out = distance_outliers(DistanceMap(v, "l2", Shape.square(3)), z=2.0)
        assert [r for r, _, _ in out] == [(11, 7)]

    def test_planted_detected(self):
        img, truth = planted(0)
        out = distance_outliers(nn_distance_map(img, Shape.square(8)), z=3.0)
        assert out and chebyshev(out[0][0], truth) == 0

    def test_nan_ignored(self):
        v = np.zeros((10, 10))
        v[0, 0] = np.nan
        v[5, 5] = 4.0
        assert distance_outliers(DistanceMap(v, "l2", Shape.square(2)))[0][0] == (5, 5)


def test_argmax_tie_row_major():
    v = np.zeros((4, 4))
    v[1, 3] = v[2, 0] = 1.0
    assert argmax_origin(DistanceMap(v, "l2", Shape.square(2))) == ((3, 1), 1.0)

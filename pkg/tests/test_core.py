import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rarepatch.core import (
    Shape,
    as_image,
    block_distance,
    cut_block,
    disjoint_mask,
    greedy_disjoint,
    origin_grid,
    origins_disjoint,
)


def ring_mask(size=6):
    yy, xx = np.mgrid[0:size, 0:size]
    c = (size - 1) / 2
    d = np.hypot(yy - c, xx - c)
    return (d <= size / 2) & (d >= size / 2 - 1.5)


class TestShape:
    def test_square(self):
        s = Shape.square(8)
        assert (s.width, s.height, s.support_size, s.diameter) == (8, 8, 64, 8)
        assert s.is_full

    def test_rejects_single_pixel(self):
        with pytest.raises(ValueError, match="at least 2"):
            Shape(np.ones((1, 1)))

    def test_rejects_loose_bounding_box(self):
        m = np.zeros((4, 4), bool)
        m[1:3, 1:3] = True
        with pytest.raises(ValueError, match="not tight"):
            Shape(m)
        assert Shape.from_mask(m) == Shape.square(2)

    def test_euclidean_diameter(self):
        assert Shape.square(8).euclidean_diameter == pytest.approx(7 * np.sqrt(2))
        assert Shape.rectangle(5, 1).euclidean_diameter == pytest.approx(4.0)


class TestOriginGrid:
    def test_count(self):
        assert origin_grid(np.zeros((10, 20)), Shape.rectangle(4, 3)) == (8, 17)

    def test_empty_when_too_large(self):
        ny, nx = origin_grid(np.zeros((5, 5)), Shape.square(6))
        assert ny * nx == 0


class TestCutBlock:
    def test_constant(self):
        img = np.full((10, 10), 0.5)
        assert np.all(cut_block(img, Shape.square(3), (4, 2)) == 0.5)

    def test_index_arithmetic(self):
        img = np.arange(9).reshape(3, 3) / 8
        np.testing.assert_array_equal(cut_block(img, Shape.square(2), (1, 1)),
                                      np.array([4, 5, 7, 8]) / 8)

    def test_ring_matches_pixel_gather(self):
        rng = np.random.default_rng(5)
        img = rng.random((16, 16))
        mask = ring_mask()
        shape = Shape.from_mask(mask)
        r = (3, 2)
        expected = []
        for j in range(shape.height):
            for i in range(shape.width):
                if shape.mask[j, i]:
                    expected.append(img[r[1] + j, r[0] + i])
        np.testing.assert_array_equal(cut_block(img, shape, r), expected)

    def test_out_of_region(self):
        with pytest.raises(ValueError, match=r"\(7, 0\)"):
            cut_block(np.zeros((8, 8)), Shape.square(2), (7, 0))


class TestBlockDistance:
    def test_identity(self):
        b = np.array([0.1, 0.7, 0.3])
        assert block_distance(b, b) == 0.0

    def test_pythagorean(self):
        assert block_distance([0, 0], [3, 4]) == 5.0
        assert block_distance([0, 0], [3, 4], "l1") == 7.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            block_distance([0, 0], [1, 2, 3])

    @given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["l1", "l2"]))
    @settings(max_examples=50, deadline=None)
    def test_metric_axioms(self, seed, norm):
        a, b, c = np.random.default_rng(seed).normal(size=(3, 12))
        assert block_distance(a, b, norm) == block_distance(b, a, norm)
        assert block_distance(a, c, norm) <= block_distance(a, b, norm) + block_distance(b, c, norm) + 1e-9

    def test_self_distance_every_origin(self):
        img = np.random.default_rng(0).random((9, 9))
        s = Shape.square(3)
        for x, y in itertools.product(range(7), range(7)):
            b = cut_block(img, s, (x, y))
            assert block_distance(b, b) == 0.0


class TestDisjoint:
    def test_examples(self):
        s = Shape.square(8)
        assert not origins_disjoint((0, 0), (0, 0), s)
        assert origins_disjoint((0, 0), (8, 0), s)
        assert not origins_disjoint((0, 0), (7, 7), s)

    def test_euclidean_overexcludes(self):
        s = Shape.square(8)
        assert not origins_disjoint((0, 0), (8, 0), s, rule="euclidean")
        assert origins_disjoint((0, 0), (10, 0), s, rule="euclidean")

    @given(st.tuples(st.integers(-20, 20), st.integers(-20, 20)),
           st.tuples(st.integers(-20, 20), st.integers(-20, 20)),
           st.sampled_from(["chebyshev", "euclidean"]))
    def test_symmetric(self, r, q, rule):
        s = Shape.rectangle(5, 3)
        assert origins_disjoint(r, q, s, rule) == origins_disjoint(q, r, s, rule)

    @pytest.mark.parametrize("side", [2, 3, 4])
    def test_exhaustive_square_non_overlap(self, side):
        s = Shape.square(side)
        pix = {(i, j) for i in range(side) for j in range(side)}
        for dx in range(-2 * side, 2 * side + 1):
            for dy in range(-2 * side, 2 * side + 1):
                shifted = {(i + dx, j + dy) for i, j in pix}
                overlap = bool(pix & shifted)
                assert origins_disjoint((0, 0), (dx, dy), s) == (not overlap)

    def test_sparse_mask_conservative(self):
        s = Shape.from_mask(ring_mask())
        pix = {(int(x), int(y)) for y, x in zip(*np.nonzero(s.mask))}
        for dx in range(-12, 13):
            for dy in range(-12, 13):
                if origins_disjoint((0, 0), (dx, dy), s):
                    assert not pix & {(i + dx, j + dy) for i, j in pix}

    def test_vectorised_agrees(self):
        s = Shape.rectangle(4, 6)
        dx, dy = np.meshgrid(np.arange(-9, 10), np.arange(-9, 10))
        for rule in ("chebyshev", "euclidean"):
            vec = disjoint_mask(dx, dy, s, rule)
            ref = np.vectorize(lambda a, b: origins_disjoint((0, 0), (a, b), s, rule))(dx, dy)
            np.testing.assert_array_equal(vec, ref)


class TestGreedy:
    def test_tie_break_row_major(self):
        picked = greedy_disjoint(np.zeros((10, 10)), 3, Shape.square(3))
        assert [r for r, _ in picked] == [(0, 0), (3, 0), (6, 0)]

    def test_overlapping_equal_maxima(self):
        v = np.zeros((10, 10))
        v[2, 2] = v[3, 3] = 5.0
        picked = greedy_disjoint(v, 2, Shape.square(3))
        assert picked[0] == ((2, 2), 5.0)
        assert picked[1][0] != (3, 3)


def test_as_image_validation():
    with pytest.raises(ValueError):
        as_image(np.zeros(5))
    with pytest.raises(ValueError):
        as_image([[0.0, np.nan]])
    assert as_image([[1, 2]]).dtype == np.float64


@pytest.mark.parametrize("w,h", [(2, 2), (3, 3), (4, 4), (5, 3), (7, 7), (1, 6)])
def test_euclidean_rule_excludes_every_overlap(w, h):
    s = Shape.rectangle(w, h)
    for dx in range(-w, w + 1):
        for dy in range(-h, h + 1):
            if abs(dx) < w and abs(dy) < h:
                assert not origins_disjoint((0, 0), (dx, dy), s, "euclidean")

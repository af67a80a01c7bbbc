import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resilient_hull.linalg import hull_membership
from resilient_hull.resilient import ResilienceProblem, enumerate_subsets
from resilient_hull.tverberg import (
    common_point,
    find_tverberg,
    restricted_growth_strings,
    set_partitions,
    tverberg_guaranteed,
)


def stirling2(m, k):
    return sum((-1) ** j * math.comb(k, j) * (k - j) ** m for j in range(k + 1)) // math.factorial(k)


class TestEnumeration:
    @pytest.mark.parametrize("m", range(1, 9))
    @pytest.mark.parametrize("k", range(1, 5))
    def test_counts_match_stirling_numbers(self, m, k):
        strings = list(restricted_growth_strings(m, k))
        assert len(strings) == stirling2(m, k)
        assert len(set(strings)) == len(strings)
        assert strings == sorted(strings)

    def test_partitions_cover_labels(self):
        for parts in set_partitions(5, 3):
            assert len(parts) == 3
            assert all(parts)
            assert sorted(i for p in parts for i in p) == list(range(5))

    def test_first_partition(self):
        assert next(set_partitions(4, 2)) == ((0, 1, 2), (3,))

    def test_impossible_block_counts(self):
        assert list(restricted_growth_strings(3, 4)) == []
        assert list(restricted_growth_strings(3, 0)) == []


class TestFindTverberg:
    def test_point_inside_triangle(self):
        cert = find_tverberg([(0, 0), (2, 0), (0, 2), (0.5, 0.5)], 1)
        assert cert.parts == ((0, 1, 2), (3,))
        np.testing.assert_allclose(cert.witness, [0.5, 0.5], atol=1e-9)

    def test_collinear_points(self):
        pts = [[0.0], [1.0], [2.0], [3.0]]
        cert = find_tverberg(pts, 1)
        assert cert is not None
        for part in cert.parts:
            assert hull_membership(np.array(pts)[list(part)], cert.witness, 1e-7).is_member

    def test_too_few_points_may_fail(self, caplog):
        rng = np.random.default_rng(0)
        pts = rng.standard_normal((6, 2))
        assert not tverberg_guaranteed(6, 2, 2)
        with caplog.at_level(logging.WARNING):
            cert = find_tverberg(pts, 2)
        if cert is None:
            assert not caplog.records
        else:
            for part in cert.parts:
                assert hull_membership(pts[list(part)], cert.witness, 1e-6).is_member

    def test_triangle_has_no_two_part_split(self):
        assert find_tverberg([(0, 0), (1, 0), (0, 1)], 1) is None

    def test_coefficients_reproduce_witness(self):
        pts = np.random.default_rng(1).standard_normal((5, 2))
        cert = find_tverberg(pts, 1)
        for part, coef in zip(cert.parts, cert.coefficients):
            assert coef.min() >= -1e-12
            assert coef.sum() == pytest.approx(1.0)
            np.testing.assert_allclose(coef @ pts[list(part)], cert.witness, atol=1e-8)

    def test_bounds(self):
        with pytest.raises(ValueError):
            find_tverberg(np.zeros((11, 1)), 1)
        with pytest.raises(ValueError):
            find_tverberg(np.zeros((8, 1)), 4)
        with pytest.raises(ValueError):
            find_tverberg(np.zeros((4, 1)), 0)

    def test_common_point_rejects_disjoint_parts(self):
        assert common_point([[0.0], [1.0], [5.0], [6.0]], ((0, 1), (2, 3))) is None


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_witness_lies_in_every_hull_of_the_untrusted_family(seed):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((4, 2)) * 10.0 ** rng.uniform(-1, 1)
    cert = find_tverberg(pts, 1)
    assert cert is not None
    tol = 1e-6 * max(1.0, np.abs(pts).max())
    for part in cert.parts:
        assert hull_membership(pts[list(part)], cert.witness, tol).is_member
    family = enumerate_subsets(ResilienceProblem(pts, (), 1))
    for s in family:
        assert hull_membership(pts[list(s)], cert.witness, tol).is_member

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resilient_hull.linalg import hull_membership, kernel_projection

from oracles import FROZEN_TRIANGLE_DISTANCE, simplex_distance

TRIANGLE = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]


class TestHullMembership:
    def test_vertex(self):
        v = hull_membership(TRIANGLE, (0.0, 0.0))
        assert v.is_member
        np.testing.assert_allclose(v.certificate, [1.0, 0.0, 0.0], atol=1e-12)

    def test_segment_midpoint(self):
        v = hull_membership([(0.0, 0.0), (2.0, 0.0)], (1.0, 0.0))
        assert v.is_member
        assert v.distance == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(v.certificate, [0.5, 0.5], atol=1e-12)

    def test_outside_matches_grid(self):
        assert simplex_distance(TRIANGLE, (1.0, 1.0)) == pytest.approx(FROZEN_TRIANGLE_DISTANCE, abs=1e-12)
        v = hull_membership(TRIANGLE, (1.0, 1.0))
        assert not v.is_member
        assert v.certificate is None
        assert v.distance == pytest.approx(FROZEN_TRIANGLE_DISTANCE, abs=1e-9)

    def test_single_point(self):
        assert hull_membership([(1.0, 2.0)], (1.0, 2.0)).is_member
        v = hull_membership([(1.0, 2.0)], (4.0, 6.0))
        assert v.distance == pytest.approx(5.0)

    def test_tolerance_controls_verdict(self):
        q = (0.5, 0.5 + 1e-5)
        assert not hull_membership(TRIANGLE, q).is_member
        assert hull_membership(TRIANGLE, q, tol=1e-4).is_member

    def test_errors(self):
        with pytest.raises(ValueError):
            hull_membership(TRIANGLE, (0.0, 0.0, 0.0))
        with pytest.raises(ValueError):
            hull_membership([], (0.0,))
        with pytest.raises(ValueError):
            hull_membership(TRIANGLE, (0.0, 0.0), tol=0.0)
        with pytest.raises(ValueError):
            hull_membership([(np.nan, 0.0)], (0.0, 0.0))

    def test_deterministic(self):
        pts = np.random.default_rng(0).standard_normal((7, 2))
        a = hull_membership(pts, (0.1, 0.1))
        b = hull_membership(pts, (0.1, 0.1))
        np.testing.assert_array_equal(a.certificate, b.certificate)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 4), m=st.integers(1, 8))
def test_vertices_and_certificates(seed, n, m):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((m, n)) * 10.0 ** rng.uniform(-2, 2)
    if m > 2:
        pts[1] = pts[0]  # duplicates are allowed
    tol = 1e-7
    for q in pts:
        v = hull_membership(pts, q, tol)
        assert v.is_member
    q = rng.dirichlet(np.ones(m)) @ pts
    v = hull_membership(pts, q, tol)
    assert v.is_member
    a = v.certificate
    assert a.min() >= -tol
    assert abs(a.sum() - 1.0) <= tol
    assert np.linalg.norm(a @ pts - q) <= tol


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_far_point_distance_is_consistent(seed):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((5, 2))
    q = rng.standard_normal(2) * 20
    v = hull_membership(pts, q)
    # no point of the hull can be closer than the reported distance
    samples = rng.dirichlet(np.ones(5), size=2000) @ pts
    assert v.distance <= np.min(np.linalg.norm(samples - q, axis=1)) + 1e-9
    assert v.distance >= 0.0


class TestKernelProjection:
    def test_axis(self):
        np.testing.assert_allclose(kernel_projection([[0.0, 1.0]]), [[1.0, 0.0], [0.0, 0.0]], atol=1e-15)

    def test_hand_derived(self):
        P = kernel_projection([[3.0, -1.0]])
        np.testing.assert_allclose(P, np.array([[1.0, 3.0], [3.0, 9.0]]) / 10, atol=1e-14)
        np.testing.assert_allclose(P @ P, P, atol=1e-14)
        np.testing.assert_allclose(np.array([[3.0, -1.0]]) @ P, 0.0, atol=1e-14)

    def test_trivial_kernel(self):
        np.testing.assert_allclose(kernel_projection(np.eye(2)), np.zeros((2, 2)), atol=1e-15)

    def test_rank_deficient(self):
        with pytest.raises(ValueError):
            kernel_projection([[1.0, 2.0], [2.0, 4.0]])
        with pytest.raises(ValueError):
            kernel_projection(np.ones((3, 2)))

    def test_accepts_a_flat_row(self):
        np.testing.assert_allclose(kernel_projection([0.0, 1.0]), [[1.0, 0.0], [0.0, 0.0]], atol=1e-15)


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), cols=st.integers(1, 6), data=st.data())
def test_projector_properties(seed, cols, data):
    rows = data.draw(st.integers(1, cols))
    rng = np.random.default_rng(seed)
    # unit spectral norm, condition number at most 1e6
    U, _ = np.linalg.qr(rng.standard_normal((rows, rows)))
    V, _ = np.linalg.qr(rng.standard_normal((cols, cols)))
    s = np.exp(rng.uniform(np.log(1e-6), 0, rows))
    s[0] = 1.0
    A = U @ np.diag(s) @ V[:rows]
    P = kernel_projection(A)
    assert np.linalg.norm(P @ P - P) <= 1e-10
    assert np.linalg.norm(A @ P) <= 1e-10
    assert np.linalg.norm(P - P.T) <= 1e-12

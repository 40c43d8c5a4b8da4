import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
import mpmath
from scipy.linalg import null_space, orth

from manifold_mean.errors import DimensionMismatch, FullSpace, RankDeficient, SpectralGapTooSmall, WeightError
from manifold_mean.grassmann import (
    Subspace,
    average_derivative_check,
    average_subspaces,
    canonical_angles,
    complement,
    finsler_distance,
    graph_subspace,
    make_subspace,
    pairwise_spread,
    projection,
    random_orthogonal,
    random_subspace,
)


def span(*vectors):
    return make_subspace(np.stack(vectors, axis=1))


@st.composite
def subspace_pairs(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    n = draw(st.integers(2, 12))
    k = draw(st.integers(1, min(4, n - 1)))
    return random_subspace(rng, n, k), random_subspace(rng, n, k), rng


class TestConstruction:
    def test_make_subspace_orthonormalizes(self):
        F = make_subspace([[1.0, 1.0], [0.0, 1.0], [0.0, 0.0]])
        assert F.dim == 2 and F.ambient_dim == 3
        np.testing.assert_allclose(F.frame.T @ F.frame, np.eye(2), atol=1e-14)

    def test_rank_deficient(self):
        with pytest.raises(RankDeficient):
            make_subspace([[1.0, 2.0], [2.0, 4.0]])
        with pytest.raises(RankDeficient):
            make_subspace(np.ones((2, 3)))

    def test_frame_must_be_orthonormal(self):
        with pytest.raises(RankDeficient):
            Subspace(np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_frame_is_read_only(self):
        F = span([1.0, 0.0])
        with pytest.raises(ValueError):
            F.frame[0, 0] = 2.0

    def test_contains(self):
        F = span([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
        assert F.contains([3.0, -1.0, 0.0])
        assert not F.contains([0.0, 0.0, 1.0])


class TestDistance:
    def test_known_rotation(self):
        t = 0.3
        d = finsler_distance(span([1.0, 0.0]), span([np.cos(t), np.sin(t)]))
        assert abs(d - t) < 1e-15

    def test_tiny_angle_keeps_precision(self):
        t = 1e-9
        d = finsler_distance(span([1.0, 0.0, 0.0]), span([np.cos(t), np.sin(t), 0.0]))
        assert abs(d - t) < 1e-20

    def test_orthogonal_planes(self):
        assert finsler_distance(span([1.0, 0.0]), span([0.0, 1.0])) == pytest.approx(np.pi / 2)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            finsler_distance(span([1.0, 0.0, 0.0]), span([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]))

    @settings(max_examples=200, deadline=None)
    @given(subspace_pairs())
    def test_matches_high_precision_angles(self, pair):
        F, G, _ = pair
        with mpmath.workdps(40):
            A, B = mpmath.matrix(F.frame.tolist()), mpmath.matrix(G.frame.tolist())
            # sines of the canonical angles are singular values of (I - F F^T) G
            R = B - A * (A.T * B)
            sines = mpmath.svd_r(R, compute_uv=False)
            oracle = sorted((float(mpmath.asin(min(s, 1))) for s in sines), reverse=True)
        np.testing.assert_allclose(canonical_angles(F, G), oracle, atol=1e-9)

    @settings(max_examples=200, deadline=None)
    @given(subspace_pairs())
    def test_projection_gap_is_sine(self, pair):
        F, G, _ = pair
        gap = np.linalg.norm(projection(F) - projection(G), 2)
        assert abs(gap - np.sin(finsler_distance(F, G))) < 1e-9

    @settings(max_examples=100, deadline=None)
    @given(subspace_pairs())
    def test_symmetry_and_triangle(self, pair):
        F, G, rng = pair
        H = random_subspace(rng, F.ambient_dim, F.dim)
        assert finsler_distance(F, G) == finsler_distance(G, F) or abs(
            finsler_distance(F, G) - finsler_distance(G, F)) < 1e-15
        assert finsler_distance(F, H) <= finsler_distance(F, G) + finsler_distance(G, H) + 1e-9

    @settings(max_examples=200, deadline=None)
    @given(subspace_pairs())
    def test_duality(self, pair):
        F, G, _ = pair
        Fp = Subspace(orth(null_space(F.frame.T)))
        Gp = Subspace(orth(null_space(G.frame.T)))
        assert abs(finsler_distance(F, G) - finsler_distance(Fp, Gp)) < 1e-9


class TestComplementAndGraph:
    def test_complement_is_orthogonal(self, rng):
        F = random_subspace(rng, 7, 3)
        C = complement(F)
        assert C.dim == 4
        np.testing.assert_allclose(F.frame.T @ C.frame, 0.0, atol=1e-14)

    def test_complement_within(self, rng):
        W = random_subspace(rng, 6, 4)
        F = make_subspace(W.frame[:, :1] + W.frame[:, 1:2])
        C = complement(F, within=W)
        assert C.dim == 3
        np.testing.assert_allclose(F.frame.T @ C.frame, 0.0, atol=1e-14)
        for j in range(3):
            assert W.contains(C.frame[:, j])

    def test_full_space(self):
        with pytest.raises(FullSpace):
            complement(Subspace(np.eye(3)))

    @settings(max_examples=200, deadline=None)
    @given(subspace_pairs(), st.floats(1e-6, 50.0))
    def test_graph_formula(self, pair, scale):
        F, _, rng = pair
        u = rng.standard_normal((F.ambient_dim - F.dim, F.dim))
        u *= scale / np.linalg.norm(u, 2)
        assert abs(finsler_distance(F, graph_subspace(F, u)) - np.arctan(scale)) < 1e-9

    def test_graph_shape_checked(self, rng):
        F = random_subspace(rng, 4, 2)
        with pytest.raises(DimensionMismatch):
            graph_subspace(F, np.zeros((3, 2)))


class TestAveraging:
    def test_single_member(self, rng):
        F = random_subspace(rng, 5, 2)
        report = average_subspaces([(1.0, F)])
        assert finsler_distance(report.result, F) < 1e-12
        assert report.spectral_gap == pytest.approx(0.5)

    def test_bisector(self):
        t = 0.2
        report = average_subspaces([(0.5, span([1.0, 0.0])), (0.5, span([np.cos(t), np.sin(t)]))])
        assert finsler_distance(report.result, span([np.cos(t / 2), np.sin(t / 2)])) < 1e-12

    def test_orthogonal_pair_has_no_gap(self):
        with pytest.raises(SpectralGapTooSmall) as info:
            average_subspaces([(0.5, span([1.0, 0.0])), (0.5, span([0.0, 1.0]))])
        assert info.value.gap == pytest.approx(0.0)

    @pytest.mark.parametrize("weights", [(0.5, 0.4), (1.2, -0.2), (0.0, 1.0)])
    def test_bad_weights(self, weights):
        with pytest.raises(WeightError):
            average_subspaces([(weights[0], span([1.0, 0.0])), (weights[1], span([1.0, 0.1]))])

    def test_empty(self):
        with pytest.raises(WeightError):
            average_subspaces([])

    def test_mixed_dimensions(self):
        with pytest.raises(DimensionMismatch):
            average_subspaces([(0.5, span([1.0, 0.0, 0.0])), (0.5, span([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]))])

    def test_bound_and_equivariance(self, rng):
        for _ in range(50):
            n, k = 8, 3
            F = random_subspace(rng, n, k)
            members = []
            for _ in range(4):
                u = rng.standard_normal((n - k, k))
                members.append(graph_subspace(F, 0.1 * u / np.linalg.norm(u, 2)))
            fam = [(0.25, G) for G in members]
            eps = pairwise_spread(members)
            report = average_subspaces(fam)
            assert report.max_member_distance < np.arcsin(2 * eps)
            Q = random_orthogonal(rng, n)
            moved = average_subspaces([(w, G.transform(Q)) for w, G in fam]).result
            assert finsler_distance(moved, report.result.transform(Q)) < 1e-9

    def test_weighted_pair_is_pulled_to_heavier(self):
        t = 0.2
        a, b = span([1.0, 0.0]), span([np.cos(t), np.sin(t)])
        avg = average_subspaces([(0.9, a), (0.1, b)]).result
        assert finsler_distance(avg, a) < finsler_distance(avg, b)


class TestDerivativeCheck:
    def test_constant_family(self, rng):
        F, G = random_subspace(rng, 4, 2), None
        G = graph_subspace(F, 0.05 * rng.standard_normal((2, 2)))
        lhs, rhs = average_derivative_check(lambda mu: [(0.5, F), (0.5, G)], 0.0)
        assert lhs < 1e-9 and rhs < 1e-9

    def test_single_rotating_member(self):
        def family(mu):
            return [(1.0, span([np.cos(mu), np.sin(mu), 0.0]))]

        lhs, rhs = average_derivative_check(family, 0.1)
        assert lhs == pytest.approx(1.0, abs=1e-6)
        assert rhs == pytest.approx(8.0 * lhs)

    def test_one_rotating_of_two(self):
        def family(mu):
            return [(0.5, span([1.0, 0.0, 0.0])), (0.5, span([np.cos(0.1 + mu), 0.0, np.sin(0.1 + mu)]))]

        lhs, rhs = average_derivative_check(family, 0.0)
        assert lhs == pytest.approx(0.5, abs=1e-4)
        assert lhs <= rhs + 1e-4

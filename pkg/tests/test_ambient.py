import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from manifold_mean.ambient import AmbientSpace, distance, exp_map, log_map, parallel_transport
from manifold_mean.errors import BeyondInjectivity, DimensionMismatch
from manifold_mean.grassmann import random_orthogonal


def random_sphere_point(rng, space):
    x = rng.standard_normal(space.coord_dim)
    return space.radius * x / np.linalg.norm(x)


def random_tangent(rng, space, x, length=None):
    v = space.project_tangent(x, rng.standard_normal(space.coord_dim))
    if length is not None:
        v *= length / np.linalg.norm(v)
    return v


spheres = st.builds(AmbientSpace.sphere, st.integers(2, 5), st.sampled_from([0.5, 1.0, 3.0]))


class TestConstruction:
    def test_kinds(self):
        assert AmbientSpace.euclidean(3).coord_dim == 3
        assert AmbientSpace.sphere(2).coord_dim == 3
        assert AmbientSpace.sphere(2, 2.0).curvature_bound == 0.25
        assert AmbientSpace.euclidean(2).injectivity_radius == np.inf

    @pytest.mark.parametrize("args", [("torus", 2), ("euclidean", 1), ("sphere", 2, -1.0)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            AmbientSpace(*args)

    def test_check_point(self):
        s2 = AmbientSpace.sphere(2)
        s2.check_point([0.0, 0.0, 1.0])
        with pytest.raises(ValueError):
            s2.check_point([0.0, 0.0, 1.1])
        with pytest.raises(DimensionMismatch):
            s2.check_point([0.0, 1.0])

    def test_tangent_space(self):
        s2 = AmbientSpace.sphere(2)
        x = np.array([0.0, 0.6, 0.8])
        T = s2.tangent_space(x)
        assert T.dim == 2
        np.testing.assert_allclose(T.frame.T @ x, 0.0, atol=1e-15)


class TestEuclidean:
    def test_flat_kernels(self):
        E = AmbientSpace.euclidean(3)
        x, y, v = np.array([1.0, 2.0, 3.0]), np.array([0.0, -1.0, 2.0]), np.array([0.1, 0.2, 0.3])
        np.testing.assert_array_equal(E.exp(x, v), x + v)
        np.testing.assert_array_equal(E.log(x, y), y - x)
        np.testing.assert_array_equal(E.transport(x, y, v), v)
        assert E.distance(x, y) == pytest.approx(np.linalg.norm(y - x))

    def test_wrappers(self):
        E = AmbientSpace.euclidean(2)
        x, y = np.zeros(2), np.ones(2)
        assert distance(E, x, y) == pytest.approx(np.sqrt(2))
        np.testing.assert_array_equal(exp_map(E, x, log_map(E, x, y)), y)
        np.testing.assert_array_equal(parallel_transport(E, x, y, y), y)


class TestSphere:
    @settings(max_examples=100, deadline=None)
    @given(spheres, st.integers(0, 10**6), st.floats(0.0, 3.0))
    def test_exp_log_inverse(self, space, seed, frac):
        rng = np.random.default_rng(seed)
        x = random_sphere_point(rng, space)
        v = random_tangent(rng, space, x, frac * space.radius)
        y = space.exp(x, v)
        assert abs(np.linalg.norm(y) - space.radius) < 1e-12 * space.radius
        np.testing.assert_allclose(space.log(x, y), v, atol=1e-9 * space.radius)
        assert space.distance(x, y) == pytest.approx(np.linalg.norm(v), abs=1e-12 * space.radius)

    def test_distance_matches_arccos_oracle(self, rng):
        s = AmbientSpace.sphere(3, 2.0)
        for _ in range(100):
            x, y = random_sphere_point(rng, s), random_sphere_point(rng, s)
            oracle = 2.0 * np.arccos(np.clip(x @ y / 4.0, -1, 1))
            assert s.distance(x, y) == pytest.approx(oracle, rel=1e-10)

    def test_tiny_distance_is_accurate(self):
        s = AmbientSpace.sphere(2)
        t = 1e-10
        x = np.array([1.0, 0.0, 0.0])
        y = np.array([np.cos(t), np.sin(t), 0.0])
        assert s.distance(x, y) == pytest.approx(t, rel=1e-12)

    def test_near_antipodal_distance(self):
        s = AmbientSpace.sphere(2)
        t = np.pi - 1e-9
        assert s.distance(np.array([1.0, 0, 0]), np.array([np.cos(t), np.sin(t), 0])) == pytest.approx(t, rel=1e-14)

    def test_antipodal_log(self):
        s = AmbientSpace.sphere(2)
        with pytest.raises(BeyondInjectivity):
            s.log(np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, -1.0]))

    def test_exp_beyond_injectivity(self):
        s = AmbientSpace.sphere(2, 2.0)
        with pytest.raises(BeyondInjectivity):
            s.exp(np.array([0.0, 0.0, 2.0]), np.array([2.0 * np.pi, 0.0, 0.0]))

    def test_exp_zero(self):
        s = AmbientSpace.sphere(2)
        x = np.array([0.0, 1.0, 0.0])
        np.testing.assert_array_equal(s.exp(x, np.zeros(3)), x)
        np.testing.assert_array_equal(s.log(x, x), np.zeros(3))

    def test_broadcasting(self, rng):
        s = AmbientSpace.sphere(2)
        xs = np.array([random_sphere_point(rng, s) for _ in range(5)])
        vs = np.array([random_tangent(rng, s, x, 0.3) for x in xs])
        ys = s.exp(xs, vs)
        assert ys.shape == (5, 3)
        np.testing.assert_allclose(s.distance(xs, ys), 0.3, atol=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(spheres, st.integers(0, 10**6))
    def test_transport_is_isometric(self, space, seed):
        rng = np.random.default_rng(seed)
        x = random_sphere_point(rng, space)
        y = space.exp(x, random_tangent(rng, space, x, 1.5 * space.radius))
        v, w = random_tangent(rng, space, x), random_tangent(rng, space, x)
        tv, tw = space.transport(x, y, v), space.transport(x, y, w)
        assert abs(tv @ y) < 1e-10 * space.radius
        assert tv @ tw == pytest.approx(v @ w, rel=1e-10, abs=1e-12)

    def test_transport_of_velocity(self, rng):
        s = AmbientSpace.sphere(2, 1.5)
        x = random_sphere_point(rng, s)
        v = random_tangent(rng, s, x, 1.0)
        y = s.exp(x, v)
        # the geodesic velocity at y is -log_y(x)
        np.testing.assert_allclose(s.transport(x, y, v), -s.log(y, x), atol=1e-12)

    @pytest.mark.parametrize("radius", [1.0, 2.0])
    def test_holonomy_equals_enclosed_area(self, radius):
        # octant triangle: area pi R^2 / 2, so transport around it rotates by pi/2
        s = AmbientSpace.sphere(2, radius)
        a, b, c = radius * np.eye(3)
        v0 = np.array([0.0, 1.0, 0.0])
        v = s.transport(c, b, s.transport(b, a, s.transport(a, c, v0)))
        angle = np.arctan2(np.cross(v0, v) @ a / radius, v0 @ v)
        assert abs(abs(angle) - (np.pi * radius**2 / 2) / radius**2) < 1e-12

    def test_isometry(self, rng):
        s = AmbientSpace.sphere(3)
        Q = random_orthogonal(rng, 4)
        x, y = random_sphere_point(rng, s), random_sphere_point(rng, s)
        gx, gy = s.apply_isometry(Q, None, x), s.apply_isometry(Q, None, y)
        assert s.distance(gx, gy) == pytest.approx(s.distance(x, y), rel=1e-12)

import numpy as np
import pytest

from mobiray.rt.bvh import AccelIndex, intersect, intersect_brute

from conftest import quad_faces


def random_ray(rng, lo=-120.0, hi=120.0):
    origin = rng.uniform(lo, hi, 3)
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    return origin, direction


class TestIntersect:
    def _wall_at_x5(self):
        return [np.array([[5.0, -10, -10], [5.0, 10, -10], [5.0, 0, 10]])]

    def test_plane_distance(self):
        index = AccelIndex(np.stack(self._wall_at_x5()))
        hit = intersect(np.zeros(3), np.array([1.0, 0.0, 0.0]), index)
        assert hit is not None
        face, t, point = hit
        assert face == 0
        assert t == pytest.approx(5.0)
        np.testing.assert_allclose(point, [5.0, 0.0, 0.0], atol=1e-12)

    def test_miss_is_none(self):
        index = AccelIndex(np.stack(self._wall_at_x5()))
        assert intersect(np.zeros(3), np.array([-1.0, 0.0, 0.0]), index) is None

    def test_nearest_of_two_parallel(self):
        far = [np.array([[8.0, -10, -10], [8.0, 10, -10], [8.0, 0, 10]])]
        index = AccelIndex(np.stack(self._wall_at_x5() + far))
        face, t, _ = intersect(np.zeros(3), np.array([1.0, 0.0, 0.0]), index)
        assert face == 0
        assert t == pytest.approx(5.0)

    def test_zero_direction_rejected(self):
        index = AccelIndex(np.stack(self._wall_at_x5()))
        with pytest.raises(ValueError, match="non-zero"):
            intersect(np.zeros(3), np.zeros(3), index)

    def test_self_intersection_epsilon(self):
        index = AccelIndex(np.stack(self._wall_at_x5()))
        # Origin on the wall: the surface itself must not be reported.
        assert intersect(np.array([5.0, 0.0, 0.0]), np.array([1.0, 0, 0]), index) is None


class TestAgainstBruteForce:
    def _random_scene(self, rng, n_tris=60):
        tris = []
        for _ in range(n_tris):
            base = rng.uniform(-100, 100, 3)
            tris.append(np.stack([base,
                                  base + rng.normal(scale=12.0, size=3),
                                  base + rng.normal(scale=12.0, size=3)]))
        # Coplanar overlapping quads force exact distance ties.
        tris.extend(quad_faces([-30, -30, 0], [30, -30, 0], [30, 30, 0], [-30, 30, 0]))
        tris.extend(quad_faces([-10, -10, 0], [10, -10, 0], [10, 10, 0], [-10, 10, 0]))
        return np.stack(tris)

    def test_nearest_identical_random_rays(self):
        rng = np.random.default_rng(3)
        faces = self._random_scene(rng)
        index = AccelIndex(faces)
        for _ in range(2000):
            origin, direction = random_ray(rng)
            fast = index.nearest(origin, direction)
            slow = intersect_brute(origin, direction, faces)
            assert fast == slow

    def test_vertical_rays_hit_tied_planes(self):
        rng = np.random.default_rng(5)
        faces = self._random_scene(rng)
        index = AccelIndex(faces)
        # Straight-down rays over the overlapping quads: t ties exactly and
        # the smaller face index must win in both implementations.
        for _ in range(300):
            origin = np.array([rng.uniform(-9, 9), rng.uniform(-9, 9), rng.uniform(5, 50)])
            direction = np.array([0.0, 0.0, -1.0])
            fast = index.nearest(origin, direction)
            slow = intersect_brute(origin, direction, faces)
            assert fast == slow
            assert fast is not None

    def test_any_hit_windows(self):
        rng = np.random.default_rng(9)
        faces = self._random_scene(rng)
        index = AccelIndex(faces)
        for _ in range(500):
            origin, direction = random_ray(rng)
            hit = intersect_brute(origin, direction, faces)
            t_max = rng.uniform(1.0, 300.0)
            expected = hit is not None and 1e-6 < hit[1] < t_max
            assert index.any_hit(origin, direction, 1e-6, t_max) == expected

    def test_empty_index(self):
        index = AccelIndex(np.zeros((0, 3, 3)))
        assert index.nearest(np.zeros(3), np.array([1.0, 0, 0])) is None
        assert not index.any_hit(np.zeros(3), np.array([1.0, 0, 0]), 1e-6, 10.0)

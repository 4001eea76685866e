import itertools
import math

import numpy as np
import pytest

from pointscale.errors import DataError
from pointscale.geometry import (
    FpsConfig,
    chamfer,
    emd_approx,
    emd_exact,
    fps,
    normalize_cloud,
    pairwise_sqdist,
)


def chamfer_oracle(a, b):
    """Double-loop nearest-neighbor oracle."""
    term_a = 0.0
    for x in a:
        term_a += min(float(np.dot(x - y, x - y)) for y in b)
    term_b = 0.0
    for y in b:
        term_b += min(float(np.dot(x - y, x - y)) for x in a)
    return term_a / len(a) + term_b / len(b)


def emd_oracle(a, b):
    """Exhaustive search over all bijections."""
    n = len(a)
    best = math.inf
    for perm in itertools.permutations(range(n)):
        total = sum(float(np.linalg.norm(a[i] - b[perm[i]])) for i in range(n))
        best = min(best, total)
    return best / n


def random_cloud(rng, n):
    return rng.standard_normal((n, 3))


class TestNormalize:
    def test_cube_corners_recentred_and_scaled(self):
        corners = np.array(list(itertools.product([0.0, 1.0], repeat=3))) + 4.5
        out = normalize_cloud(corners)
        assert np.abs(out.mean(axis=0)).max() < 1e-9
        norms = np.linalg.norm(out, axis=1)
        assert norms.max() == pytest.approx(1.0, abs=1e-12)
        # Relative geometry: all pairwise distance ratios preserved.
        d_in = pairwise_sqdist(corners, corners)
        d_out = pairwise_sqdist(out, out)
        mask = d_in > 0
        ratio = d_out[mask] / d_in[mask]
        assert ratio.max() - ratio.min() < 1e-12

    def test_idempotent(self):
        rng = np.random.default_rng(7)
        cloud = normalize_cloud(random_cloud(rng, 50))
        again = normalize_cloud(cloud)
        assert np.abs(again - cloud).max() < 1e-12

    def test_torus_sample_centroid_and_radius(self):
        rng = np.random.default_rng(3)
        theta = rng.uniform(0, 2 * np.pi, 2048)
        phi = rng.uniform(0, 2 * np.pi, 2048)
        pts = np.stack(
            [
                (1.0 + 0.3 * np.cos(phi)) * np.cos(theta),
                (1.0 + 0.3 * np.cos(phi)) * np.sin(theta),
                0.3 * np.sin(phi),
            ],
            axis=1,
        )
        out = normalize_cloud(pts + np.array([2.0, -1.0, 0.5]))
        assert np.linalg.norm(out.mean(axis=0)) < 1e-9
        assert 1 - 1e-9 <= np.linalg.norm(out, axis=1).max() <= 1.0

    def test_zero_extent_rejected(self):
        with pytest.raises(DataError, match="zero extent"):
            normalize_cloud(np.ones((5, 3)))

    def test_storage_order_invariant_bitwise(self):
        rng = np.random.default_rng(11)
        cloud = random_cloud(rng, 40)
        out = normalize_cloud(cloud)
        perm = rng.permutation(40)
        out_perm = normalize_cloud(cloud[perm])
        assert np.array_equal(out_perm, out[perm])


class TestFps:
    def test_square_diagonal(self):
        square = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float)
        idx = fps(square, 2)
        a, b = square[idx]
        assert np.dot(a - b, a - b) == pytest.approx(2.0)

    def test_full_sample_is_permutation(self):
        rng = np.random.default_rng(0)
        cloud = random_cloud(rng, 17)
        idx = fps(cloud, 17)
        assert sorted(idx.tolist()) == list(range(17))

    def test_beats_random_subsets_on_min_distance(self):
        rng = np.random.default_rng(5)
        z = rng.standard_normal((100, 3))
        sphere = z / np.linalg.norm(z, axis=1, keepdims=True)
        idx = fps(sphere, 10)

        def min_pairwise(points):
            d = pairwise_sqdist(points, points)
            return np.sqrt(d[np.triu_indices(len(points), 1)].min())

        fps_min = min_pairwise(sphere[idx])
        for _ in range(1000):
            subset = rng.choice(100, size=10, replace=False)
            assert fps_min >= min_pairwise(sphere[subset]) - 1e-12

    def test_bounds_rejected(self):
        cloud = np.eye(3)
        with pytest.raises(DataError):
            fps(cloud, 0)
        with pytest.raises(DataError):
            fps(cloud, 4)

    @pytest.mark.parametrize("n", [5, 6])
    def test_deterministic_storage_order_invariance_exhaustive(self, n):
        rng = np.random.default_rng(n)
        cloud = random_cloud(rng, n)
        base = cloud[fps(cloud, 3)]
        for perm in itertools.permutations(range(n)):
            shuffled = cloud[list(perm)]
            picked = shuffled[fps(shuffled, 3)]
            assert np.array_equal(picked, base)

    def test_deterministic_storage_order_invariance_statistical(self):
        rng = np.random.default_rng(123)
        cloud = random_cloud(rng, 64)
        base = cloud[fps(cloud, 12)]
        for _ in range(100):
            perm = rng.permutation(64)
            shuffled = cloud[perm]
            assert np.array_equal(shuffled[fps(shuffled, 12)], base)

    def test_stochastic_storage_order_invariance_and_seed_diversity(self):
        rng = np.random.default_rng(9)
        cloud = random_cloud(rng, 64)
        cfg = FpsConfig(mode="stochastic", seed=42)
        base = cloud[fps(cloud, 8, cfg)]
        perm = rng.permutation(64)
        shuffled = cloud[perm]
        assert np.array_equal(shuffled[fps(shuffled, 8, cfg)], base)
        starts = {fps(cloud, 1, FpsConfig(mode="stochastic", seed=s))[0] for s in range(20)}
        assert len(starts) > 1

    def test_duplicate_points_are_interchangeable(self):
        cloud = np.array([[0, 0, 0], [0, 0, 0], [1, 0, 0], [1, 0, 0]], dtype=float)
        idx = fps(cloud, 2)
        picked = {tuple(cloud[i]) for i in idx}
        assert picked == {(0.0, 0.0, 0.0), (1.0, 0.0, 0.0)}


class TestChamfer:
    def test_identical_sets_zero(self):
        rng = np.random.default_rng(1)
        cloud = random_cloud(rng, 30)
        assert chamfer(cloud, cloud[rng.permutation(30)]) == 0.0

    def test_hand_computed_pair(self):
        a = np.array([[0.0, 0.0, 0.0]])
        b = np.array([[1.0, 0.0, 0.0]])
        assert chamfer(a, b) == pytest.approx(2.0)

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(2)
        a = random_cloud(rng, 64)
        b = random_cloud(rng, 64)
        assert chamfer(a, b) == pytest.approx(chamfer_oracle(a, b), abs=1e-12)

    def test_matches_oracle_unequal_sizes(self):
        rng = np.random.default_rng(8)
        a = random_cloud(rng, 17)
        b = random_cloud(rng, 41)
        assert chamfer(a, b) == pytest.approx(chamfer_oracle(a, b), abs=1e-12)

    def test_symmetric_nonnegative(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            a = random_cloud(rng, 12)
            b = random_cloud(rng, 20)
            d = chamfer(a, b)
            assert d >= 0
            assert d == pytest.approx(chamfer(b, a), abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            chamfer(np.empty((0, 3)), np.zeros((1, 3)))


class TestEmdExact:
    def test_identical_zero(self):
        rng = np.random.default_rng(6)
        cloud = random_cloud(rng, 16)
        assert emd_exact(cloud, cloud[rng.permutation(16)]) == pytest.approx(0.0, abs=1e-15)

    def test_two_point_matching(self):
        a = np.array([[0.0, 0, 0], [1.0, 0, 0]])
        b = np.array([[0.0, 0, 0], [2.0, 0, 0]])
        assert emd_exact(a, b) == pytest.approx(0.5)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_factorial_oracle_n7(self, seed):
        rng = np.random.default_rng(seed)
        a = random_cloud(rng, 7)
        b = random_cloud(rng, 7)
        assert emd_exact(a, b) == pytest.approx(emd_oracle(a, b), abs=1e-12)

    def test_matches_factorial_oracle_n8(self):
        rng = np.random.default_rng(99)
        a = random_cloud(rng, 8)
        b = random_cloud(rng, 8)
        assert emd_exact(a, b) == pytest.approx(emd_oracle(a, b), abs=1e-12)

    def test_size_mismatch_and_cap(self):
        rng = np.random.default_rng(0)
        with pytest.raises(DataError):
            emd_exact(random_cloud(rng, 3), random_cloud(rng, 4))
        big = random_cloud(rng, 20)
        with pytest.raises(DataError, match="emd_approx"):
            emd_exact(big, big, cap=16)

    def test_symmetric(self):
        rng = np.random.default_rng(21)
        a = random_cloud(rng, 10)
        b = random_cloud(rng, 10)
        assert emd_exact(a, b) == pytest.approx(emd_exact(b, a), abs=1e-12)


class TestEmdApprox:
    def test_identical_near_zero(self):
        rng = np.random.default_rng(3)
        cloud = normalize_cloud(random_cloud(rng, 32))
        result = emd_approx(cloud, cloud, epsilon=0.01, iters=500)
        assert result.value < 1e-6

    def test_close_to_exact_n64(self):
        rng = np.random.default_rng(12)
        a = normalize_cloud(random_cloud(rng, 64))
        b = normalize_cloud(random_cloud(rng, 64))
        exact = emd_exact(a, b)
        approx = emd_approx(a, b, epsilon=0.005, iters=500).value
        assert abs(approx - exact) / exact < 0.02

    def test_monotone_refinement_in_epsilon(self):
        rng = np.random.default_rng(13)
        a = normalize_cloud(random_cloud(rng, 24))
        b = normalize_cloud(random_cloud(rng, 24))
        exact = emd_exact(a, b)
        previous = math.inf
        for epsilon in (0.04, 0.02, 0.01, 0.005):
            value = emd_approx(a, b, epsilon=epsilon, iters=3000).value
            assert value <= previous + 1e-9
            assert value >= exact - 1e-6
            previous = value

    def test_parameter_validation(self):
        cloud = np.eye(3)
        with pytest.raises(DataError):
            emd_approx(cloud, cloud, epsilon=0.0)
        with pytest.raises(DataError):
            emd_approx(cloud, cloud, iters=0)
        with pytest.raises(DataError):
            emd_approx(np.eye(3), np.zeros((2, 3)))

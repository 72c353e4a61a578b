"""Tests for the data sources and their spectral ground truth."""

import numpy as np
import pytest

from incpca.distributions import (
    CoordinateDistribution,
    DatasetStream,
    GaussianSpectrum,
    empirical_ground_truth,
    load_ground_truth,
    random_unit_vector,
    random_unit_vectors,
    save_ground_truth,
    trial_rng,
)


def test_trial_rng_deterministic_and_distinct():
    a = trial_rng(42, 0).standard_normal(4)
    b = trial_rng(42, 0).standard_normal(4)
    c = trial_rng(42, 1).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


class TestCoordinateDistribution:
    def test_ground_truth_values(self):
        dist = CoordinateDistribution(p=0.2, sigma=0.5, d=10)
        gt = dist.ground_truth()
        assert gt.lambda1 == pytest.approx(0.2)
        assert gt.lambda2 == pytest.approx(0.25 * 0.8 / 9)
        assert gt.B == 1.0
        assert np.array_equal(gt.v_star, np.eye(10)[0])
        assert gt.gap == pytest.approx(0.2 - 0.25 * 0.8 / 9)

    def test_covariance_is_diagonal_with_stated_spectrum(self):
        dist = CoordinateDistribution(p=0.2, sigma=0.5, d=4)
        A = dist.covariance()
        off = 0.25 * 0.8 / 3
        assert np.allclose(A, np.diag([0.2, off, off, off]))

    def test_gap_condition_enforced(self):
        # sigma^2 (1-p)/(d-1) must stay below p
        with pytest.raises(ValueError):
            CoordinateDistribution(p=0.01, sigma=0.9, d=2)

    def test_samples_live_on_the_stated_support(self):
        dist = CoordinateDistribution(p=0.3, sigma=0.5, d=5)
        X = dist.sample_block(np.random.default_rng(0), 2000)
        assert X.shape == (2000, 5)
        nz = np.count_nonzero(X, axis=1)
        assert np.all(nz == 1)
        vals = X[np.nonzero(X)]
        assert set(np.round(np.abs(vals), 12)) <= {1.0, 0.5}
        # the heavy coordinate only ever carries the +-1 mass
        heavy = X[:, 0] != 0
        assert np.all(np.abs(X[heavy, 0]) == 1.0)
        assert np.all(np.abs(X[~heavy][np.nonzero(X[~heavy])]) == 0.5)

    def test_empirical_first_coordinate_frequency(self):
        dist = CoordinateDistribution(p=0.3, sigma=0.5, d=5)
        X = dist.sample_block(np.random.default_rng(1), 40000)
        freq = np.mean(X[:, 0] != 0)
        assert freq == pytest.approx(0.3, abs=0.01)

    def test_norm_bound(self):
        dist = CoordinateDistribution(p=0.5, sigma=0.8, d=3)
        X = dist.sample_block(np.random.default_rng(2), 500)
        assert np.all(np.linalg.norm(X, axis=1) <= 1.0)


class TestGaussianSpectrum:
    def test_spectrum_validation(self):
        with pytest.raises(ValueError):
            GaussianSpectrum([1.0, 1.0, 0.5])  # no gap at the top
        with pytest.raises(ValueError):
            GaussianSpectrum([1.0, 0.5, -0.1])

    def test_ground_truth_matches_rotation(self):
        rng = np.random.default_rng(9)
        Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        dist = GaussianSpectrum([2.0, 1.0, 0.5], rotation=Q)
        gt = dist.ground_truth()
        assert gt.lambda1 == pytest.approx(2.0)
        assert gt.lambda2 == pytest.approx(1.0)
        assert np.linalg.norm(gt.v_star) == pytest.approx(1.0)
        A = Q @ np.diag([2.0, 1.0, 0.5]) @ Q.T
        assert np.allclose(A @ gt.v_star, 2.0 * gt.v_star, atol=1e-12)

    def test_sample_covariance_close(self):
        dist = GaussianSpectrum([2.0, 1.0, 0.5])
        X = dist.sample_block(np.random.default_rng(4), 200_000)
        S = X.T @ X / len(X)
        assert np.allclose(S, np.diag([2.0, 1.0, 0.5]), atol=0.05)

    def test_clipping_bounds_squared_norms(self):
        dist = GaussianSpectrum([2.0, 1.0, 0.5], clip_radius=2.0)
        X, rejected = dist.sample_block(
            np.random.default_rng(5), 5000, return_rejections=True
        )
        assert np.all(np.einsum("ij,ij->i", X, X) <= 2.0)
        assert rejected > 0
        assert dist.B == 2.0


def test_random_unit_vectors_are_unit_norm():
    rng = np.random.default_rng(12)
    V = random_unit_vectors(7, 100, rng)
    assert V.shape == (100, 7)
    assert np.allclose(np.linalg.norm(V, axis=1), 1.0, atol=1e-12)
    v = random_unit_vector(7, np.random.default_rng(12))
    assert np.linalg.norm(v) == pytest.approx(1.0)


class TestDatasetStream:
    def _write(self, path, rows, header=None):
        with open(path, "w") as fh:
            if header:
                fh.write(header + "\n")
            for r in rows:
                fh.write(",".join(repr(x) for x in r) + "\n")

    def test_round_trip_and_centering(self, tmp_path):
        path = tmp_path / "data.csv"
        rows = [(1.0, 2.0), (3.0, 4.0), (5.0, 0.0)]
        self._write(path, rows)
        stream = DatasetStream(path, center=True)
        X = np.array(list(stream))
        assert np.allclose(X.mean(axis=0), 0.0, atol=1e-12)
        assert np.allclose(stream.mean(), [3.0, 2.0])

    def test_header_skip_and_parse_errors(self, tmp_path):
        path = tmp_path / "data.csv"
        self._write(path, [(1.0, 2.0)], header="x,y")
        stream = DatasetStream(path)
        assert len(list(stream)) == 1
        bad = tmp_path / "bad.csv"
        bad.write_text("1.0,2.0\n1.0,oops\n")
        with pytest.raises(ValueError, match="line 2"):
            list(DatasetStream(bad))

    def test_empirical_ground_truth_recovers_planted_direction(self, tmp_path):
        dist = CoordinateDistribution(p=0.4, sigma=0.4, d=4)
        X = dist.sample_block(np.random.default_rng(21), 50000)
        path = tmp_path / "samples.csv"
        np.savetxt(path, X, delimiter=",")
        gt = empirical_ground_truth(DatasetStream(path))
        assert abs(gt.v_star[0]) > 0.999
        assert gt.lambda1 == pytest.approx(0.4, abs=0.02)
        assert not gt.rank_deficient
        assert not gt.degenerate_gap

    def test_empirical_ground_truth_flags_degenerate_input(self, tmp_path):
        path = tmp_path / "flat.csv"
        path.write_text("1.0,0.0,0.0\n" * 10)
        gt = empirical_ground_truth(DatasetStream(path))
        assert gt.degenerate_gap

    def test_empirical_ground_truth_flags_rank_deficiency(self, tmp_path):
        path = tmp_path / "short.csv"
        path.write_text("1.0,0.0,0.0\n0.0,1.0,0.0\n")
        gt = empirical_ground_truth(DatasetStream(path))
        assert gt.rank_deficient


def test_ground_truth_cache_round_trip(tmp_path):
    dist = CoordinateDistribution(p=0.2, sigma=0.5, d=6)
    gt = dist.ground_truth()
    path = tmp_path / "gt.csv"
    save_ground_truth(path, gt)
    back = load_ground_truth(path)
    assert np.array_equal(back.v_star, gt.v_star)
    assert back.lambda1 == gt.lambda1
    assert back.lambda2 == gt.lambda2
    assert back.B == gt.B
    assert back.degenerate_gap == gt.degenerate_gap
    assert back.rank_deficient == gt.rank_deficient

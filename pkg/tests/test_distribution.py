import numpy as np
import pytest

from rankabstain.distribution import (BipartiteDistribution,
                                      GeneralDistribution, dumps_bipartite,
                                      dumps_general, loads_bipartite,
                                      loads_general, random_bipartite,
                                      random_general, sample_bipartite,
                                      sample_general)


def two_pair_dist(eta=(1.0, 0.0)):
    return GeneralDistribution(
        xs=np.array([[0.1, 0.0], [-0.2, 0.3]]),
        xps=np.array([[0.4, 0.1], [0.0, -0.5]]),
        weights=np.array([0.5, 0.5]),
        eta=np.array(eta),
    )


class TestValidation:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            GeneralDistribution(np.zeros((1, 2)), np.ones((1, 2)) * 0.1,
                                np.array([0.9]), np.array([0.5]))

    def test_eta_range(self):
        with pytest.raises(ValueError):
            two_pair_dist(eta=(1.2, 0.0))

    def test_points_inside_unit_ball(self):
        with pytest.raises(ValueError):
            BipartiteDistribution(np.array([[2.0, 0.0]]), np.array([1.0]),
                                  np.array([0.5]))

    def test_degenerate_pair_forced_to_half(self):
        d = GeneralDistribution(np.array([[0.1, 0.2]]), np.array([[0.1, 0.2]]),
                                np.array([1.0]), np.array([0.9]))
        assert d.eta[0] == 0.5

    def test_empty_support_rejected(self):
        with pytest.raises(ValueError):
            BipartiteDistribution(np.zeros((0, 2)), np.array([]), np.array([]))


class TestSampling:
    def test_reproducible(self):
        d = two_pair_dist(eta=(0.4, 0.7))
        a = sample_general(d, 100, seed=5)
        b = sample_general(d, 100, seed=5)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_eta_one_all_positive(self):
        d = two_pair_dist(eta=(1.0, 1.0))
        _, _, y = sample_general(d, 200, seed=0)
        assert np.all(y == 1)

    def test_eta_zero_all_negative(self):
        d = two_pair_dist(eta=(0.0, 0.0))
        _, _, y = sample_general(d, 200, seed=0)
        assert np.all(y == -1)

    def test_pair_frequencies_within_3_sigma(self):
        d = two_pair_dist()
        n = 100_000
        xs, _, _ = sample_general(d, n, seed=42)
        frac = np.mean(np.all(xs == d.xs[0], axis=1))
        sigma = np.sqrt(0.25 / n)
        assert abs(frac - 0.5) <= 3 * sigma

    def test_label_mean_within_3_sigma(self):
        d = BipartiteDistribution(np.array([[0.2, 0.1]]), np.array([1.0]),
                                  np.array([0.5]))
        n = 10_000
        _, y = sample_bipartite(d, n, seed=1)
        assert abs(np.mean(y)) <= 3 / np.sqrt(n)

    def test_zero_weight_point_never_drawn(self):
        d = BipartiteDistribution(np.array([[0.2, 0.1], [-0.3, 0.4]]),
                                  np.array([1.0, 0.0]), np.array([0.5, 0.5]))
        pts, _ = sample_bipartite(d, 500, seed=2)
        assert np.all(np.all(pts == d.points[0], axis=1))

    def test_label_frequency_per_atom_converges(self):
        d = two_pair_dist(eta=(0.3, 0.8))
        n = 100_000
        xs, _, y = sample_general(d, n, seed=9)
        for i, eta in enumerate(d.eta):
            mask = np.all(xs == d.xs[i], axis=1)
            frac = np.mean(y[mask] == 1)
            sigma = np.sqrt(eta * (1 - eta) / mask.sum())
            assert abs(frac - eta) <= 3 * sigma

    def test_rejects_empty_sample(self):
        with pytest.raises(ValueError):
            sample_general(two_pair_dist(), 0, seed=0)


class TestFileFormat:
    def test_general_round_trip(self):
        d = random_general(np.random.default_rng(0), 4, 2)
        d2 = loads_general(dumps_general(d))
        assert np.array_equal(d2.xs, d.xs)
        assert np.array_equal(d2.xps, d.xps)
        assert np.array_equal(d2.weights, d.weights)
        assert np.array_equal(d2.eta, d.eta)

    def test_bipartite_round_trip(self):
        d = random_bipartite(np.random.default_rng(1), 5, 2)
        d2 = loads_bipartite(dumps_bipartite(d))
        assert np.array_equal(d2.points, d.points)
        assert np.array_equal(d2.weights, d.weights)

    def test_comments_and_blank_lines_ignored(self):
        text = "# header\n\n0.1 0.2 ; 0.3 0.4 ; 1.0 ; 0.5  # trailing\n"
        d = loads_general(text)
        assert d.n_atoms == 1

    def test_error_reports_line_number(self):
        with pytest.raises(ValueError, match="line 2"):
            loads_general("0 0 ; 0.1 0 ; 1.0 ; 0.5\nbad line ; ; ;\n")

    def test_bad_coordinates_rejected(self):
        with pytest.raises(ValueError, match="line 1"):
            loads_bipartite("a b ; 1.0 ; 0.5\n")

    def test_empty_file_rejected(self):
        with pytest.raises(ValueError):
            loads_general("# nothing here\n")


class TestPairDists:
    def test_matrix_symmetric_zero_diagonal(self):
        d = random_bipartite(np.random.default_rng(3), 4, 2)
        pd = d.pair_dists()
        assert np.allclose(pd, pd.T)
        assert np.all(np.diag(pd) == 0)

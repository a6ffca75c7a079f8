"""Tests for the min-size Sinkhorn allocation."""

import unittest

import numpy as np
from scipy.special import logsumexp

from fewshot_ot.transport.sinkhorn import (
    Marginals,
    SinkhornError,
    cost_matrix,
    min_size_sinkhorn,
    row_normalize_final,
)
from tests.helpers import unit_rows


def log_domain_sinkhorn(C, a, b, lam, iters=5000):
    """Independent two-sided entropic OT solver."""
    log_k = -lam * C
    f = np.zeros(C.shape[0])
    g = np.zeros(C.shape[1])
    for _ in range(iters):
        f = np.log(a) - logsumexp(log_k + g[None, :], axis=1)
        g = np.log(b) - logsumexp(log_k + f[:, None], axis=0)
    return np.exp(log_k + f[:, None] + g[None, :])


class TestCostMatrix(unittest.TestCase):
    """Test cases for the cosine cost."""

    def test_range_and_values(self):
        """Test C = 1 - F W within [0, 2]."""
        rng = np.random.default_rng(0)
        F = unit_rows(rng, 10, 4)
        W = unit_rows(rng, 3, 4).T
        C = cost_matrix(F, W)
        np.testing.assert_allclose(C, 1.0 - F @ W, atol=1e-12)
        self.assertTrue(np.all((C >= 0) & (C <= 2)))
        self.assertAlmostEqual(cost_matrix(F[:1], F[:1].T)[0, 0], 0.0, places=12)

    def test_requires_unit_norm(self):
        """Test norm checks on both operands."""
        F = np.array([[2.0, 0.0]])
        W = np.array([[1.0], [0.0]])
        with self.assertRaises(ValueError):
            cost_matrix(F, W)
        with self.assertRaises(ValueError):
            cost_matrix(W.T, 2 * W)


class TestMinSizeSinkhorn(unittest.TestCase):
    """Test cases for the allocation."""

    def test_marginals_on_random_instances(self):
        """Test row sums and column floors on 80 x 5 instances."""
        rng = np.random.default_rng(1)
        marginals = Marginals.min_size(80, 5, 4)
        for _ in range(100):
            C = rng.uniform(0, 2, size=(80, 5))
            P = min_size_sinkhorn(C, marginals, lam=8.5, iters=50)
            self.assertTrue(np.all(P > 0))
            self.assertLessEqual(np.max(np.abs(P.sum(axis=1) - 1.0)), 1e-2)
            self.assertTrue(np.all(P.sum(axis=0) >= 4 - 1e-2))

    def test_matches_two_sided_oracle_with_exact_targets(self):
        """Test agreement with log-domain Sinkhorn when floors sum to the total mass."""
        rng = np.random.default_rng(2)
        for _ in range(20):
            C = rng.uniform(0, 2, size=(6, 3))
            P = min_size_sinkhorn(C, Marginals.exact(6, [2, 2, 2]), lam=8.5, iters=3000)
            oracle = log_domain_sinkhorn(C, np.ones(6), np.full(3, 2.0), 8.5)
            np.testing.assert_allclose(P, oracle, atol=1e-4)

    def test_scaling_form(self):
        """Test that log P + lambda C = u_i + v_j (all 2 x 2 minors vanish)."""
        rng = np.random.default_rng(3)
        for _ in range(10):
            C = rng.uniform(0, 2, size=(5, 3))
            P = min_size_sinkhorn(C, Marginals.min_size(5, 3, 1.5), lam=8.5)
            M = np.log(P) + 8.5 * C
            for i in range(5):
                for k in range(i + 1, 5):
                    for j in range(3):
                        for l in range(j + 1, 3):
                            minor = M[i, j] + M[k, l] - M[i, l] - M[k, j]
                            self.assertLess(abs(minor), 1e-8)

    def test_columns_above_floor_are_not_pulled_down(self):
        """Test that a popular class keeps more than its floor."""
        C = np.array([[0.0, 1.0, 1.0]] * 6 + [[1.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
        P = min_size_sinkhorn(C, Marginals.min_size(8, 3, 2), lam=8.5, iters=200)
        P = row_normalize_final(P, np.ones(8))
        columns = P.sum(axis=0)
        self.assertGreater(columns[0], 3.0)
        self.assertTrue(np.all(columns >= 2 - 1e-2))

    def test_entropy_decreases_with_lambda(self):
        """Test that larger lambda gives sharper allocations."""
        C = np.random.default_rng(4).uniform(0, 2, size=(30, 4))
        marginals = Marginals.min_size(30, 4, 1)

        def entropy(P):
            P = row_normalize_final(P, np.ones(30))
            return float(-(P * np.log(P)).sum())

        entropies = [entropy(min_size_sinkhorn(C, marginals, lam)) for lam in (1.0, 4.0, 8.5, 20.0)]
        for wider, sharper in zip(entropies, entropies[1:]):
            self.assertGreater(wider, sharper)

    def test_constant_cost_gives_uniform_allocation(self):
        """Test that a constant cost spreads every row evenly."""
        C = np.full((80, 5), 0.7)
        for marginals in (Marginals.min_size(80, 5, 4), Marginals.exact(80, [16] * 5)):
            P = row_normalize_final(min_size_sinkhorn(C, marginals), np.ones(80))
            np.testing.assert_allclose(P, 0.2, atol=1e-12)

    def test_column_permutation_equivariance(self):
        """Test that permuting classes and their targets permutes the columns of P."""
        rng = np.random.default_rng(6)
        targets = np.array([10.0, 14.0, 16.0, 18.0, 22.0])
        perm = np.array([3, 0, 4, 1, 2])
        for _ in range(5):
            C = rng.uniform(0, 2, size=(80, 5))
            for marginals, permuted in (
                (Marginals.min_size(80, 5, 4), Marginals.min_size(80, 5, 4)),
                (Marginals.exact(80, targets), Marginals.exact(80, targets[perm])),
            ):
                P = min_size_sinkhorn(C, marginals)
                np.testing.assert_allclose(min_size_sinkhorn(C[:, perm], permuted), P[:, perm], atol=1e-12)

    def test_large_lambda_gives_one_hot_rows(self):
        """Test near-hard assignments at lambda = 200."""
        rng = np.random.default_rng(7)
        labels = np.arange(80) % 5
        C = rng.uniform(0.5, 2.0, size=(80, 5))
        C[np.arange(80), labels] = rng.uniform(0.0, 0.3, size=80)
        P = row_normalize_final(min_size_sinkhorn(C, Marginals.min_size(80, 5, 4), lam=200.0), np.ones(80))
        np.testing.assert_array_equal(np.argmax(P, axis=1), labels)
        self.assertGreater(P.max(axis=1).min(), 1.0 - 1e-9)

    def test_early_stop_keeps_fixed_point(self):
        """Test that extra rounds do not move an allocation whose floors are met."""
        C = np.random.default_rng(8).uniform(0, 2, size=(40, 4))
        marginals = Marginals.min_size(40, 4, 2)
        np.testing.assert_array_equal(
            min_size_sinkhorn(C, marginals, iters=50, tol=0.0),
            min_size_sinkhorn(C, marginals, iters=500, tol=0.0),
        )

    def test_row_normalize_final(self):
        """Test exact row targets."""
        P = np.random.default_rng(5).uniform(0.1, 1.0, size=(7, 3))
        out = row_normalize_final(P, np.ones(7))
        np.testing.assert_allclose(out.sum(axis=1), 1.0)

    def test_invalid_arguments(self):
        """Test argument validation."""
        C = np.ones((4, 2))
        with self.assertRaises(ValueError):
            min_size_sinkhorn(C, Marginals.min_size(4, 2, 1), lam=0)
        with self.assertRaises(ValueError):
            min_size_sinkhorn(C, Marginals.min_size(5, 2, 1))
        with self.assertRaises(ValueError):
            Marginals(np.ones(4), np.zeros(2))

    def test_underflow_raises(self):
        """Test that an empty column at huge lambda is reported."""
        C = np.array([[0.0, 2.0], [0.0, 2.0]])
        with self.assertLogs("fewshot_ot.transport.sinkhorn", level="WARNING"):
            with self.assertRaises(SinkhornError):
                min_size_sinkhorn(C, Marginals.min_size(2, 2, 1), lam=1e4)


if __name__ == '__main__':
    unittest.main()

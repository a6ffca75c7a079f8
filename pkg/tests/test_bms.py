"""Tests for the Boosted Min-size Sinkhorn classifier."""

import time
import unittest

import numpy as np

from fewshot_ot.bms.refine import (
    RefinementError,
    logistic_gradients,
    logistic_loss,
    logistic_refine,
)
from fewshot_ot.bms.solver import (
    BmsConfig,
    BmsMode,
    estimate_min_size,
    predict,
    run_bms,
    solve,
)
from fewshot_ot.bms.weights import DegenerateWeightsError, init_weights, prototype_update
from fewshot_ot.preprocess.transforms import ProcessedEpisode
from fewshot_ot.transport.sinkhorn import cost_matrix
from tests.helpers import processed_episode, separated_store, unit_rows


class TestWeights(unittest.TestCase):
    """Test cases for prototype initialization and updates."""

    def setUp(self):
        """Set up random unit rows."""
        self.rng = np.random.default_rng(0)
        self.features = unit_rows(self.rng, 12, 5)
        self.labels = np.repeat(np.arange(3), 4)

    def test_one_shot_init_is_support(self):
        """Test that 1-shot weights are the support vectors."""
        W = init_weights(self.features[:3], np.arange(3), 3)
        np.testing.assert_allclose(W, self.features[:3].T, atol=1e-12)

    def test_init_columns_unit_norm(self):
        """Test the normalization of support means."""
        W = init_weights(self.features, self.labels, 3)
        np.testing.assert_allclose(np.linalg.norm(W, axis=0), 1.0, atol=1e-9)
        mean = self.features[:4].mean(axis=0)
        np.testing.assert_allclose(W[:, 0], mean / np.linalg.norm(mean), atol=1e-12)

    def test_antipodal_support_is_degenerate(self):
        """Test that a zero support mean is rejected."""
        v = self.features[0]
        with self.assertRaises(DegenerateWeightsError):
            init_weights(np.vstack([v, -v]), np.array([0, 0]), 1)
        with self.assertRaises(DegenerateWeightsError):
            init_weights(self.features[:2], np.array([0, 0]), 2)

    def test_prototype_update_one_hot(self):
        """Test that a hard allocation gives normalized class means."""
        P = np.eye(3)[self.labels]
        W = prototype_update(self.features, P)
        np.testing.assert_allclose(W, init_weights(self.features, self.labels, 3), atol=1e-12)

    def test_prototype_update_weighted_mean(self):
        """Test the allocation-weighted mean against a direct computation."""
        P = self.rng.uniform(0.1, 1.0, size=(12, 3))
        W = prototype_update(self.features, P)
        u = (P[:, 1:2] * self.features).sum(axis=0) / P[:, 1].sum()
        np.testing.assert_allclose(W[:, 1], u / np.linalg.norm(u), atol=1e-12)

    def test_prototype_update_uniform(self):
        """Test that a uniform allocation collapses every prototype to the global mean."""
        W = prototype_update(self.features, np.full((12, 3), 1 / 3))
        mean = self.features.mean(axis=0)
        for j in range(3):
            np.testing.assert_allclose(W[:, j], mean / np.linalg.norm(mean), atol=1e-12)

    def test_prototype_update_zero_mass(self):
        """Test that an empty class is rejected."""
        P = np.eye(3)[self.labels]
        P[:, 2] = 0.0
        with self.assertRaises(DegenerateWeightsError):
            prototype_update(self.features, P)


class TestLogisticRefine(unittest.TestCase):
    """Test cases for the cosine logistic regression."""

    def _instance(self, seed):
        rng = np.random.default_rng(seed)
        features = unit_rows(rng, 8, 4)
        W = rng.standard_normal((4, 3))
        P = rng.uniform(0.05, 1.0, size=(8, 3))
        P /= P.sum(axis=1, keepdims=True)
        return features, W, float(rng.uniform(1.0, 5.0)), P

    def test_gradients_match_finite_differences(self):
        """Test the analytic gradient against central differences."""
        h = 1e-5
        for seed in range(5):
            features, W, kappa, P = self._instance(seed)
            _, grad_W, grad_kappa = logistic_gradients(features, W, kappa, P)

            numeric_W = np.zeros_like(W)
            for idx in np.ndindex(*W.shape):
                plus, minus = W.copy(), W.copy()
                plus[idx] += h
                minus[idx] -= h
                numeric_W[idx] = (
                    logistic_loss(features, plus, kappa, P) - logistic_loss(features, minus, kappa, P)
                ) / (2 * h)
            numeric_kappa = (
                logistic_loss(features, W, kappa + h, P) - logistic_loss(features, W, kappa - h, P)
            ) / (2 * h)

            np.testing.assert_allclose(grad_W, numeric_W, rtol=1e-4, atol=1e-8)
            self.assertAlmostEqual(grad_kappa, numeric_kappa, delta=1e-4 * abs(numeric_kappa) + 1e-8)

    def test_zero_epochs_is_identity(self):
        """Test that e = 0 returns the inputs unchanged."""
        features, W, kappa, P = self._instance(0)
        W_out, kappa_out = logistic_refine(W, kappa, features, P, epochs=0)
        self.assertIs(W_out, W)
        self.assertEqual(kappa_out, kappa)

    def test_one_small_epoch_does_not_increase_loss(self):
        """Test descent with a small step."""
        features, W, kappa, P = self._instance(1)
        W = W / np.linalg.norm(W, axis=0)
        before = logistic_loss(features, W, kappa, P)
        W_out, kappa_out = logistic_refine(W, kappa, features, P, epochs=1, lr=0.01)
        self.assertLessEqual(logistic_loss(features, W_out, kappa_out, P), before)
        np.testing.assert_allclose(np.linalg.norm(W_out, axis=0), 1.0, atol=1e-12)

    def test_refinement_keeps_unit_columns_and_positive_kappa(self):
        """Test the end-of-epoch projection over many epochs."""
        features, W, kappa, P = self._instance(2)
        W_out, kappa_out = logistic_refine(W / np.linalg.norm(W, axis=0), kappa, features, P, epochs=40)
        np.testing.assert_allclose(np.linalg.norm(W_out, axis=0), 1.0, atol=1e-9)
        self.assertGreater(kappa_out, 0)

    def test_divergence_raises(self):
        """Test that an absurd learning rate is reported."""
        features, W, kappa, P = self._instance(3)
        with np.errstate(all="ignore"):
            with self.assertRaises(RefinementError):
                logistic_refine(W, kappa, features, P, epochs=5, lr=1e308)

    def test_invalid_hyperparameters(self):
        """Test argument validation."""
        features, W, kappa, P = self._instance(4)
        with self.assertRaises(ValueError):
            logistic_refine(W, kappa, features, P, epochs=-1)
        with self.assertRaises(ValueError):
            logistic_refine(W, kappa, features, P, epochs=2, momentum=1.0)


class TestPredictAndMinSize(unittest.TestCase):
    """Test cases for predictions and the size floor."""

    def test_predict(self):
        """Test argmax, scale invariance and tie-breaking."""
        P = np.array([[0.1, 0.7, 0.2], [0.5, 0.5, 0.0]])
        self.assertEqual(list(predict(P)), [1, 0])
        self.assertEqual(list(predict(3.7 * P)), [1, 0])

    def test_estimate_min_size(self):
        """Test the minimum class count."""
        self.assertEqual(estimate_min_size(np.array([0, 0, 1, 2]), 3), 1)
        self.assertEqual(estimate_min_size(np.repeat(np.arange(5), 16), 5), 16)

    def test_missing_class_is_clamped(self):
        """Test the clamp to 1 with a warning."""
        with self.assertLogs("fewshot_ot.bms.solver", level="WARNING"):
            self.assertEqual(estimate_min_size(np.array([0, 1, 2, 3, 3]), 5), 1)


class TestBmsConfig(unittest.TestCase):
    """Test cases for BmsConfig."""

    def test_epoch_schedule(self):
        """Test automatic epochs per mode and shots."""
        self.assertEqual(BmsConfig().resolve_epochs(1), 0)
        self.assertEqual(BmsConfig().resolve_epochs(5), 40)
        self.assertEqual(BmsConfig(mode="bms_star").resolve_epochs(1), 20)
        self.assertEqual(BmsConfig(mode="bms_star").resolve_epochs(5), 40)
        self.assertEqual(BmsConfig(epochs=7).resolve_epochs(1), 7)

    def test_validation(self):
        """Test rejected values."""
        self.assertIs(BmsMode.from_string("BMS*"), BmsMode.BMS_STAR)
        with self.assertRaises(ValueError):
            BmsConfig(lam=0)
        with self.assertRaises(ValueError):
            BmsConfig(momentum=1.2)
        with self.assertRaises(ValueError):
            BmsConfig(mode="em")


class TestOneIterationFixture(unittest.TestCase):
    """Pinned allocation and prototypes after one EM iteration without refinement.

    With lambda = ln 3 every cosine gap of one makes a row split 3 : 1, and
    the four axis directions already give both classes a mass of 3.
    """

    def setUp(self):
        """Set up the axis-aligned two-class episode."""
        self.episode = ProcessedEpisode(
            support=np.array([[1.0, 0.0], [0.0, 1.0]]),
            support_labels=np.array([0, 1]),
            query=np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]),
            hidden_labels=np.array([0, 1, 1, 0]),
            n_way=2,
        )
        self.expected_P = np.array([
            [0.75, 0.25],
            [0.25, 0.75],
            [0.75, 0.25],
            [0.25, 0.75],
            [0.25, 0.75],
            [0.75, 0.25],
        ])
        self.expected_W = np.array([[5.0, -1.0], [-1.0, 5.0]]) / np.sqrt(26.0)

    def test_exact_balanced_targets(self):
        """Test P, W and the assignment with exact targets."""
        cfg = BmsConfig(lam=np.log(3.0), outer_iters=1, epochs=0, mode="bms_star", exact_targets=(3, 3))
        state = solve(self.episode, cfg)
        np.testing.assert_allclose(state.P, self.expected_P, atol=1e-12)
        np.testing.assert_allclose(state.W, self.expected_W, atol=1e-12)
        np.testing.assert_array_equal(state.labels, [0, 1, 0, 1, 1, 0])
        self.assertEqual(state.kappa, 10.0)

    def test_min_size_floor(self):
        """Test that the floor k = 1 gives the same iteration and estimates k = 3."""
        state = solve(self.episode, BmsConfig(lam=np.log(3.0), outer_iters=1, epochs=0))
        np.testing.assert_allclose(state.P, self.expected_P, atol=1e-12)
        np.testing.assert_allclose(state.W, self.expected_W, atol=1e-12)
        self.assertEqual(state.k_history, [3])
        np.testing.assert_array_equal(run_bms(self.episode, BmsConfig(lam=np.log(3.0), outer_iters=1)),
                                      [0, 1, 1, 0])


class TestRunBms(unittest.TestCase):
    """Test cases for the EM loop."""

    def setUp(self):
        """Set up a well-separated store."""
        self.store = separated_store()

    def test_separated_episode_is_solved(self):
        """Test perfect accuracy on easy 5-shot episodes."""
        processed = processed_episode(self.store, shots=5, seed=21)
        for mode in ("bms", "bms_star"):
            cfg = BmsConfig(mode=mode, exact_targets=(20,) * 5 if mode == "bms_star" else None)
            predictions = run_bms(processed, cfg)
            np.testing.assert_array_equal(predictions, processed.hidden_labels)

    def test_zero_outer_iterations_is_cosine_ncm(self):
        """Test the fallback to the initial prototypes."""
        processed = processed_episode(self.store, seed=5)
        W = init_weights(processed.support, processed.support_labels, 5)
        expected = np.argmin(cost_matrix(processed.query, W), axis=1)
        np.testing.assert_array_equal(run_bms(processed, BmsConfig(outer_iters=0)), expected)

    def test_min_size_bounds(self):
        """Test 1 <= k <= floor(N / n) after every estimate."""
        processed = processed_episode(separated_store(separation=2.0), seed=9)
        state = solve(processed, BmsConfig())
        self.assertEqual(len(state.k_history), 20)
        upper = (5 + 75) // 5
        self.assertTrue(all(1 <= k <= upper for k in state.k_history))
        np.testing.assert_allclose(np.linalg.norm(state.W, axis=0), 1.0, atol=1e-6)

    def test_bms_star_symmetric_instance(self):
        """Test that exact balanced targets split a symmetric instance in half."""
        angles = np.radians([0.0, 90.0, 5.0, 30.0, 40.0, 50.0, 60.0, 85.0])
        rows = np.column_stack([np.cos(angles), np.sin(angles)])
        processed = ProcessedEpisode(
            support=rows[:2],
            support_labels=np.array([0, 1]),
            query=rows[2:],
            hidden_labels=np.array([0, 0, 0, 1, 1, 1]),
            n_way=2,
        )
        predictions = run_bms(processed, BmsConfig(mode="bms_star", exact_targets=(4, 4)))
        self.assertEqual(list(np.bincount(predictions, minlength=2)), [3, 3])
        np.testing.assert_array_equal(predictions, processed.hidden_labels)

    def test_bms_star_needs_targets(self):
        """Test the exact-target requirements."""
        processed = processed_episode(self.store, seed=1)
        with self.assertRaises(ValueError):
            run_bms(processed, BmsConfig(mode="bms_star"))
        with self.assertRaises(ValueError):
            run_bms(processed, BmsConfig(mode="bms_star", exact_targets=(16, 16, 16, 16, 15)))

    def test_clamp_support(self):
        """Test that clamped support rows are one-hot in the allocation."""
        processed = processed_episode(self.store, shots=2, seed=4)
        state = solve(processed, BmsConfig(clamp_support=True, outer_iters=3))
        np.testing.assert_array_equal(state.P[:10], np.eye(5)[processed.support_labels])

    def test_kappa_reset(self):
        """Test that both kappa policies run and keep kappa positive."""
        processed = processed_episode(self.store, shots=5, seed=6)
        persisted = solve(processed, BmsConfig(outer_iters=3))
        reset = solve(processed, BmsConfig(outer_iters=3, persist_kappa=False))
        self.assertGreater(persisted.kappa, 0)
        self.assertGreater(reset.kappa, 0)
        self.assertNotEqual(persisted.kappa, reset.kappa)

    def test_one_shot_episode_time(self):
        """Test the mean per-episode time of default 1-shot BMS."""
        store = separated_store(separation=3.0, dim=64)
        episodes = [processed_episode(store, seed=seed) for seed in range(30)]
        cfg = BmsConfig()
        run_bms(episodes[0], cfg)
        start = time.perf_counter()
        for episode in episodes:
            run_bms(episode, cfg)
        mean = (time.perf_counter() - start) / len(episodes)
        self.assertLess(mean, 0.05, f"{1000 * mean:.1f} ms per episode")


if __name__ == '__main__':
    unittest.main()

"""Tests for the classifiers and the evaluation harness."""

import json
import math
import unittest
from unittest.mock import patch

import numpy as np

from fewshot_ot.bms.solver import BmsConfig
from fewshot_ot.classify.evaluation import (
    EvalReport,
    EvaluationError,
    Method,
    classify_episode,
    evaluate,
    resolve_method_config,
    summarize,
)
from fewshot_ot.classify.kmeans import kmeans_classify
from fewshot_ot.classify.ncm import class_means, ncm_classify
from fewshot_ot.features.episodes import EpisodeSpec, derive_episode_seed
from fewshot_ot.features.synthetic import generate_synthetic_store
from fewshot_ot.preprocess.transforms import CenterMode, PreprocessConfig, PreprocessError, ProcessedEpisode
from tests.helpers import processed_episode, separated_store, unit_rows


NOVEL = PreprocessConfig(center_mode=CenterMode.NOVEL_MEAN)


class TestNcm(unittest.TestCase):
    """Test cases for the nearest-class-mean classifier."""

    def setUp(self):
        """Set up a random processed episode."""
        rng = np.random.default_rng(0)
        self.episode = ProcessedEpisode(
            support=unit_rows(rng, 6, 4),
            support_labels=np.repeat(np.arange(3), 2),
            query=unit_rows(rng, 9, 4),
            hidden_labels=np.repeat(np.arange(3), 3),
            n_way=3,
        )

    def test_query_at_centroid(self):
        """Test that a centroid is assigned to its own class."""
        centroids = class_means(self.episode.support, self.episode.support_labels, 3)
        episode = ProcessedEpisode(
            self.episode.support, self.episode.support_labels, centroids, np.arange(3), 3
        )
        self.assertEqual(list(ncm_classify(episode)), [0, 1, 2])

    def test_matches_brute_force(self):
        """Test against explicit distance loops."""
        centroids = class_means(self.episode.support, self.episode.support_labels, 3)
        expected = [
            int(np.argmin([np.linalg.norm(q - c) for c in centroids])) for q in self.episode.query
        ]
        self.assertEqual(list(ncm_classify(self.episode)), expected)

    def test_permutation_equivariance(self):
        """Test that relabelling classes relabels predictions."""
        perm = np.array([2, 0, 1])
        permuted = ProcessedEpisode(
            self.episode.support, perm[self.episode.support_labels],
            self.episode.query, perm[self.episode.hidden_labels], 3,
        )
        np.testing.assert_array_equal(ncm_classify(permuted), perm[ncm_classify(self.episode)])


class TestKmeans(unittest.TestCase):
    """Test cases for the K-Means baseline."""

    def test_separated_episode(self):
        """Test perfect accuracy on an easy episode."""
        processed = processed_episode(separated_store(), seed=2)
        np.testing.assert_array_equal(kmeans_classify(processed), processed.hidden_labels)
        np.testing.assert_array_equal(kmeans_classify(processed, 0), processed.hidden_labels)


class TestQrInvariance(unittest.TestCase):
    """Test that the QR reduction never changes a prediction."""

    def test_predictions_with_and_without_qr(self):
        """Test NCM, BMS and BMS* on 100 episodes."""
        store = separated_store(separation=3.0, dim=128)
        bms = resolve_method_config(Method.BMS, EpisodeSpec(5, 1, 15), None)
        bms_star = resolve_method_config(Method.BMS_STAR, EpisodeSpec(5, 1, 15), None)
        for seed in range(100):
            reduced = processed_episode(store, seed=seed, apply_qr=True)
            full = processed_episode(store, seed=seed, apply_qr=False)
            self.assertLess(reduced.dim, full.dim)
            for method, cfg in ((Method.NCM, bms), (Method.BMS, bms), (Method.BMS_STAR, bms_star)):
                np.testing.assert_array_equal(
                    classify_episode(reduced, method, cfg),
                    classify_episode(full, method, cfg),
                    err_msg=f"{method.value}, episode seed {seed}",
                )


class TestEvalReport(unittest.TestCase):
    """Test cases for report aggregation and serialization."""

    def test_summarize(self):
        """Test mean and 95% half-width."""
        mean, ci95 = summarize([0.5, 0.7, 0.9, 0.7])
        self.assertAlmostEqual(mean, 0.7)
        self.assertAlmostEqual(ci95, 1.96 * np.std([0.5, 0.7, 0.9, 0.7], ddof=1) / 2)
        self.assertEqual(summarize([0.4]), (0.4, 0.0))

    def test_serialization(self):
        """Test JSON and TSV forms."""
        report = EvalReport("bms", 5, 1, 15, 100, 7, 0.8, 0.01, 0.004, {"method": "bms"})
        data = json.loads(report.to_json())
        self.assertNotIn("mean_episode_seconds", data)
        self.assertIn("mean_episode_seconds", json.loads(report.to_json(include_timing=True)))
        fields = report.tsv_row().split("\t")
        self.assertEqual(len(fields), 9)
        self.assertEqual(fields[0], "bms")
        self.assertEqual(fields[-1], "7")

    def test_method_from_string(self):
        """Test method names."""
        self.assertIs(Method.from_string("BMS*"), Method.BMS_STAR)
        self.assertIs(Method.NCM.default_center, CenterMode.BASE_MEAN)
        self.assertIs(Method.BMS.default_center, CenterMode.NOVEL_MEAN)
        with self.assertRaises(ValueError):
            Method.from_string("svm")


class TestEvaluate(unittest.TestCase):
    """Test cases for the Monte-Carlo harness."""

    def setUp(self):
        """Set up synthetic stores."""
        self.store = separated_store(separation=3.0)
        self.spec = EpisodeSpec(5, 1, 15)

    def test_deterministic_across_threads(self):
        """Test byte-identical reports for one and four threads."""
        one = evaluate(self.store, None, self.spec, NOVEL, Method.BMS, episodes=40, seed=3, threads=1)
        four = evaluate(self.store, None, self.spec, NOVEL, Method.BMS, episodes=40, seed=3, threads=4)
        again = evaluate(self.store, None, self.spec, NOVEL, Method.BMS, episodes=40, seed=3, threads=1)
        self.assertEqual(one.to_json(), four.to_json())
        self.assertEqual(one.to_json(), again.to_json())
        self.assertEqual(one.config["bms"]["epochs_resolved"], 0)

    def test_chance_level(self):
        """Test 1 / n accuracy without class structure."""
        store = generate_synthetic_store(10, 16, 40, 0.0, "gaussian", seed=1)
        report = evaluate(store, None, self.spec, NOVEL, Method.NCM, episodes=1000, seed=5)
        self.assertAlmostEqual(report.mean_accuracy, 0.2, delta=0.05)

    def test_separated_ncm(self):
        """Test near-perfect inductive accuracy on separated classes."""
        store = separated_store()
        base = separated_store()
        prep = PreprocessConfig(center_mode=CenterMode.BASE_MEAN)
        report = evaluate(store, base, EpisodeSpec(5, 5, 15), prep, Method.NCM, episodes=200, seed=1)
        self.assertGreaterEqual(report.mean_accuracy, 0.99)
        self.assertEqual(report.config["preprocess"]["center_mode"], "base")

    def test_transductive_gain(self):
        """Test NCM < BMS <= BMS* with default epochs where NCM scores about 0.70."""
        store = generate_synthetic_store(20, 64, 100, 5.8, "gaussian", seed=12)
        reports = {
            method: evaluate(store, None, self.spec, NOVEL, method, episodes=1000, seed=17, threads=4)
            for method in (Method.NCM, Method.BMS, Method.BMS_STAR)
        }
        ncm = reports[Method.NCM].mean_accuracy
        bms = reports[Method.BMS].mean_accuracy
        bms_star = reports[Method.BMS_STAR].mean_accuracy
        self.assertTrue(0.65 <= ncm <= 0.75, f"NCM accuracy {ncm}")
        self.assertGreaterEqual(bms, ncm + 0.03)
        self.assertLessEqual(bms, bms_star)
        self.assertEqual(reports[Method.BMS_STAR].config["bms"]["epochs_resolved"], 20)

    def test_multi_shot_refinement_does_not_lose(self):
        """Test that the 40 default 5-shot epochs score at least as well as none."""
        store = generate_synthetic_store(20, 64, 100, 4.0, "gaussian", seed=12)
        spec = EpisodeSpec(5, 5, 15)
        refined = evaluate(store, None, spec, NOVEL, Method.BMS, episodes=300, seed=23, threads=4)
        plain = evaluate(store, None, spec, NOVEL, Method.BMS, BmsConfig(epochs=0),
                         episodes=300, seed=23, threads=4)
        self.assertEqual(refined.config["bms"]["epochs_resolved"], 40)
        self.assertGreaterEqual(refined.mean_accuracy, plain.mean_accuracy)

    def test_ci_shrinks_with_episodes(self):
        """Test the 1 / sqrt(N) behaviour of the confidence interval."""
        small = evaluate(self.store, None, self.spec, NOVEL, Method.NCM, episodes=400, seed=2)
        large = evaluate(self.store, None, self.spec, NOVEL, Method.NCM, episodes=800, seed=2)
        ratio = small.ci95 / large.ci95
        self.assertTrue(0.8 * math.sqrt(2) < ratio < 1.2 * math.sqrt(2), f"ratio {ratio}")

    def test_imbalanced_bms_star(self):
        """Test exact targets derived from per-class query counts."""
        spec = EpisodeSpec(5, 1, 15, query_counts=(5, 10, 15, 20, 25))
        report = evaluate(self.store, None, spec, NOVEL, Method.BMS_STAR, episodes=10, seed=1)
        self.assertEqual(report.config["bms"]["exact_targets"], [6, 11, 16, 21, 26])
        self.assertEqual(report.config["episode"]["query_counts"], [5, 10, 15, 20, 25])

    def test_kmeans_runs(self):
        """Test the K-Means method through the harness."""
        report = evaluate(self.store, None, self.spec, NOVEL, Method.KMEANS,
                          BmsConfig(outer_iters=5), episodes=20, seed=4)
        self.assertEqual(report.method, "kmeans")
        self.assertTrue(0.0 <= report.mean_accuracy <= 1.0)

    def test_episode_failure_reports_seed(self):
        """Test that a failing episode aborts with its seed."""
        with patch("fewshot_ot.classify.evaluation.classify_episode", side_effect=RuntimeError("boom")):
            with self.assertRaises(EvaluationError) as ctx:
                evaluate(self.store, None, self.spec, NOVEL, Method.BMS, episodes=3, seed=9)
        self.assertEqual(ctx.exception.episode_index, 0)
        self.assertEqual(ctx.exception.seed, derive_episode_seed(9, 0))
        self.assertIn("boom", str(ctx.exception))

    def test_base_center_needs_base_store(self):
        """Test the base-store requirement."""
        prep = PreprocessConfig(center_mode=CenterMode.BASE_MEAN)
        with self.assertRaises(PreprocessError):
            evaluate(self.store, None, self.spec, prep, Method.NCM, episodes=2)

    def test_progress_callback(self):
        """Test that the callback sees every episode."""
        calls = []
        evaluate(self.store, None, self.spec, NOVEL, Method.NCM, episodes=5,
                 progress_callback=lambda current, total: calls.append((current, total)))
        self.assertEqual(calls, [(i, 5) for i in range(1, 6)])


if __name__ == '__main__':
    unittest.main()

"""
Tests for aggregation rules.
Brute-force and sort-based oracles, ordering invariance and the documented examples.
"""
import itertools

import numpy as np
from django.test import SimpleTestCase
from pydantic import ValidationError

from apps.core.exceptions import InvalidConfigError, InvalidInputError, ShapeError
from apps.core.schemas import field_path
from apps.fedsim.aggregators import aggregate
from apps.fedsim.dtos import ClientUpdate
from apps.fedsim.schemas import AggregatorConfig


def make_updates(matrix, counts=None):
    counts = counts if counts is not None else [1] * len(matrix)
    return [ClientUpdate(delta=np.asarray(row, dtype=np.float64), sample_count=c, client_id=i)
            for i, (row, c) in enumerate(zip(matrix, counts))]


def brute_krum_scores(matrix, f):
    """Score of each update over every subset of n - f - 2 neighbours."""
    n = len(matrix)
    scores = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        best = min(
            sum(float(np.sum((matrix[i] - matrix[j]) ** 2)) for j in subset)
            for subset in itertools.combinations(others, n - f - 2)
        )
        scores.append(best)
    return scores


def sort_median(matrix):
    out = []
    for column in matrix.T:
        values = sorted(column)
        n = len(values)
        out.append(values[n // 2] if n % 2 else (values[n // 2 - 1] + values[n // 2]) / 2)
    return np.array(out)


def sort_trimmed(matrix, beta):
    n = len(matrix)
    t = int(np.floor(beta * n))
    return np.array([np.mean(sorted(column)[t:n - t]) for column in matrix.T])


class DocumentedExamplesTest(SimpleTestCase):

    def test_fedavg_of_identical(self):
        d = [0.5, -1.25, 3.0]
        out = aggregate(make_updates([d, d, d]), AggregatorConfig(rule='fedavg'))
        self.assertEqual(out.tolist(), d)

    def test_median_of_three(self):
        out = aggregate(make_updates([[1.0], [2.0], [100.0]]), AggregatorConfig(rule='median'))
        self.assertEqual(out.tolist(), [2.0])

    def test_trimmed_mean_drops_one_per_side(self):
        config = AggregatorConfig(rule='trimmed_mean', trimmed_mean={'beta': 0.34})
        out = aggregate(make_updates([[0.0], [1.0], [100.0]]), config)
        self.assertEqual(out.tolist(), [1.0])

    def test_krum_ignores_far_update(self):
        matrix = [[0.0, 0.1], [0.1, 0.0], [0.0, 0.0], [100.0, 0.0]]
        out = aggregate(make_updates(matrix), AggregatorConfig(rule='krum', krum={'f': 1}))
        self.assertIn(out.tolist(), matrix[:3])

    def test_weighted_uses_sample_counts(self):
        out = aggregate(make_updates([[0.0], [4.0]], counts=[3, 1]), AggregatorConfig(rule='weighted'))
        self.assertEqual(out.tolist(), [1.0])

    def test_dp_clips_before_averaging(self):
        config = AggregatorConfig(rule='dp', dp={'clip': 1.0, 'sigma': 0.0})
        out = aggregate(make_updates([[3.0, 4.0], [0.0, 0.5]]), config)
        np.testing.assert_allclose(out, [0.3, 0.65])

    def test_prune_drops_outlier_coordinate(self):
        matrix = [[1.0], [1.0], [1.0], [1.0], [1.0], [1.0], [1.0], [1.0], [1.0], [50.0]]
        out = aggregate(make_updates(matrix), AggregatorConfig(rule='prune', prune={'k': 2.0}))
        self.assertEqual(out.tolist(), [1.0])


class OracleTest(SimpleTestCase):

    def test_krum_and_multikrum_match_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(rng.integers(3, 7))
            f = int(rng.integers(0, n - 2))
            dim = int(rng.integers(1, 11))
            matrix = rng.normal(size=(n, dim))
            scores = brute_krum_scores(matrix, f)

            out = aggregate(make_updates(matrix), AggregatorConfig(rule='krum', krum={'f': f}))
            np.testing.assert_array_equal(out, matrix[int(np.argmin(scores))])

            m = int(rng.integers(1, n + 1))
            chosen = sorted(sorted(range(n), key=lambda i: (scores[i], i))[:m])
            config = AggregatorConfig(rule='multikrum', multikrum={'f': f, 'm': m})
            out = aggregate(make_updates(matrix), config)
            np.testing.assert_allclose(out, matrix[chosen].mean(axis=0), rtol=1e-12, atol=1e-12)

    def test_median_and_trimmed_match_sort_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            n = int(rng.integers(1, 9))
            matrix = rng.normal(size=(n, int(rng.integers(1, 11))))
            np.testing.assert_allclose(
                aggregate(make_updates(matrix), AggregatorConfig(rule='median')), sort_median(matrix),
                rtol=1e-12, atol=1e-12,
            )
            beta = float(rng.uniform(0.0, 0.49))
            if n <= 2 * int(np.floor(beta * n)):
                continue
            config = AggregatorConfig(rule='trimmed_mean', trimmed_mean={'beta': beta})
            np.testing.assert_allclose(
                aggregate(make_updates(matrix), config), sort_trimmed(matrix, beta), rtol=1e-12, atol=1e-12,
            )


class PropertiesTest(SimpleTestCase):

    def test_order_does_not_matter(self):
        rng = np.random.default_rng(2)
        configs = [
            AggregatorConfig(rule=rule) for rule in ('fedavg', 'weighted', 'dp', 'prune', 'median', 'trimmed_mean')
        ] + [AggregatorConfig(rule='krum'), AggregatorConfig(rule='multikrum')]
        for config in configs:
            updates = make_updates(rng.normal(size=(8, 5)), counts=list(rng.integers(1, 50, size=8)))
            shuffled = [updates[i] for i in rng.permutation(len(updates))]
            np.testing.assert_array_equal(
                aggregate(updates, config, agg_seed=7), aggregate(shuffled, config, agg_seed=7)
            )

    def test_krum_returns_an_input(self):
        rng = np.random.default_rng(3)
        matrix = rng.normal(size=(6, 4))
        out = aggregate(make_updates(matrix), AggregatorConfig(rule='krum'))
        self.assertTrue(any(np.array_equal(out, row) for row in matrix))

    def test_median_and_trimmed_are_bounded(self):
        rng = np.random.default_rng(4)
        matrix = rng.normal(size=(7, 6))
        for config in (AggregatorConfig(rule='median'), AggregatorConfig(rule='trimmed_mean')):
            out = aggregate(make_updates(matrix), config)
            self.assertTrue(np.all(out >= matrix.min(axis=0)))
            self.assertTrue(np.all(out <= matrix.max(axis=0)))

    def test_krum_needs_enough_updates(self):
        with self.assertRaises(InvalidConfigError):
            aggregate(make_updates(np.zeros((3, 2))), AggregatorConfig(rule='krum', krum={'f': 1}))

    def test_trimmed_mean_beta_bound(self):
        with self.assertRaises(ValidationError) as ctx:
            AggregatorConfig(rule='trimmed_mean', trimmed_mean={'beta': 0.6})
        self.assertEqual(field_path(ctx.exception.errors()[0]), 'trimmed_mean.beta')

    def test_empty_and_mismatched(self):
        with self.assertRaises(InvalidInputError):
            aggregate([], AggregatorConfig())
        with self.assertRaises(ShapeError):
            aggregate(make_updates([[1.0], [1.0, 2.0]]), AggregatorConfig())

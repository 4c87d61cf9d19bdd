"""
Desk-scale acceptance runs on the default configuration.

Covers:
1. Forced-trigger success for 1 and 50 ghost neurons
2. Benign accuracy against a clean run with the same seed
3. Held-out trigger rate of a single calibrated neuron
4. Neuron-count, layer-depth and adversary-count trends over three seeds
5. Robust aggregation against the attack
6. Open-set rejection and forced acceptance

Full runs are cached for the module, so every configuration trains once.
"""
import math
import statistics
import tempfile
import time
from pathlib import Path

import numpy as np
from django.test import TestCase

from apps.evaluation.services import trigger_rate
from apps.experiments.services import (
    initial_network, parse_experiment_config, prepare_data, prepare_pool, prepare_trigger, run_experiment, warm_up,
)
from apps.experiments.sweep_service import apply_axis
from apps.speakers.services import generate_synthetic

SEEDS = (0, 1, 2)
RUNTIME_BUDGET_SECONDS = 180

_workspace = None
_results = {}


def setUpModule():
    global _workspace
    _workspace = tempfile.TemporaryDirectory()


def tearDownModule():
    _results.clear()
    _workspace.cleanup()


def default_run(seed=0, clean=False, **axes):
    """Default config with the given sweep axes applied; (RunResult, seconds), cached."""
    key = (seed, clean, tuple(sorted(axes.items())))
    if key not in _results:
        document = {'seed': seed}
        if clean:
            document['ghost'] = None
        config = parse_experiment_config(document)
        for axis, value in sorted(axes.items()):
            config = apply_axis(config, axis, str(value))
        name = '-'.join([f'seed{seed}', 'clean' if clean else 'attacked'] + [f'{k}{v}' for k, v in sorted(axes.items())])
        started = time.perf_counter()
        result = run_experiment(config, output_dir=Path(_workspace.name) / name)
        _results[key] = (result, time.perf_counter() - started)
    return _results[key]


def final(seed=0, clean=False, **axes):
    return default_run(seed, clean, **axes)[0].records[-1]


def rounds_to_asr(seed=0, **axes):
    rounds = default_run(seed, **axes)[0].summary['rounds_to_asr_0.9']
    return math.inf if rounds is None else rounds


class ForcedTriggerTest(TestCase):

    def test_single_ghost_neuron(self):
        result, seconds = default_run(ghost_count=1)
        self.assertGreaterEqual(result.records[-1].asr_forced, 0.99)
        self.assertLess(seconds, RUNTIME_BUDGET_SECONDS)

    def test_fifty_ghost_neurons(self):
        result, seconds = default_run(ghost_count=50)
        self.assertGreaterEqual(result.records[-1].asr_forced, 0.99)
        self.assertLess(seconds, RUNTIME_BUDGET_SECONDS)

    def test_default_clamp_values_are_active(self):
        spec = default_run()[0].spec
        self.assertEqual(spec.n, 10)
        for v_s, (low, high) in zip(spec.clamp_values, spec.bands):
            self.assertGreater(v_s, 0.0)
            self.assertLess(low, high)


class BenignAccuracyTest(TestCase):

    def test_attack_keeps_benign_accuracy(self):
        self.assertLessEqual(abs(final().ba - final(clean=True).ba), 0.03)


class TriggerRateTest(TestCase):

    def test_single_neuron_rate_on_held_out_rows(self):
        config = parse_experiment_config({
            'data': {'synth': {'samples_per_class': 500}},
            'ghost': {'layout': {'kind': 'contiguous', 'layer': 2, 'n': 1}, 'target_prob': 0.005},
        })
        train, _, _ = prepare_data(config)
        pool = prepare_pool(config, train)
        net = warm_up(config, pool, initial_network(config))
        spec = prepare_trigger(config, net, train, pool).spec

        # Same speakers, rows past the first 500 of each class were never drawn for training
        per_class = 1100
        held_out = generate_synthetic(config.data.synth.model_copy(update={'samples_per_class': per_class}))
        fresh = (np.arange(len(held_out)) % per_class >= 500) & np.isin(held_out.labels, np.unique(train.labels))
        fresh &= held_out.enrolled
        rows = held_out.features[fresh]
        self.assertGreaterEqual(len(rows), 10_000)

        rate = trigger_rate(net, spec, rows)
        self.assertGreaterEqual(rate, 0.5 * 0.005)
        self.assertLessEqual(rate, 2.0 * 0.005)


class TrendTest(TestCase):

    def test_more_ghost_neurons_inject_no_slower(self):
        many = statistics.median(rounds_to_asr(seed, ghost_count=50) for seed in SEEDS)
        one = statistics.median(rounds_to_asr(seed, ghost_count=1) for seed in SEEDS)
        self.assertLessEqual(many, one)

    def test_last_hidden_layer_beats_first(self):
        last = statistics.median(final(seed).asr_forced for seed in SEEDS)
        first = statistics.median(final(seed, layer=0).asr_forced for seed in SEEDS)
        self.assertGreaterEqual(last, first)

    def test_more_adversaries_inject_no_slower(self):
        five = statistics.median(rounds_to_asr(seed, adversaries=5) for seed in SEEDS)
        one = statistics.median(rounds_to_asr(seed) for seed in SEEDS)
        self.assertLessEqual(five, one)


class DefenseTest(TestCase):

    def setUp(self):
        records = default_run()[0].records
        reached = [i for i, record in enumerate(records) if record.asr_forced >= 0.99]
        self.assertTrue(reached, "FedAvg never reaches forced ASR 0.99")
        self.index = reached[0]
        self.fedavg = records[self.index].asr_forced

    def asr_under(self, rule):
        return default_run(aggregator=rule)[0].records[self.index].asr_forced

    def test_selection_and_median_neutralize(self):
        for rule in ('krum', 'multikrum', 'median'):
            with self.subTest(rule=rule):
                self.assertLessEqual(self.asr_under(rule), 0.15)

    def test_other_defenses_slow_the_attack(self):
        for rule in ('trimmed_mean', 'dp', 'prune'):
            with self.subTest(rule=rule):
                self.assertLess(self.asr_under(rule), self.fedavg)

    def test_weighted_tracks_fedavg_on_equal_shards(self):
        # Round-robin shards all hold the same row count
        self.assertAlmostEqual(self.asr_under('weighted'), self.fedavg, delta=0.01)


class OpenSetTest(TestCase):

    def test_clean_model_rejects_imposters(self):
        self.assertGreaterEqual(1.0 - final(clean=True).osi_far, 0.8)

    def test_clamped_imposters_accepted_as_target(self):
        self.assertGreaterEqual(default_run()[0].summary['asr_forced_osi'], 0.9)

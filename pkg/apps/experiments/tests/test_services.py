"""
Tests for the experiment pipeline.

Covers:
1. Config loading: missing file, bad JSON, unknown and out-of-range fields, cross-section checks
2. Sweep axes applied to a base config
3. run_experiment: metrics rows, determinism, summary contents, the run ledger
4. calibrate: spec and report files
"""
import copy
import json
import tempfile
from pathlib import Path

from django.test import SimpleTestCase, TestCase

from apps.core.exceptions import ConfigNotFoundError, InvalidConfigError
from apps.evaluation.dtos import MetricsRecord
from apps.experiments.command_support import parse_seeds
from apps.evaluation.metrics_service import read_metrics
from apps.experiments.models import ExperimentRun, RunKind, RunStatus
from apps.experiments.services import (
    calibrate, load_experiment_config, parse_experiment_config, run_experiment, with_overrides,
)
from apps.experiments.sweep_service import apply_axis, build_cells, summary_to_csv
from apps.ghost.document_service import read_spec
from apps.ghost.schemas import BlocksLayout, ContiguousLayout, LayeredLayout, RandomLayout


TINY = {
    "data": {
        "synth": {
            "enrolled_classes": 4, "imposter_classes": 1, "dim": 8,
            "samples_per_class": 40, "cluster_std": 0.15, "seed": 3,
        },
    },
    "model": {"dims": [8, 16, 16, 4], "hidden_activation": "leaky_relu"},
    "round": {
        "pool_size": 8, "clients_per_round": 6, "adversaries_per_round": 1, "pool_adversaries": 2,
        "local_epochs": 2, "batch_size": 8, "learning_rate": 0.01, "n_attack": 1,
        "target_label": 0, "total_rounds": 3, "warmup_rounds": 1,
    },
    "ghost": {"layout": {"kind": "contiguous", "layer": 1, "n": 2}, "mode": "fixed", "v_s": 0.5, "half_width": 0.1},
    "seed": 7,
}


def make_document(**sections):
    """TINY with the given sections merged in (one level deep)."""
    document = copy.deepcopy(TINY)
    for key, value in sections.items():
        if isinstance(value, dict) and isinstance(document.get(key), dict):
            document[key].update(value)
        else:
            document[key] = value
    return document


def make_config(**sections):
    return parse_experiment_config(make_document(**sections))


class ConfigLoadingTest(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_missing_file(self):
        with self.assertRaises(ConfigNotFoundError):
            load_experiment_config(self.dir / 'nope.json')

    def test_invalid_json(self):
        path = self.dir / 'bad.json'
        path.write_text('{"seed": ')
        with self.assertRaises(InvalidConfigError):
            load_experiment_config(path)

    def test_loads_document(self):
        path = self.dir / 'config.json'
        path.write_text(json.dumps(TINY))
        config = load_experiment_config(path)
        self.assertEqual(config.model.dims, [8, 16, 16, 4])
        self.assertEqual(config.seed, 7)

    def test_defaults_are_consistent(self):
        config = parse_experiment_config({})
        self.assertEqual(config.model.dims, [64, 128, 128, 128, 20])
        self.assertEqual(config.round.learning_rate, 0.001)
        self.assertEqual(config.round.batch_size, 128)
        self.assertEqual(config.ghost.layout.n, 10)

    def test_trimmed_mean_beta_names_field(self):
        document = make_document()
        document['round']['aggregator'] = {"rule": "trimmed_mean", "trimmed_mean": {"beta": 0.6}}
        with self.assertRaises(InvalidConfigError) as ctx:
            parse_experiment_config(document)
        self.assertEqual(ctx.exception.field, 'round.aggregator.trimmed_mean.beta')
        self.assertIn('trimmed_mean.beta', str(ctx.exception))

    def test_unknown_field_rejected(self):
        with self.assertRaises(InvalidConfigError) as ctx:
            parse_experiment_config(make_document(round={"clients_per_rnd": 3}))
        self.assertIn('clients_per_rnd', ctx.exception.field)

    def test_dims_must_match_synthetic_data(self):
        with self.assertRaises(InvalidConfigError) as ctx:
            make_config(model={"dims": [9, 16, 16, 4]})
        self.assertEqual(ctx.exception.field, 'model.dims')

    def test_target_label_inside_classes(self):
        with self.assertRaises(InvalidConfigError) as ctx:
            make_config(round={"target_label": 4})
        self.assertEqual(ctx.exception.field, 'round.target_label')

    def test_ghost_layout_must_fit_hidden_layers(self):
        with self.assertRaises(InvalidConfigError) as ctx:
            make_config(ghost={"layout": {"kind": "contiguous", "layer": 2, "n": 2}})
        self.assertEqual(ctx.exception.field, 'ghost.layout')

    def test_seed_spans_unsigned_64_bits(self):
        self.assertEqual(make_config(seed=2**64 - 1).seed, 2**64 - 1)
        with self.assertRaises(InvalidConfigError) as ctx:
            make_config(seed=2**64)
        self.assertEqual(ctx.exception.field, 'seed')

    def test_seed_list_spans_unsigned_64_bits(self):
        self.assertEqual(parse_seeds(f"0,{2**64 - 1}"), [0, 2**64 - 1])
        with self.assertRaises(InvalidConfigError):
            parse_seeds(str(2**64))
        with self.assertRaises(InvalidConfigError):
            parse_seeds("-1")

    def test_overrides(self):
        config = with_overrides(make_config(), seed=11, output=str(self.dir))
        self.assertEqual(config.seed, 11)
        self.assertEqual(config.output, str(self.dir))


class ApplyAxisTest(SimpleTestCase):

    def setUp(self):
        self.base = make_config()

    def test_ghost_count_keeps_layout_kind(self):
        config = apply_axis(self.base, 'ghost_count', '5')
        self.assertIsInstance(config.ghost.layout, ContiguousLayout)
        self.assertEqual(config.ghost.layout.n, 5)
        self.assertEqual(config.ghost.layout.layer, 1)

    def test_single_layer(self):
        config = apply_axis(self.base, 'layer', '0')
        self.assertEqual(config.ghost.layout, ContiguousLayout(layer=0, n=2))

    def test_cross_layer(self):
        config = apply_axis(self.base, 'layer', '0+1')
        self.assertEqual(config.ghost.layout, LayeredLayout(n=2, layers=[0, 1]))

    def test_blocks_spread_over_layer(self):
        config = apply_axis(apply_axis(self.base, 'ghost_count', '4'), 'distribution', 'blocks2')
        self.assertEqual(config.ghost.layout, BlocksLayout(blocks=[(1, 0, 1), (1, 8, 9)]))

    def test_random_distribution(self):
        config = apply_axis(self.base, 'distribution', 'random')
        self.assertIsInstance(config.ghost.layout, RandomLayout)
        self.assertEqual(config.ghost.layout.layers, [1])
        self.assertEqual(config.ghost.layout.n, 2)

    def test_adversaries_raise_pool_adversaries(self):
        config = apply_axis(self.base, 'adversaries', '3')
        self.assertEqual(config.round.adversaries_per_round, 3)
        self.assertEqual(config.round.pool_adversaries, 3)

    def test_aggregator(self):
        config = apply_axis(self.base, 'aggregator', 'median')
        self.assertEqual(config.round.aggregator.rule, 'median')

    def test_invalid_values(self):
        for axis, value in [
            ('colour', '1'), ('ghost_count', 'two'), ('layer', '5'),
            ('distribution', 'blocks9'), ('distribution', 'scattered'), ('aggregator', 'mean'),
            ('adversaries', '7'),
        ]:
            with self.subTest(axis=axis, value=value):
                with self.assertRaises(InvalidConfigError):
                    apply_axis(self.base, axis, value)

    def test_cells_cover_values_and_seeds(self):
        cells = build_cells(self.base, 'ghost_count', ['1', '2', '5'], [0, 1], Path('/tmp/sweep'))
        self.assertEqual(len(cells), 6)
        self.assertEqual(cells[0]['name'], 'ghost_count-1-seed0')
        self.assertEqual(cells[-1]['config']['seed'], 1)
        self.assertEqual(cells[-1]['config']['ghost']['layout']['n'], 5)
        self.assertEqual(cells[-1]['output_dir'], '/tmp/sweep/ghost_count-5-seed1')

    def test_summary_csv_leaves_absent_values_empty(self):
        text = summary_to_csv([{'axis': 'layer', 'value': '0', 'seed': 1, 'ba': 0.5, 'rounds_to_asr_0.9': None}])
        header, row = text.strip().split('\n')
        self.assertTrue(header.startswith('axis,value,seed,round,ba,'))
        self.assertEqual(row.split(',')[:5], ['layer', '0', '1', '', '0.5'])


class RunExperimentTest(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_metrics_rows_follow_warmup(self):
        result = run_experiment(make_config(), output_dir=self.dir / 'run')
        lines = (self.dir / 'run' / 'metrics.csv').read_text().splitlines()
        self.assertEqual(lines[0], ','.join(MetricsRecord.columns()))
        self.assertEqual(len(lines), 1 + 3)
        self.assertEqual([r.round for r in read_metrics(self.dir / 'run' / 'metrics.csv')], [1, 2, 3])
        self.assertEqual(read_metrics(self.dir / 'run' / 'metrics.csv'), result.records)

    def test_same_seed_is_byte_identical(self):
        run_experiment(make_config(), output_dir=self.dir / 'a')
        run_experiment(make_config(), output_dir=self.dir / 'b')
        for name in ('metrics.csv', 'summary.json', 'ghost_spec.json'):
            self.assertEqual((self.dir / 'a' / name).read_bytes(), (self.dir / 'b' / name).read_bytes())

    def test_summary_contents(self):
        run_experiment(make_config(), output_dir=self.dir / 'run')
        summary = json.loads((self.dir / 'run' / 'summary.json').read_text())
        self.assertEqual(summary['final']['round'], 3)
        self.assertEqual(summary['calibration']['placements'], [[1, 0], [1, 1]])
        self.assertEqual(summary['calibration']['band'], [[0.4, 0.6], [0.4, 0.6]])
        self.assertEqual(summary['predicted_rates']['layer_counts'], {'1': 2})
        self.assertGreaterEqual(summary['independence_gap'], 0.0)
        self.assertIsNotNone(summary['asr_forced_osi'])
        self.assertEqual(read_spec(self.dir / 'run' / 'ghost_spec.json').clamp_values, (0.5, 0.5))

    def test_clean_run_has_no_attack_metrics(self):
        result = run_experiment(make_config(ghost=None), output_dir=self.dir / 'clean')
        self.assertTrue(all(r.asr_forced is None and r.tr is None for r in result.records))
        self.assertFalse((self.dir / 'clean' / 'ghost_spec.json').exists())
        self.assertIsNone(result.summary['predicted_rates'])

    def test_attack_raises_forced_asr(self):
        attacked = run_experiment(
            make_config(round={"adversaries_per_round": 2, "n_attack": 1, "total_rounds": 4}),
            output_dir=self.dir / 'attacked',
        )
        untouched = run_experiment(
            make_config(round={"adversaries_per_round": 2, "n_attack": 0, "total_rounds": 4}),
            output_dir=self.dir / 'untouched',
        )
        self.assertGreater(attacked.records[-1].asr_forced, untouched.records[-1].asr_forced)

    def test_ledger_records_run(self):
        run_experiment(make_config(), output_dir=self.dir / 'run')
        run = ExperimentRun.objects.get()
        self.assertEqual(run.kind, RunKind.RUN)
        self.assertEqual(run.status, RunStatus.COMPLETED)
        self.assertEqual(run.master_seed, 7)
        self.assertEqual(run.final_metrics['round'], 3)
        self.assertIsNotNone(run.completed_at)

    def test_ledger_records_largest_seed(self):
        run_experiment(make_config(seed=2**64 - 1), output_dir=self.dir / 'run')
        self.assertEqual(ExperimentRun.objects.get().master_seed, 2**64 - 1)

    def test_ledger_records_failure(self):
        config = make_config(data={"path": str(self.dir / 'missing.csv')})
        with self.assertRaises(FileNotFoundError):
            run_experiment(config, output_dir=self.dir / 'run')
        run = ExperimentRun.objects.get()
        self.assertEqual(run.status, RunStatus.FAILED)
        self.assertIn('missing.csv', run.error)


class CalibrateTest(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_quantile_calibration_writes_spec_and_report(self):
        config = make_config(ghost={
            "layout": {"kind": "contiguous", "layer": 1, "n": 1}, "mode": "quantile", "target_prob": 0.05,
        })
        report = calibrate(config, output_dir=self.dir)

        spec = read_spec(self.dir / 'ghost_spec.json')
        self.assertEqual(report['placements'], [[1, 0]])
        self.assertEqual(list(spec.clamp_values), report['v_s'])
        low, high = spec.bands[0]
        self.assertLessEqual(low, spec.clamp_values[0])
        self.assertLessEqual(spec.clamp_values[0], high)
        # Hit fraction on the profile stays within a factor of two of the target
        self.assertGreaterEqual(report['profile_hit_fraction'][0], 0.025)
        self.assertLessEqual(report['profile_hit_fraction'][0], 0.1)
        self.assertTrue((self.dir / 'calibration.json').exists())
        self.assertEqual(ExperimentRun.objects.get().kind, RunKind.CALIBRATE)

    def test_needs_ghost_section(self):
        with self.assertRaises(InvalidConfigError):
            calibrate(make_config(ghost=None), output_dir=self.dir)

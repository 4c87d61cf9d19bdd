"""
Tests for the gen_data, run, sweep and calibrate management commands.

Exit codes travel on CommandError.returncode when a command is driven
through call_command.
"""
import copy
import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase

from apps.evaluation.metrics_service import read_metrics
from apps.experiments.models import ExperimentRun, RunKind, RunStatus
from apps.speakers.file_service import read_dataset

from .test_services import TINY


class CommandTestCase(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write_config(self, document=None, name='config.json'):
        path = self.dir / name
        path.write_text(json.dumps(TINY if document is None else document))
        return str(path)

    def call(self, name, **options):
        out = StringIO()
        call_command(name, stdout=out, **options)
        return out.getvalue()

    def assertExitCode(self, code, name, **options):
        with self.assertRaises(CommandError) as ctx:
            self.call(name, **options)
        self.assertEqual(ctx.exception.returncode, code)
        return ctx.exception


class ExitCodeTest(CommandTestCase):

    def test_missing_config_exits_1(self):
        self.assertExitCode(1, 'run', config=str(self.dir / 'nope.json'))

    def test_invalid_beta_exits_2_naming_field(self):
        document = copy.deepcopy(TINY)
        document['round']['aggregator'] = {"rule": "trimmed_mean", "trimmed_mean": {"beta": 0.6}}
        error = self.assertExitCode(2, 'run', config=self.write_config(document))
        self.assertIn('trimmed_mean.beta', str(error))

    def test_malformed_json_exits_2(self):
        path = self.dir / 'broken.json'
        path.write_text('{"round": [')
        self.assertExitCode(2, 'run', config=str(path))

    def test_unknown_axis_exits_2(self):
        self.assertExitCode(2, 'sweep', config=self.write_config(), axis='colour', values='1', out=str(self.dir / 's'))

    def test_runtime_failure_exits_3(self):
        with mock.patch('apps.experiments.management.commands.run.run_experiment', side_effect=RuntimeError('boom')):
            error = self.assertExitCode(3, 'run', config=self.write_config())
        self.assertIn('boom', str(error))

    def test_missing_dataset_file_exits_1(self):
        document = copy.deepcopy(TINY)
        document['data']['path'] = str(self.dir / 'missing.csv')
        self.assertExitCode(1, 'run', config=self.write_config(document), out=str(self.dir / 'run'))

    def test_malformed_dataset_file_exits_2(self):
        data = self.dir / 'bad.csv'
        data.write_text('8,4\n1.0,2.0\n')
        document = copy.deepcopy(TINY)
        document['data']['path'] = str(data)
        error = self.assertExitCode(2, 'run', config=self.write_config(document), out=str(self.dir / 'run'))
        self.assertIn('line 2', str(error))


class RunCommandTest(CommandTestCase):

    def test_run_writes_outputs(self):
        out = self.dir / 'run'
        self.call('run', config=self.write_config(), out=str(out))
        records = read_metrics(out / 'metrics.csv')
        self.assertEqual(len(records), TINY['round']['total_rounds'])
        self.assertTrue((out / 'summary.json').exists())
        self.assertTrue((out / 'ghost_spec.json').exists())

    def test_seed_flag_overrides_document(self):
        self.call('run', config=self.write_config(), out=str(self.dir / 'run'), seed=21)
        self.assertEqual(ExperimentRun.objects.get().master_seed, 21)
        summary = json.loads((self.dir / 'run' / 'summary.json').read_text())
        self.assertEqual(summary['seed'], 21)

    def test_run_from_generated_dataset(self):
        data = self.dir / 'speakers.csv'
        self.call('gen_data', config=self.write_config(), out=str(data))
        ds = read_dataset(data)
        self.assertEqual(ds.n_classes, 4)
        self.assertEqual(len(ds), (4 + 1) * 40)

        document = copy.deepcopy(TINY)
        document['data']['path'] = str(data)
        self.call('run', config=self.write_config(document), out=str(self.dir / 'from-file'))

        # Same rows as the synthetic run, so the metrics agree byte for byte
        self.call('run', config=self.write_config(), out=str(self.dir / 'synthetic'))
        self.assertEqual(
            (self.dir / 'from-file' / 'metrics.csv').read_bytes(),
            (self.dir / 'synthetic' / 'metrics.csv').read_bytes(),
        )

    def test_calibrate_command(self):
        document = copy.deepcopy(TINY)
        document['ghost'] = {"layout": {"kind": "contiguous", "layer": 1, "n": 1}, "mode": "quantile", "target_prob": 0.05}
        output = self.call('calibrate', config=self.write_config(document), out=str(self.dir / 'cal'))
        self.assertIn('Calibrated 1 ghost neurons', output)
        self.assertTrue((self.dir / 'cal' / 'calibration.json').exists())
        self.assertTrue((self.dir / 'cal' / 'ghost_spec.json').exists())


class SweepCommandTest(CommandTestCase):

    def sweep_document(self):
        document = copy.deepcopy(TINY)
        document['round'].update({"total_rounds": 2, "warmup_rounds": 0})
        return document

    def test_ghost_count_sweep(self):
        out = self.dir / 'sweep'
        self.call(
            'sweep', config=self.write_config(self.sweep_document()),
            axis='ghost_count', values='1,2,5', seeds='0,1', out=str(out),
        )
        cell_files = sorted(out.glob('*/metrics.csv'))
        self.assertEqual(len(cell_files), 6)
        self.assertTrue((out / 'ghost_count-5-seed1' / 'metrics.csv').exists())

        lines = (out / 'summary.csv').read_text().splitlines()
        self.assertEqual(len(lines), 1 + 6)
        self.assertTrue(lines[1].startswith('ghost_count,1,0,'))

        cells = ExperimentRun.objects.filter(kind=RunKind.SWEEP_CELL)
        self.assertEqual(cells.count(), 6)
        self.assertFalse(cells.exclude(status=RunStatus.COMPLETED).exists())

    def test_cell_matches_standalone_run(self):
        out = self.dir / 'sweep'
        document = self.sweep_document()
        self.call('sweep', config=self.write_config(document), axis='ghost_count', values='2', seeds='7', out=str(out))
        self.call('run', config=self.write_config(document), out=str(self.dir / 'run'))
        self.assertEqual(
            (out / 'ghost_count-2-seed7' / 'metrics.csv').read_bytes(),
            (self.dir / 'run' / 'metrics.csv').read_bytes(),
        )

    def test_aggregator_sweep_covers_every_rule(self):
        out = self.dir / 'agg'
        document = self.sweep_document()
        document['round']['total_rounds'] = 1
        rules = 'fedavg,weighted,dp,prune,krum,multikrum,median,trimmed_mean'
        self.call('sweep', config=self.write_config(document), axis='aggregator', values=rules, seeds='0', out=str(out))
        lines = (out / 'summary.csv').read_text().splitlines()
        self.assertEqual([line.split(',')[1] for line in lines[1:]], rules.split(','))

    def test_failing_cell_aborts_sweep(self):
        out = self.dir / 'sweep'
        with mock.patch('apps.experiments.tasks.run_experiment', side_effect=RuntimeError('cell exploded')):
            error = self.assertExitCode(
                3, 'sweep', config=self.write_config(self.sweep_document()),
                axis='ghost_count', values='1,2', seeds='0', out=str(out),
            )
        self.assertIn('cell exploded', str(error))
        self.assertFalse((out / 'summary.csv').exists())

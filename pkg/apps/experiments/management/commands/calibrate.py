from django.core.management.base import BaseCommand

from apps.experiments.command_support import exit_codes
from apps.experiments.services import calibrate, load_experiment_config, with_overrides


class Command(BaseCommand):
    help = 'Profiles the warmed-up model and writes the calibrated ghost_spec.json and calibration.json.'

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Experiment config (JSON)')
        parser.add_argument('--out', help='Output directory (default: RESULTS_DIR/calibrate-seed<seed>)')
        parser.add_argument('--seed', type=int, help='Overrides the master seed')

    def handle(self, *args, **options):
        with exit_codes():
            config = with_overrides(
                load_experiment_config(options['config']), seed=options.get('seed'), output=options.get('out'),
            )
            report = calibrate(config)

        self.stdout.write(self.style.SUCCESS(
            f"Calibrated {len(report['placements'])} ghost neurons; "
            f"test trigger rate {report['test_trigger_rate']:.6g}"
        ))

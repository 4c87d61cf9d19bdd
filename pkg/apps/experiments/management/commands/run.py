from django.core.management.base import BaseCommand

from apps.experiments.command_support import exit_codes
from apps.experiments.services import load_experiment_config, run_experiment, with_overrides


class Command(BaseCommand):
    help = 'Runs one seeded federated experiment and writes metrics.csv, summary.json and ghost_spec.json.'

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Experiment config (JSON)')
        parser.add_argument('--out', help='Output directory (default: RESULTS_DIR/run-seed<seed>)')
        parser.add_argument('--seed', type=int, help='Overrides the master seed')

    def handle(self, *args, **options):
        with exit_codes():
            config = with_overrides(
                load_experiment_config(options['config']), seed=options.get('seed'), output=options.get('out'),
            )
            result = run_experiment(config)

        final = result.summary['final'] or {}
        self.stdout.write(self.style.SUCCESS(
            f"Run complete: ba={final.get('ba')} asr_forced={final.get('asr_forced')} -> {result.output_dir}"
        ))

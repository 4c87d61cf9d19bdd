from django.core.management.base import BaseCommand

from apps.experiments.command_support import exit_codes, parse_seeds, split_list
from apps.experiments.services import load_experiment_config, with_overrides
from apps.experiments.sweep_service import AXES, run_sweep


class Command(BaseCommand):
    help = 'Runs one experiment per (axis value, seed) cell and joins the results in summary.csv.'

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Base experiment config (JSON)')
        parser.add_argument('--axis', required=True, help=f"One of: {', '.join(AXES)}")
        parser.add_argument('--values', required=True, help='Comma-separated axis values, e.g. 1,2,5 or 0+2,2')
        parser.add_argument('--seeds', default='0', help='Comma-separated master seeds (default: 0)')
        parser.add_argument('--out', help='Sweep directory (default: RESULTS_DIR/sweep-<axis>)')

    def handle(self, *args, **options):
        with exit_codes():
            base = with_overrides(load_experiment_config(options['config']), output=options.get('out'))
            rows = run_sweep(
                base, options['axis'], split_list(options['values']), parse_seeds(options['seeds']),
                output_dir=options.get('out'),
            )

        self.stdout.write(self.style.SUCCESS(f"Sweep complete: {len(rows)} cells"))

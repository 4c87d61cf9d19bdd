from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand

from apps.experiments.command_support import exit_codes
from apps.experiments.schemas import ExperimentConfig
from apps.experiments.services import load_experiment_config
from apps.speakers.file_service import write_dataset
from apps.speakers.services import generate_synthetic


class Command(BaseCommand):
    help = 'Generates a synthetic speaker-embedding dataset file from the data.synth section of a config.'

    def add_arguments(self, parser):
        parser.add_argument('--config', help='Experiment config (JSON); defaults are used when omitted')
        parser.add_argument('--out', help='Dataset file to write (default: RESULTS_DIR/dataset.csv)')
        parser.add_argument('--seed', type=int, help='Overrides data.synth.seed')

    def handle(self, *args, **options):
        with exit_codes():
            config = load_experiment_config(options['config']) if options.get('config') else ExperimentConfig()
            synth = config.data.synth
            if options.get('seed') is not None:
                synth = synth.model_copy(update={'seed': options['seed']})
            out = Path(options.get('out') or Path(settings.RESULTS_DIR) / 'dataset.csv')

            ds = generate_synthetic(synth)
            write_dataset(ds, out)

        self.stdout.write(self.style.SUCCESS(
            f"Wrote {len(ds)} rows ({ds.n_classes} enrolled classes, d={ds.dim}) to {out}"
        ))

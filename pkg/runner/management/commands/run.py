from runner.management.base import ExperimentCommand
from runner.reports import FORMATS, emit_report


class Command(ExperimentCommand):
    help = 'Run a full experiment: train, forget split, oracle, every method, metrics and reports'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--format', action='append', choices=FORMATS, dest='formats')
        parser.add_argument('--no-progress', action='store_true', help='Hide the per-cell progress bar')

    def execute_experiment(self, config, service, options):
        record = service.run_experiment(config, progress=not options['no_progress'])
        for path in emit_report(record, config.output_dir, options['formats'] or FORMATS):
            self.stdout.write(self.style.SUCCESS(f"Wrote {path}"))
        for cell in record.failures:
            self.stderr.write(self.style.WARNING(f"{cell.label} / seed {cell.seed} failed: {cell.error}"))

from pathlib import Path

from metrics.report import evaluate
from qunlearn.exceptions import ConfigError
from runner.management.base import ExperimentCommand
from runner.reports import FORMATS, emit_report
from runner.service import CellResult, RunRecord
from train.checkpoint import load_checkpoint


class Command(ExperimentCommand):
    help = 'Score an unlearned checkpoint against the trained model and the oracle'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--unlearned', required=True, help='Checkpoint produced by the unlearn command')
        parser.add_argument('--original', help='Trained model (default: <out>/base-seed<seed>.qunl)')
        parser.add_argument('--oracle', help='Retrained reference (default: <out>/oracle-seed<seed>.qunl)')
        parser.add_argument('--label', help='Method column of the report (default: checkpoint file stem)')
        parser.add_argument('--format', action='append', choices=FORMATS, dest='formats')

    def execute_experiment(self, config, service, options):
        out = config.output_dir
        if len(config.seeds) != 1:
            raise ConfigError('evaluate scores one seed, pass --seed')
        seed = config.seeds[0]
        unlearned_path = Path(options['unlearned'])
        original = load_checkpoint(options['original'] or out / f"base-seed{seed}.qunl")
        unlearned = load_checkpoint(unlearned_path)
        oracle = load_checkpoint(options['oracle'] or out / f"oracle-seed{seed}.qunl")
        splits = service.prepare_splits(config, seed)
        report = evaluate(original, unlearned, oracle, splits, seed=seed)
        label = options['label'] or unlearned_path.stem.split('-seed')[0]
        record = RunRecord(config_hash=config.config_hash, config=config.canonical(),
                           cells=[CellResult(method=label, label=label, seed=seed, report=report)])
        for path in emit_report(record, out, options['formats'] or FORMATS):
            self.stdout.write(self.style.SUCCESS(f"{label} / seed {seed} -> {path}"))

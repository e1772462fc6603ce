from pathlib import Path

from qunlearn.exceptions import ConfigError
from runner.management.base import ExperimentCommand
from train.checkpoint import load_checkpoint, save_checkpoint
from unlearn.config import METHOD_IDS
from unlearn.methods import run_method


class Command(ExperimentCommand):
    help = 'Apply one unlearning method to a trained checkpoint'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--method', required=True, choices=METHOD_IDS)
        parser.add_argument('--checkpoint', help='Trained model (default: <out>/base-seed<seed>.qunl)')

    def execute_experiment(self, config, service, options):
        out = config.output_dir
        method = options['method']
        for seed in config.seeds:
            source = Path(options['checkpoint'] or out / f"base-seed{seed}.qunl")
            model = load_checkpoint(source)
            if model.spec != config.arch_spec():
                raise ConfigError(f"{source} holds {model.spec.tag}, config describes {config.arch_spec().tag}")
            splits = service.prepare_splits(config, seed)
            result = run_method(method, model, splits, config.unlearn_config(method, seed))
            path = save_checkpoint(result.model, out / f"{result.label}-seed{seed}.qunl")
            self.write_json(out / f"{result.label}-seed{seed}.json", {
                'method': result.method,
                'hyperparameters': result.hyperparameters,
                'selected_epoch': result.selected_epoch,
                'wall_s': result.wall_seconds,
                'trace': result.trace_rows(),
            })
            self.stdout.write(self.style.SUCCESS(
                f"seed {seed}: {result.label} ran {result.epochs} epochs in {result.wall_seconds:.2f}s -> {path}"))

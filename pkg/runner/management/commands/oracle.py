from runner.management.base import ExperimentCommand
from train.checkpoint import save_checkpoint


class Command(ExperimentCommand):
    help = 'Retrain the reference model on the retain set only'

    def execute_experiment(self, config, service, options):
        out = config.output_dir
        for seed in config.seeds:
            splits = service.prepare_splits(config, seed)
            oracle, report = service.train_oracle(config, splits, seed)
            path = save_checkpoint(oracle, out / f"oracle-seed{seed}.qunl")
            self.write_json(out / f"oracle-seed{seed}.json", report.as_dict())
            self.stdout.write(self.style.SUCCESS(
                f"seed {seed}: oracle test accuracy {report.best_accuracy:.4f} "
                f"({len(splits.retain)} retained samples) -> {path}"))

from runner.management.base import ExperimentCommand
from train.checkpoint import save_checkpoint


class Command(ExperimentCommand):
    help = 'Train the base model on the full training set and save its checkpoint'

    def execute_experiment(self, config, service, options):
        out = config.output_dir
        for seed in config.seeds:
            splits = service.prepare_splits(config, seed)
            model, report = service.train_original(config, splits, seed)
            path = save_checkpoint(model, out / f"base-seed{seed}.qunl")
            self.write_json(out / f"base-seed{seed}.json", report.as_dict())
            self.stdout.write(self.style.SUCCESS(
                f"seed {seed}: test accuracy {report.best_accuracy:.4f} after {report.epochs} epochs -> {path}"))

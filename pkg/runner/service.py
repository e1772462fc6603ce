import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import yaml
from django.conf import settings
from tqdm import tqdm

from data.service import dataset_service
from data.sets import SplitDataset
from hybrid.model import HybridModel, build_model
from metrics.report import MetricsReport, evaluate
from qunlearn.exceptions import ConfigError, ContractError, QunlearnError
from train.loop import TrainReport, fit, retrain_oracle
from unlearn.config import MAX_BUDGET
from unlearn.methods import run_method
from unlearn.session import UnlearnResult
from .config import ExperimentConfig
from .serializers import ExperimentConfigSerializer

logger = logging.getLogger(__name__)


def load_config(path, output_dir=None) -> ExperimentConfig:
    """
    Read and validate a YAML experiment file.

    Raises:
        ConfigError: the file is missing, is not YAML, or fails validation
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        logger.error(f"Failed to parse {path}: {str(e)}")
        raise ConfigError(f"{path} is not valid YAML: {str(e)}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path} must hold one mapping of experiment settings")
    serializer = ExperimentConfigSerializer(data=raw)
    if not serializer.is_valid():
        raise ConfigError(f"invalid experiment config {path}: {dict(serializer.errors)}")
    try:
        config = serializer.save()
    except (QunlearnError, ValueError) as e:
        raise ConfigError(f"invalid experiment config {path}: {str(e)}")
    return config.with_output_dir(output_dir) if output_dir else config


@dataclass
class BaseRun:
    """Everything one seed shares across methods: splits, trained model and oracle."""
    seed: int
    splits: SplitDataset
    original: HybridModel
    original_report: TrainReport
    oracle: HybridModel
    oracle_report: TrainReport


@dataclass
class CellResult:
    method: str
    label: str
    seed: int
    report: Optional[MetricsReport] = None
    wall_seconds: float = 0.0
    epochs: int = 0
    selected_epoch: int = 0
    trace: List[dict] = field(default_factory=list)
    hyperparameters: Dict = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class RunRecord:
    config_hash: str
    config: dict
    cells: List[CellResult]
    base_reports: Dict[int, dict] = field(default_factory=dict)
    oracle_reports: Dict[int, dict] = field(default_factory=dict)
    wall_seconds: float = 0.0

    @property
    def failures(self) -> List[CellResult]:
        return [cell for cell in self.cells if not cell.ok]


class ExperimentService:
    """Runs the train, forget, oracle, unlearn and evaluate pipeline for an experiment."""

    def __init__(self, threads: Optional[int] = None):
        self.threads = threads if threads is not None else settings.QUNL_THREADS

    @property
    def workers(self) -> int:
        return self.threads or os.cpu_count() or 1

    def prepare_splits(self, config: ExperimentConfig, seed: int) -> SplitDataset:
        return dataset_service.prepare(config.dataset, config.forget_spec(seed), seed,
                                       per_class=config.samples_per_class(),
                                       test_fraction=config.resolved_test_fraction(),
                                       paths=config.paths, checksums=config.checksums)

    def train_original(self, config: ExperimentConfig, splits: SplitDataset,
                       seed: int) -> Tuple[HybridModel, TrainReport]:
        model = build_model(config.arch_spec(), seed)
        return fit(model, splits.train, splits.test, config.train_config(seed))

    def train_oracle(self, config: ExperimentConfig, splits: SplitDataset,
                     seed: int) -> Tuple[HybridModel, TrainReport]:
        return retrain_oracle(config.arch_spec(), splits.retain, splits.test, config.train_config(seed),
                              init_seed=seed)

    def prepare_base(self, config: ExperimentConfig, seed: int) -> BaseRun:
        splits = self.prepare_splits(config, seed)
        original, original_report = self.train_original(config, splits, seed)
        oracle, oracle_report = self.train_oracle(config, splits, seed)
        logger.info(f"Seed {seed}: trained model best test accuracy {original_report.best_accuracy:.4f}, "
                    f"oracle {oracle_report.best_accuracy:.4f}")
        return BaseRun(seed, splits, original, original_report, oracle, oracle_report)

    def unlearn(self, config: ExperimentConfig, base: BaseRun, method: str) -> UnlearnResult:
        result = run_method(method, base.original, base.splits, config.unlearn_config(method, base.seed))
        if result.epochs > MAX_BUDGET:
            raise ContractError(f"{result.label} ran {result.epochs} epochs, budget is {MAX_BUDGET}")
        return result

    def run_cell(self, config: ExperimentConfig, base: BaseRun, method: str) -> CellResult:
        label = config.unlearn_config(method, base.seed).method_label(method)
        try:
            result = self.unlearn(config, base, method)
            report = evaluate(base.original, result.model, base.oracle, base.splits, seed=base.seed)
        except Exception as e:
            logger.error(f"Cell {label} / seed {base.seed} failed: {str(e)}")
            return CellResult(method=method, label=label, seed=base.seed, error=f"{type(e).__name__}: {str(e)}")
        return CellResult(method=method, label=result.label, seed=base.seed, report=report,
                          wall_seconds=result.wall_seconds, epochs=result.epochs,
                          selected_epoch=result.selected_epoch, trace=result.trace_rows(),
                          hyperparameters=result.hyperparameters)

    def _failed_seed(self, config: ExperimentConfig, seed: int, error: Exception) -> List[CellResult]:
        message = f"base run failed: {type(error).__name__}: {str(error)}"
        return [CellResult(method=m, label=config.unlearn.method_label(m), seed=seed, error=message)
                for m in config.methods]

    def run_experiment(self, config: ExperimentConfig, progress: bool = True) -> RunRecord:
        """
        Run every (method, seed) cell of an experiment.

        The trained model and the oracle are built once per seed and shared by
        that seed's cells. A failing cell is recorded and the rest carry on.
        """
        started = time.perf_counter()
        logger.info(f"Experiment {config.config_hash[:12]}: {config.dataset}, {config.scenario.describe()}, "
                    f"{len(config.methods)} methods x {len(config.seeds)} seeds on {self.workers} workers")
        bases: Dict[int, BaseRun] = {}
        cells: Dict[Tuple[str, int], CellResult] = {}

        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            futures = {pool.submit(self.prepare_base, config, seed): seed for seed in config.seeds}
            for future in as_completed(futures):
                seed = futures[future]
                try:
                    bases[seed] = future.result()
                except Exception as e:
                    logger.error(f"Base run for seed {seed} failed: {str(e)}")
                    for cell in self._failed_seed(config, seed, e):
                        cells[(cell.method, seed)] = cell

            futures = {pool.submit(self.run_cell, config, bases[seed], method): (method, seed)
                       for seed in config.seeds if seed in bases for method in config.methods}
            done = tqdm(as_completed(futures), total=len(futures), desc='cells', disable=None if progress else True)
            for future in done:
                cells[futures[future]] = future.result()

        ordered = [cells[(method, seed)] for method in config.methods for seed in config.seeds]
        record = RunRecord(
            config_hash=config.config_hash,
            config=config.canonical(),
            cells=ordered,
            base_reports={seed: base.original_report.as_dict() for seed, base in sorted(bases.items())},
            oracle_reports={seed: base.oracle_report.as_dict() for seed, base in sorted(bases.items())},
            wall_seconds=time.perf_counter() - started,
        )
        logger.info(f"Experiment {record.config_hash[:12]} finished in {record.wall_seconds:.1f}s "
                    f"with {len(record.failures)} failed cells")
        return record


experiment_service = ExperimentService()

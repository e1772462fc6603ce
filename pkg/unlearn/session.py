"""
The shared unlearning budget: a working copy of the model, its Adam state,
per-epoch evaluation and best-test-accuracy restore.
"""
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np

from data.sets import LabeledSet, SplitDataset
from diffcore.tensor import LayerParams
from hybrid.model import HybridModel, clone
from qunlearn.exceptions import InvalidInputError, TrainingDiverged
from qunlearn.streams import stream
from train.loop import batch_slices, evaluate_loss, set_accuracy
from train.optim import EarlyStopping, OptimizerState, adam_step
from .config import MAX_BUDGET, UnlearnConfig

logger = logging.getLogger(__name__)


@dataclass
class EpochTrace:
    epoch: int
    retain_loss: float
    forget_loss: float
    forget_accuracy: float
    test_accuracy: float


@dataclass
class UnlearnResult:
    method: str
    label: str
    model: HybridModel
    trace: List[EpochTrace]
    wall_seconds: float
    hyperparameters: Dict
    selected_epoch: int = 0

    @property
    def epochs(self) -> int:
        return len(self.trace)

    def trace_rows(self) -> List[dict]:
        return [asdict(row) for row in self.trace]


class UnlearnSession:
    """
    One unlearning run over a private clone of the model.

    ``trainable`` limits which parameters Adam touches; ``gradient_hook``
    may rewrite each gradient map before the step.
    """

    def __init__(self, model: HybridModel, splits: SplitDataset, config: UnlearnConfig,
                 trainable: Optional[List[str]] = None,
                 gradient_hook: Optional[Callable[[LayerParams, int], LayerParams]] = None):
        if not len(splits.forget):
            raise InvalidInputError('unlearning needs a non-empty forget set')
        if not len(splits.retain) or splits.test is None or not len(splits.test):
            raise InvalidInputError('unlearning needs non-empty retain and test sets')
        self.model = clone(model)
        self.splits = splits
        self.config = config
        self.trainable = trainable
        self.gradient_hook = gradient_hook
        self.state = OptimizerState.for_params(self.model.params)
        self.epoch = 0
        self.trace: List[EpochTrace] = []
        self.stopper: Optional[EarlyStopping] = None

    def step(self, grads: LayerParams) -> None:
        if self.gradient_hook is not None:
            grads = self.gradient_hook(grads, self.epoch)
        adam_step(self.model.params, grads, self.state, self.config.lr, self.trainable)

    def batches(self, labeled: LabeledSet, label: str) -> List[np.ndarray]:
        order = stream(self.config.seed, label, self.epoch).permutation(len(labeled))
        return batch_slices(order, self.config.batch_size)

    def paired_batches(self) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        """Retain batches for one epoch, each paired with a forget batch (forget batches cycle)."""
        retain = self.batches(self.splits.retain, 'retain')
        forget = self.batches(self.splits.forget, 'forget')
        for i, retain_idx in enumerate(retain):
            yield retain_idx, forget[i % len(forget)]

    def check_finite(self, value: float) -> None:
        if not np.isfinite(value):
            logger.error(f"Unlearning loss became {value} at epoch {self.epoch}")
            raise TrainingDiverged(self.epoch)

    def evaluate(self) -> EpochTrace:
        splits = self.splits
        return EpochTrace(
            epoch=self.epoch,
            retain_loss=evaluate_loss(self.model, splits.retain),
            forget_loss=evaluate_loss(self.model, splits.forget),
            forget_accuracy=set_accuracy(self.model, splits.forget),
            test_accuracy=set_accuracy(self.model, splits.test),
        )

    def run(self, run_epoch: Callable[['UnlearnSession'], None], keep_all: bool = False) -> HybridModel:
        """
        Call ``run_epoch`` up to ``max_epochs`` times under early stopping,
        then restore the parameters of the best test-accuracy epoch.
        """
        config = self.config
        self.stopper = EarlyStopping(patience=config.patience, keep_all=keep_all)
        for epoch in range(1, min(config.max_epochs, MAX_BUDGET) + 1):
            self.epoch = epoch
            run_epoch(self)
            row = self.evaluate()
            self.trace.append(row)
            logger.debug(f"epoch {epoch}: retain loss {row.retain_loss:.4f}, forget acc "
                         f"{row.forget_accuracy:.4f}, test acc {row.test_accuracy:.4f}")
            if self.stopper(epoch, row.test_accuracy, self.model.params):
                break
        if self.stopper.best_params is not None:
            self.model.params = self.stopper.best_params
        return self.model


def timed(method: str, config: UnlearnConfig, body: Callable[[], Tuple[HybridModel, List[EpochTrace], int]]
          ) -> UnlearnResult:
    started = time.perf_counter()
    model, trace, selected = body()
    elapsed = time.perf_counter() - started
    logger.info(f"{config.method_label(method)} finished after {len(trace)} epochs in {elapsed:.2f}s")
    return UnlearnResult(method=method, label=config.method_label(method), model=model, trace=trace,
                         wall_seconds=elapsed, hyperparameters=config.as_dict(), selected_epoch=selected)

import logging
import time
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from data.sets import LabeledSet
from diffcore import ops
from hybrid.arch import ArchSpec
from hybrid.model import HybridModel, build_model, clone, forward, loss_backward, predict
from qunlearn.exceptions import InvalidInputError, TrainingDiverged
from qunlearn.streams import stream
from .config import TrainConfig
from .optim import EarlyStopping, OptimizerState, adam_step

logger = logging.getLogger(__name__)


@dataclass
class TrainReport:
    train_losses: List[float] = field(default_factory=list)
    test_accuracies: List[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False
    epoch_seconds: List[float] = field(default_factory=list)

    @property
    def epochs(self) -> int:
        return len(self.train_losses)

    @property
    def best_accuracy(self) -> float:
        return self.test_accuracies[self.best_epoch - 1] if self.best_epoch else float('nan')

    def as_dict(self) -> dict:
        return {
            'train_losses': self.train_losses,
            'test_accuracies': self.test_accuracies,
            'best_epoch': self.best_epoch,
            'stopped_early': self.stopped_early,
            'epoch_seconds': self.epoch_seconds,
        }


def batch_slices(order: np.ndarray, batch_size: int) -> List[np.ndarray]:
    return [order[start:start + batch_size] for start in range(0, order.size, batch_size)]


def set_accuracy(model: HybridModel, labeled: LabeledSet) -> float:
    if not len(labeled):
        raise InvalidInputError('accuracy of an empty set is undefined')
    return float(np.mean(predict(model, labeled.inputs).argmax(axis=1) == labeled.labels))


def evaluate_loss(model: HybridModel, labeled: LabeledSet) -> float:
    """Mean cross-entropy of ``model`` on ``labeled`` (same clamp as training)."""
    if not len(labeled):
        raise InvalidInputError('loss of an empty set is undefined')
    probs = predict(model, labeled.inputs)
    picked = probs[np.arange(len(labeled)), labeled.labels]
    return float(-np.mean(np.log(np.maximum(picked, ops.PROB_CLAMP))))


def ce_step(model: HybridModel, inputs: np.ndarray, targets: np.ndarray):
    """Forward one batch and return (loss value, parameter gradients)."""
    _, cache = forward(model, inputs, track_input=False)
    loss = ops.softmax_cross_entropy(cache.logits, targets)
    return float(loss.data), loss_backward(model, cache, loss)


def fit(model: HybridModel, train_set: LabeledSet, test_set: LabeledSet,
        config: TrainConfig) -> Tuple[HybridModel, TrainReport]:
    """
    Train with Adam and early stopping on test accuracy.

    The input model is left untouched; the returned model carries the
    weights of the best epoch.

    Raises:
        TrainingDiverged: the loss became NaN or infinite
    """
    if not len(train_set) or not len(test_set):
        raise InvalidInputError('fit needs non-empty train and test sets')
    model = clone(model)
    state = OptimizerState.for_params(model.params)
    stopper = EarlyStopping(patience=config.patience)
    report = TrainReport()
    targets = train_set.one_hot()
    logger.info(f"Training {model.spec.tag} on {len(train_set)} samples for up to {config.max_epochs} epochs")

    for epoch in range(1, config.max_epochs + 1):
        started = time.perf_counter()
        order = stream(config.seed, 'shuffle', epoch).permutation(len(train_set))
        total = 0.0
        for idx in batch_slices(order, config.batch_size):
            value, grads = ce_step(model, train_set.inputs[idx], targets[idx])
            if not np.isfinite(value):
                logger.error(f"Loss became {value} at epoch {epoch}")
                raise TrainingDiverged(epoch)
            adam_step(model.params, grads, state, config.lr)
            total += value * idx.size
        accuracy = set_accuracy(model, test_set)
        report.train_losses.append(total / len(train_set))
        report.test_accuracies.append(accuracy)
        report.epoch_seconds.append(time.perf_counter() - started)
        if stopper(epoch, accuracy, model.params):
            report.stopped_early = True
            logger.info(f"Early stop at epoch {epoch}; best test accuracy {stopper.best:.4f} "
                        f"at epoch {stopper.best_epoch}")
            break

    model.params = stopper.best_params
    report.best_epoch = stopper.best_epoch
    return model, report


def retrain_oracle(spec: ArchSpec, retain_set: LabeledSet, test_set: LabeledSet, config: TrainConfig,
                   init_seed: int) -> Tuple[HybridModel, TrainReport]:
    """Fresh model from the original init seed, trained on the retain set only."""
    if not len(retain_set):
        raise InvalidInputError('retrain oracle needs a non-empty retain set')
    logger.info(f"Retraining oracle for {spec.tag} on {len(retain_set)} retained samples")
    return fit(build_model(spec, init_seed), retain_set, test_set, config)

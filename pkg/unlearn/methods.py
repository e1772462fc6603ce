"""
The eleven unlearning procedures and their dispatcher.

Every procedure starts from a clone of the trained model, runs under the
budget of ``UnlearnSession`` and returns an ``UnlearnResult``.
"""
import logging
from dataclasses import replace
from typing import Callable, Dict, List, Optional

import numpy as np

from data.sets import LabeledSet, SplitDataset
from diffcore.tensor import LayerParams
from hybrid.model import HybridModel, clone, group_parameters, output_groups, predict, reinitialize
from qunlearn.exceptions import ConfigError, InvalidInputError
from qunlearn.streams import stream
from train.loop import ce_step, set_accuracy
from .config import UnlearnConfig, check_method
from .objectives import combine, complement_labels, distill_step, fgsm_uniform, kl_step, uniform_target
from .session import UnlearnResult, UnlearnSession, timed

logger = logging.getLogger(__name__)

BASELINE_IDS = ('GA', 'Fisher', 'NegGrad+', 'CF-k', 'EU-k', 'SCRUB', 'SCRUB+R', 'Certified', 'Q-MUL')


def _finish(session: UnlearnSession):
    return session.model, session.trace, session.stopper.best_epoch if session.stopper else 0


def _retain_epoch(session: UnlearnSession, labeled: Optional[LabeledSet] = None, label: str = 'retain') -> None:
    labeled = session.splits.retain if labeled is None else labeled
    targets = labeled.one_hot()
    for idx in session.batches(labeled, label):
        value, grads = ce_step(session.model, labeled.inputs[idx], targets[idx])
        session.check_finite(value)
        session.step(grads)


def _finetune(model: HybridModel, splits: SplitDataset, config: UnlearnConfig,
              trainable: Optional[List[str]] = None, gradient_hook=None):
    session = UnlearnSession(model, splits, config, trainable=trainable, gradient_hook=gradient_hook)
    session.run(_retain_epoch)
    return _finish(session)


def finetune_retain(model: HybridModel, splits: SplitDataset, config: UnlearnConfig) -> UnlearnResult:
    """Plain retain-only fine-tuning under the unlearning budget (reference procedure)."""
    return timed('finetune', config, lambda: _finetune(model, splits, config))


def unlearn_ga(model: HybridModel, splits: SplitDataset, config: UnlearnConfig) -> UnlearnResult:
    """Gradient ascent on forget cross-entropy; batches already past ``ga_clip`` are skipped."""
    forget = splits.forget
    targets = forget.one_hot()

    def run_epoch(session):
        for idx in session.batches(forget, 'forget'):
            value, grads = ce_step(session.model, forget.inputs[idx], targets[idx])
            session.check_finite(value)
            if value >= config.ga_clip:
                continue
            session.step(combine([(-1.0, grads)]))

    def body():
        session = UnlearnSession(model, splits, config)
        session.run(run_epoch)
        return _finish(session)

    return timed('GA', config, body)


def fisher_diagonal(model: HybridModel, labeled: LabeledSet) -> LayerParams:
    """Mean squared per-sample gradient of the log-likelihood."""
    targets = labeled.one_hot()
    totals = {name: np.zeros_like(model.params[name]) for name in model.params}
    for i in range(len(labeled)):
        _, grads = ce_step(model, labeled.inputs[i:i + 1], targets[i:i + 1])
        for name in totals:
            totals[name] += grads[name] ** 2
    return LayerParams({name: total / len(labeled) for name, total in totals.items()})


def fisher_noise(model: HybridModel, fisher: LayerParams, config: UnlearnConfig) -> HybridModel:
    """Gaussian noise with variance lambda / (F + 1e-8), capped at lambda * fisher_cap."""
    noised = clone(model)
    for name in noised.params:
        variance = np.minimum(config.lambda_fisher / (fisher[name] + 1e-8),
                              config.lambda_fisher * config.fisher_cap)
        draw = stream(config.seed, 'fisher', name).standard_normal(variance.shape)
        noised.params[name] = noised.params[name] + np.sqrt(variance) * draw
    return noised


def unlearn_fisher(model: HybridModel, splits: SplitDataset, config: UnlearnConfig) -> UnlearnResult:
    def body():
        fisher = fisher_diagonal(model, splits.retain)
        logger.debug(f"Fisher diagonal over {len(splits.retain)} retain samples, "
                     f"mean {np.mean(fisher.flat()):.3e}")
        return _finetune(fisher_noise(model, fisher, config), splits, config)

    return timed('Fisher', config, body)


def unlearn_neggrad_plus(model: HybridModel, splits: SplitDataset, config: UnlearnConfig) -> UnlearnResult:
    """Joint step on alpha * CE(retain) - (1 - alpha) * CE(forget)."""
    retain, forget = splits.retain, splits.forget
    retain_targets, forget_targets = retain.one_hot(), forget.one_hot()
    forget_weight = 1.0 - config.alpha

    def run_epoch(session):
        for retain_idx, forget_idx in session.paired_batches():
            value, grads = ce_step(session.model, retain.inputs[retain_idx], retain_targets[retain_idx])
            session.check_finite(value)
            if forget_weight > 0:
                forget_value, forget_grads = ce_step(session.model, forget.inputs[forget_idx],
                                                     forget_targets[forget_idx])
                session.check_finite(forget_value)
                grads = combine([(config.alpha, grads), (-forget_weight, forget_grads)])
            session.step(grads)

    def body():
        session = UnlearnSession(model, splits, config)
        session.run(run_epoch)
        return _finish(session)

    return timed('NegGrad+', config, body)


def unlearn_cf_k(model: HybridModel, splits: SplitDataset, config: UnlearnConfig) -> UnlearnResult:
    """Fine-tune only the k output-side layer groups; the rest stay frozen."""
    trainable = group_parameters(model, output_groups(model, config.k))
    return timed('CF-k', config, lambda: _finetune(model, splits, config, trainable=trainable))


def unlearn_eu_k(model: HybridModel, splits: SplitDataset, config: UnlearnConfig) -> UnlearnResult:
    """Re-initialize the k output-side layer groups, then fine-tune on retain."""
    groups = output_groups(model, config.k)
    fresh = reinitialize(model, groups, config.seed)
    logger.debug(f"Re-initialized {', '.join(groups)} for EU-k{config.k}")
    return timed('EU-k', config, lambda: _finetune(fresh, splits, config))


def _scrub_session(model: HybridModel, splits: SplitDataset, config: UnlearnConfig,
                   keep_all: bool = False) -> UnlearnSession:
    retain, forget = splits.retain, splits.forget
    retain_teacher, forget_teacher = predict(model, retain.inputs), predict(model, forget.inputs)
    retain_targets = retain.one_hot()

    def run_epoch(session):
        if session.epoch <= config.scrub_max_steps:
            for idx in session.batches(forget, 'forget'):
                value, grads = distill_step(session.model, forget.inputs[idx], forget_teacher[idx], sign=-1.0)
                session.check_finite(value)
                session.step(grads)
        for idx in session.batches(retain, 'retain'):
            value, grads = distill_step(session.model, retain.inputs[idx], retain_teacher[idx],
                                        targets=retain_targets[idx])
            session.check_finite(value)
            session.step(grads)

    session = UnlearnSession(model, splits, config)
    session.run(run_epoch, keep_all=keep_all)
    return session


def unlearn_scrub(model: HybridModel, splits: SplitDataset, config: UnlearnConfig) -> UnlearnResult:
    """
    Student/teacher matching against the frozen trained model.

    The first ``scrub_max_steps`` epochs push the student away from the
    teacher on forget batches before the retain pass; every epoch then pulls
    it back on retain batches with KL plus cross-entropy.
    """
    return timed('SCRUB', config, lambda: _finish(_scrub_session(model, splits, config)))


def rewind_target(model: HybridModel, splits: SplitDataset) -> float:
    """
    Forget accuracy an oracle is expected to reach, estimated on held-out data.

    Full-class: accuracy of the trained model on test samples of the
    forgotten class. Subset: its overall test accuracy.
    """
    held_out = splits.forgotten_test() if splits.spec.is_full_class else splits.test
    if held_out is None or not len(held_out):
        held_out = splits.test
    return set_accuracy(model, held_out)


def unlearn_scrub_rewind(model: HybridModel, splits: SplitDataset, config: UnlearnConfig) -> UnlearnResult:
    """SCRUB, then rewind to the epoch whose forget accuracy is closest to ``rewind_target``."""
    def body():
        target = rewind_target(model, splits)
        session = _scrub_session(model, splits, config, keep_all=True)
        if not session.trace:
            return session.model, session.trace, 0
        gaps = [abs(row.forget_accuracy - target) for row in session.trace]
        chosen = int(np.argmin(gaps))
        session.model.params = session.stopper.snapshots[chosen]
        logger.debug(f"SCRUB+R rewound to epoch {chosen + 1} (target forget accuracy {target:.4f})")
        return session.model, session.trace, chosen + 1

    return timed('SCRUB+R', config, body)


class GaussianGradientNoise:
    """Adds N(0, sigma^2) to every gradient coordinate, drawn from one stream per epoch."""

    def __init__(self, sigma: float, seed: int):
        self.sigma = sigma
        self.seed = seed
        self._epoch = None
        self._rng = None

    def __call__(self, grads: LayerParams, epoch: int) -> LayerParams:
        if epoch != self._epoch:
            self._epoch = epoch
            self._rng = stream(self.seed, 'certified', epoch)
        return LayerParams({name: grads[name] + self.sigma * self._rng.standard_normal(grads[name].shape)
                            for name in grads})


def unlearn_certified(model: HybridModel, splits: SplitDataset, config: UnlearnConfig) -> UnlearnResult:
    hook = GaussianGradientNoise(config.sigma_noise, config.seed) if config.sigma_noise > 0 else None
    return timed('Certified', config, lambda: _finetune(model, splits, config, gradient_hook=hook))


def substitute_labels(forget: LabeledSet, seed: int) -> LabeledSet:
    """Every forget sample gets a fixed, seeded, incorrect label."""
    num_classes = forget.num_classes
    if num_classes < 2:
        raise InvalidInputError('label substitution needs at least 2 classes')
    shift = stream(seed, 'qmul', 'labels').integers(1, num_classes, size=len(forget))
    return LabeledSet(forget.inputs, (forget.labels + shift) % num_classes, num_classes, forget.ids)


def unlearn_qmul(model: HybridModel, splits: SplitDataset, config: UnlearnConfig) -> UnlearnResult:
    """Fine-tune on retain plus relabeled forget samples."""
    union = splits.retain.merge(substitute_labels(splits.forget, config.seed))

    def body():
        session = UnlearnSession(model, splits, config)
        session.run(lambda s: _retain_epoch(s, union, 'qmul'))
        return _finish(session)

    return timed('Q-MUL', config, body)


def unlearn_lca(model: HybridModel, splits: SplitDataset, config: UnlearnConfig) -> UnlearnResult:
    """
    Pull forget predictions toward their complementary label distribution,
    one retain cross-entropy step before every forget step.

    Raises:
        InvalidInputError: empty forget set
    """
    retain, forget = splits.retain, splits.forget
    retain_targets = retain.one_hot()
    complements = complement_labels(forget.labels, forget.num_classes)

    def run_epoch(session):
        for retain_idx, forget_idx in session.paired_batches():
            value, grads = ce_step(session.model, retain.inputs[retain_idx], retain_targets[retain_idx])
            session.check_finite(value)
            session.step(grads)
            value, grads = kl_step(session.model, forget.inputs[forget_idx], complements[forget_idx],
                                   config.kl_direction)
            session.check_finite(value)
            session.step(grads)

    def body():
        session = UnlearnSession(model, splits, config)
        session.run(run_epoch)
        return _finish(session)

    return timed('LCA', config, body)


def unlearn_adv_uniform(model: HybridModel, splits: SplitDataset, config: UnlearnConfig) -> UnlearnResult:
    """
    Push predictions on adversarially perturbed forget samples toward uniform.

    The perturbation is regenerated with the current parameters for every
    forget batch.
    """
    retain, forget = splits.retain, splits.forget
    retain_targets = retain.one_hot()

    def run_epoch(session):
        for retain_idx, forget_idx in session.paired_batches():
            value, grads = ce_step(session.model, retain.inputs[retain_idx], retain_targets[retain_idx])
            session.check_finite(value)
            session.step(grads)
            adversarial = fgsm_uniform(session.model, forget.inputs[forget_idx], config.eps_adv)
            target = uniform_target(forget_idx.size, forget.num_classes)
            value, grads = kl_step(session.model, adversarial, target)
            session.check_finite(value)
            session.step(grads)

    def body():
        session = UnlearnSession(model, splits, config)
        session.run(run_epoch)
        return _finish(session)

    return timed('ADV-UNIFORM', config, body)


METHODS: Dict[str, Callable[[HybridModel, SplitDataset, UnlearnConfig], UnlearnResult]] = {
    'GA': unlearn_ga,
    'Fisher': unlearn_fisher,
    'NegGrad+': unlearn_neggrad_plus,
    'CF-k': unlearn_cf_k,
    'EU-k': unlearn_eu_k,
    'SCRUB': unlearn_scrub,
    'SCRUB+R': unlearn_scrub_rewind,
    'Certified': unlearn_certified,
    'Q-MUL': unlearn_qmul,
    'LCA': unlearn_lca,
    'ADV-UNIFORM': unlearn_adv_uniform,
}

def unlearn_baseline(method: str, model: HybridModel, splits: SplitDataset, config: UnlearnConfig) -> UnlearnResult:
    if method not in BASELINE_IDS:
        raise ConfigError(f"{method!r} is not a baseline method; expected one of {', '.join(BASELINE_IDS)}")
    return run_method(method, model, splits, config)


def run_method(method: str, model: HybridModel, splits: SplitDataset, config: UnlearnConfig) -> UnlearnResult:
    """
    Run one unlearning method by id.

    Args:
        method: One of ``METHOD_IDS``
        model: Trained model; never modified
        splits: Retain, forget and test sets
        config: Budget and hyperparameters

    Returns:
        UnlearnResult: the unlearned model, its per-epoch trace and the
        resolved hyperparameters

    Raises:
        ConfigError: unknown method id
    """
    check_method(method)
    config = replace(config, method=method)
    logger.info(f"Unlearning with {config.method_label(method)} ({len(splits.forget)} forget / "
                f"{len(splits.retain)} retain samples, seed {config.seed})")
    return METHODS[method](model, splits, config)

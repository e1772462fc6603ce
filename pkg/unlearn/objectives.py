"""Targets and per-batch gradients for the unlearning objectives."""
from typing import Iterable, Tuple

import numpy as np

from diffcore import ops
from diffcore.tensor import LayerParams
from hybrid.model import HybridModel, forward, loss_backward
from qunlearn.exceptions import InvalidInputError


def complement_labels(labels, num_classes: int) -> np.ndarray:
    """
    Complementary label rows: 0 at the true class, 1/(K-1) elsewhere.

    Raises:
        InvalidInputError: fewer than two classes, or a label out of range
    """
    if num_classes < 2:
        raise InvalidInputError(f"complement labels need at least 2 classes, got {num_classes}")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise InvalidInputError(f"labels must lie in [0, {num_classes})")
    rows = np.full((labels.size, num_classes), 1.0 / (num_classes - 1))
    rows[np.arange(labels.size), labels] = 0.0
    return rows


def uniform_target(batch: int, num_classes: int) -> np.ndarray:
    return np.full((batch, num_classes), 1.0 / num_classes)


def combine(terms: Iterable[Tuple[float, LayerParams]]) -> LayerParams:
    """Weighted sum of gradient maps keyed alike."""
    terms = list(terms)
    out = terms[0][1].zeros_like()
    for weight, grads in terms:
        for name in out:
            out[name] = out[name] + weight * grads[name]
    return out


def kl_step(model: HybridModel, inputs, target, direction: str = 'forward') -> Tuple[float, LayerParams]:
    """
    KL between the model's prediction and a fixed target distribution.

    ``forward`` is KL(prediction || target), ``reversed`` swaps the arguments.
    """
    probs, cache = forward(model, inputs, track_input=False)
    if direction == 'forward':
        loss = ops.kl_loss(probs, target)
    else:
        loss = ops.kl_loss(target, probs)
    return float(loss.data), loss_backward(model, cache, loss)


def distill_step(model: HybridModel, inputs, teacher_probs, targets=None,
                 sign: float = 1.0) -> Tuple[float, LayerParams]:
    """
    ``sign`` times KL(student || teacher), plus cross-entropy when targets are given.
    """
    probs, cache = forward(model, inputs, track_input=False)
    loss = ops.kl_loss(probs, teacher_probs) * sign
    if targets is not None:
        loss = loss + ops.softmax_cross_entropy(cache.logits, targets)
    return float(loss.data), loss_backward(model, cache, loss)


def fgsm_uniform(model: HybridModel, inputs, eps: float) -> np.ndarray:
    """
    One signed-gradient step on the inputs along d KL(f(x) || u) / dx.

    Image inputs stay in [0, 1]; zero gradients leave samples unchanged.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    probs, cache = forward(model, inputs, track_input=True)
    loss = ops.kl_loss(probs, uniform_target(inputs.shape[0], model.spec.num_classes))
    loss_backward(model, cache, loss)
    grad = cache.inputs.grad if cache.inputs.grad is not None else np.zeros_like(inputs)
    adversarial = inputs + eps * np.sign(grad)
    if model.spec.is_image:
        adversarial = np.clip(adversarial, 0.0, 1.0)
    return adversarial

"""Adam and the early-stopping monitor shared by training and unlearning loops."""
import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional

import numpy as np

from diffcore.tensor import LayerParams
from qunlearn.exceptions import DimensionError

logger = logging.getLogger(__name__)


@dataclass
class OptimizerState:
    m: LayerParams
    v: LayerParams
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: LayerParams) -> 'OptimizerState':
        return cls(m=params.zeros_like(), v=params.zeros_like())


def adam_step(params: LayerParams, grads: LayerParams, state: OptimizerState, lr: float,
              trainable: Optional[Iterable[str]] = None) -> LayerParams:
    """
    One bias-corrected Adam update, applied to ``params`` in place.

    Args:
        params: Parameters to update
        grads: Gradients keyed like ``params``
        state: Moments and step counter, advanced in place
        lr: Step size
        trainable: Restrict the update (and the moments) to these names

    Returns:
        LayerParams: ``params``

    Raises:
        DimensionError: a gradient is missing or shaped differently
    """
    if trainable is None:
        names = list(params)
    else:
        allowed = set(trainable)
        names = [name for name in params if name in allowed]
    for name in names:
        if name not in grads or grads[name].shape != params[name].shape:
            got = grads[name].shape if name in grads else 'nothing'
            raise DimensionError(f"gradient for {name} is {got}, parameter is {params[name].shape}")
        if state.m[name].shape != params[name].shape:
            raise DimensionError(f"optimizer moments for {name} do not match the parameter")

    state.step += 1
    bias1 = 1.0 - state.beta1 ** state.step
    bias2 = 1.0 - state.beta2 ** state.step
    for name in names:
        g = grads[name]
        m = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        state.m[name] = m
        state.v[name] = v
        params[name] = params[name] - lr * (m / bias1) / (np.sqrt(v / bias2) + state.eps)
    return params


@dataclass
class EarlyStopping:
    """
    Tracks a score to maximise and the parameters that achieved it.

    Only strict improvements count, so ties keep the earliest epoch.
    """
    patience: int
    keep_all: bool = False
    best: float = float('-inf')
    best_epoch: int = 0
    best_params: Optional[LayerParams] = None
    wait: int = 0
    stopped_epoch: int = 0
    snapshots: List[LayerParams] = field(default_factory=list)

    def __call__(self, epoch: int, score: float, params: LayerParams) -> bool:
        if self.keep_all:
            self.snapshots.append(params.copy())
        if score > self.best:
            self.best = score
            self.best_epoch = epoch
            self.best_params = params.copy()
            self.wait = 0
            return False
        self.wait += 1
        if self.wait >= self.patience:
            self.stopped_epoch = epoch
            logger.debug(f"Early stopping at epoch {epoch}, best {self.best:.4f} at epoch {self.best_epoch}")
            return True
        return False

"""Utility, divergence, agreement and quantum-state scores."""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from data.sets import LabeledSet
from diffcore.ops import kl_rows
from hybrid.model import HybridModel, predict
from qsim.statevector import fidelity, trace_distance
from qunlearn.exceptions import ConfigError, DimensionError, InvalidInputError

ROW_TOLERANCE = 1e-9
UQI_DELTA = 1e-6


@dataclass(frozen=True, eq=False)
class ProbTable:
    """Per-sample probability rows of one model on one set."""
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64)
        if probs.ndim != 2:
            raise DimensionError(f"probability table must be [N, K], got {probs.shape}")
        if np.any(probs < 0) or np.any(np.abs(probs.sum(axis=1) - 1.0) > ROW_TOLERANCE):
            raise InvalidInputError('probability rows must be non-negative and sum to 1')
        probs.setflags(write=False)
        object.__setattr__(self, 'probs', probs)

    @classmethod
    def of(cls, model: HybridModel, labeled: LabeledSet) -> 'ProbTable':
        return cls(predict(model, labeled.inputs))

    def __len__(self):
        return int(self.probs.shape[0])

    def predictions(self) -> np.ndarray:
        # argmax keeps the lowest index on ties
        return self.probs.argmax(axis=1)


def _require_rows(labeled: LabeledSet) -> None:
    if not len(labeled):
        raise InvalidInputError('metrics of an empty set are undefined')


def _aligned(p: ProbTable, q: ProbTable) -> None:
    if p.probs.shape != q.probs.shape:
        raise DimensionError(f"probability tables {p.probs.shape} and {q.probs.shape} are not aligned")


def accuracy_of(predictions: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(predictions == labels))


def f1_of(predictions: np.ndarray, labels: np.ndarray, num_classes: int) -> float:
    """Unweighted mean of per-class F1; a class absent from both sides scores 0."""
    scores = []
    for c in range(num_classes):
        tp = np.sum((predictions == c) & (labels == c))
        predicted = np.sum(predictions == c)
        actual = np.sum(labels == c)
        precision = tp / predicted if predicted else 0.0
        recall = tp / actual if actual else 0.0
        total = precision + recall
        scores.append(2 * precision * recall / total if total > 0 else 0.0)
    return float(np.mean(scores))


def accuracy(model: HybridModel, labeled: LabeledSet) -> float:
    _require_rows(labeled)
    return accuracy_of(ProbTable.of(model, labeled).predictions(), labeled.labels)


def macro_f1(model: HybridModel, labeled: LabeledSet) -> float:
    _require_rows(labeled)
    return f1_of(ProbTable.of(model, labeled).predictions(), labeled.labels, labeled.num_classes)


def divergences(p: ProbTable, q: ProbTable) -> Tuple[float, float]:
    """
    Mean KL(p || q) and mean Jensen-Shannon divergence, natural log.

    Raises:
        DimensionError: the tables differ in sample count or class count
    """
    _aligned(p, q)
    m = (p.probs + q.probs) / 2.0
    kl = float(np.mean(kl_rows(p.probs, q.probs)))
    js = float(np.mean(0.5 * kl_rows(p.probs, m) + 0.5 * kl_rows(q.probs, m)))
    return kl, js


def agreement(p: ProbTable, q: ProbTable) -> float:
    _aligned(p, q)
    return accuracy_of(p.predictions(), q.predictions())


def uqi(forget_original: float, forget_unlearned: float, forget_oracle: float,
        retain_original: float, retain_unlearned: float, delta: float = UQI_DELTA) -> float:
    """
    Unlearning quality: forgetting alignment with the oracle minus the
    relative retain-accuracy drop.

    Alignment is the share of the original-to-oracle forget-accuracy move
    that the unlearned model makes, clamped to [-1, 1]. When the original
    and the oracle already agree within ``delta``, alignment is 1 if the
    unlearned model agrees too, else the move is measured against ``delta``.
    """
    gap = forget_original - forget_oracle
    moved = forget_original - forget_unlearned
    if abs(gap) < delta:
        alignment = 1.0 if abs(forget_unlearned - forget_oracle) < delta else moved / delta
    else:
        alignment = moved / gap
    alignment = float(np.clip(alignment, -1.0, 1.0))
    penalty = max(0.0, retain_original - retain_unlearned) / (retain_original + delta)
    return alignment - penalty


def state_distance(model_a: HybridModel, model_b: HybridModel, labeled: LabeledSet) -> Tuple[float, float]:
    """
    Mean fidelity and mean trace distance between the VQC output states
    the two models produce for every sample.

    Raises:
        ConfigError: the models do not share an architecture
    """
    if model_a.spec != model_b.spec:
        raise ConfigError(f"cannot compare states of {model_a.spec.tag} and {model_b.spec.tag}")
    _require_rows(labeled)
    _, states_a = predict(model_a, labeled.inputs, return_states=True)
    _, states_b = predict(model_b, labeled.inputs, return_states=True)
    return float(np.mean(fidelity(states_a, states_b))), float(np.mean(trace_distance(states_a, states_b)))

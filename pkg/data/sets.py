"""Labeled sets, forget specifications and the retain/forget/test split."""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from qunlearn.exceptions import DimensionError, InvalidInputError


@dataclass(frozen=True, eq=False)
class LabeledSet:
    """
    Inputs with class ids.

    ``ids`` identify every sample in the source it was loaded from and
    survive subsetting, so partitions can be checked at index level.
    """
    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int
    ids: Optional[np.ndarray] = None

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64)
        object.__setattr__(self, 'labels', labels)
        object.__setattr__(self, 'inputs', np.array(self.inputs, dtype=np.float64))
        ids = np.arange(labels.shape[0]) if self.ids is None else np.array(self.ids, dtype=np.int64)
        object.__setattr__(self, 'ids', ids)
        if self.inputs.shape[0] != labels.shape[0] or self.ids.shape[0] != labels.shape[0]:
            raise DimensionError(f"{self.inputs.shape[0]} inputs but {labels.shape[0]} labels")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise InvalidInputError(f"labels must lie in [0, {self.num_classes})")
        for array in (self.inputs, self.labels, self.ids):
            array.setflags(write=False)

    def __len__(self):
        return int(self.labels.shape[0])

    def take(self, positions) -> 'LabeledSet':
        positions = np.asarray(positions, dtype=np.int64)
        return LabeledSet(self.inputs[positions], self.labels[positions], self.num_classes, self.ids[positions])

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def one_hot(self) -> np.ndarray:
        return np.eye(self.num_classes)[self.labels]

    def of_class(self, class_id: int) -> 'LabeledSet':
        return self.take(np.flatnonzero(self.labels == class_id))

    def merge(self, other: 'LabeledSet') -> 'LabeledSet':
        """Union ordered by id."""
        inputs = np.concatenate([self.inputs, other.inputs])
        labels = np.concatenate([self.labels, other.labels])
        ids = np.concatenate([self.ids, other.ids])
        order = np.argsort(ids, kind='stable')
        return LabeledSet(inputs[order], labels[order], self.num_classes, ids[order])


@dataclass(frozen=True)
class ForgetSpec:
    variant: str
    fraction: Optional[float] = None
    seed: int = 0
    class_id: Optional[int] = None
    stratified: bool = False

    def __post_init__(self):
        if self.variant == 'subset':
            if self.fraction is None or not 0.0 < self.fraction < 1.0:
                raise InvalidInputError(f"subset fraction must lie in (0, 1), got {self.fraction}")
        elif self.variant == 'full_class':
            if self.class_id is None or self.class_id < 0:
                raise InvalidInputError(f"full-class forgetting needs a class id, got {self.class_id}")
        else:
            raise InvalidInputError(f"unknown forget variant {self.variant!r}")

    @classmethod
    def subset(cls, fraction: float, seed: int = 0, stratified: bool = False) -> 'ForgetSpec':
        return cls(variant='subset', fraction=fraction, seed=seed, stratified=stratified)

    @classmethod
    def full_class(cls, class_id: int) -> 'ForgetSpec':
        return cls(variant='full_class', class_id=class_id)

    @property
    def is_full_class(self) -> bool:
        return self.variant == 'full_class'

    def describe(self) -> str:
        if self.is_full_class:
            return f"full_class({self.class_id})"
        return f"subset({self.fraction}{', stratified' if self.stratified else ''})"


@dataclass(frozen=True, eq=False)
class SplitDataset:
    retain: LabeledSet
    forget: LabeledSet
    test: Optional[LabeledSet]
    spec: ForgetSpec

    @property
    def train(self) -> LabeledSet:
        return self.retain.merge(self.forget)

    @property
    def num_classes(self) -> int:
        return self.retain.num_classes

    def forgotten_test(self) -> Optional[LabeledSet]:
        """Test samples of the forgotten class (full-class scenarios only)."""
        if not self.spec.is_full_class or self.test is None:
            return None
        return self.test.of_class(self.spec.class_id)

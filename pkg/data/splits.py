import logging
import math
from typing import Tuple

import numpy as np

from qunlearn.exceptions import CapacityError, InvalidInputError
from qunlearn.streams import stream
from .sets import ForgetSpec, LabeledSet, SplitDataset

logger = logging.getLogger(__name__)


def subsample_indices(labels: np.ndarray, num_classes: int, per_class: int, seed: int) -> np.ndarray:
    """Sorted positions of ``per_class`` seeded draws from every class."""
    chosen = []
    for c in range(num_classes):
        members = np.flatnonzero(labels == c)
        if members.size < per_class:
            raise CapacityError(f"class {c} has {members.size} samples, {per_class} requested")
        order = stream(seed, 'subsample', c).permutation(members.size)[:per_class]
        chosen.append(members[order])
    return np.sort(np.concatenate(chosen))


def subsample_per_class(labeled: LabeledSet, per_class: int, seed: int) -> LabeledSet:
    if per_class < 1:
        raise InvalidInputError(f"per_class must be positive, got {per_class}")
    return labeled.take(subsample_indices(labeled.labels, labeled.num_classes, per_class, seed))


def split(labeled: LabeledSet, test_fraction: float, seed: int) -> Tuple[LabeledSet, LabeledSet]:
    """Stratified (train, test): round(n_c * f) test samples from every class c."""
    if not 0.0 < test_fraction < 1.0:
        raise InvalidInputError(f"test fraction must lie in (0, 1), got {test_fraction}")
    train_pos, test_pos = [], []
    for c in range(labeled.num_classes):
        members = np.flatnonzero(labeled.labels == c)
        n_test = int(math.floor(members.size * test_fraction + 0.5))
        shuffled = members[stream(seed, 'split', c).permutation(members.size)]
        test_pos.append(shuffled[:n_test])
        train_pos.append(shuffled[n_test:])
    train_pos, test_pos = np.sort(np.concatenate(train_pos)), np.sort(np.concatenate(test_pos))
    if train_pos.size == 0 or test_pos.size == 0:
        raise InvalidInputError(f"split of {len(labeled)} samples at {test_fraction} leaves an empty partition")
    return labeled.take(train_pos), labeled.take(test_pos)


def _forget_count(fraction: float, n: int) -> int:
    return int(math.ceil(fraction * n - 1e-9))


def make_forget(train: LabeledSet, spec: ForgetSpec, test: LabeledSet = None) -> SplitDataset:
    """
    Partition ``train`` into retain and forget sets.

    Subset draws ceil(f * N) positions by seeded shuffle, per class when
    ``spec.stratified``; FullClass moves every sample of the class.

    Raises:
        InvalidInputError: either partition would be empty, or the class id
            is outside [0, K)
    """
    n = len(train)
    if spec.is_full_class:
        if spec.class_id >= train.num_classes:
            raise InvalidInputError(f"class {spec.class_id} outside [0, {train.num_classes})")
        forget_mask = train.labels == spec.class_id
    else:
        forget_mask = np.zeros(n, dtype=bool)
        if spec.stratified:
            for c in range(train.num_classes):
                members = np.flatnonzero(train.labels == c)
                count = _forget_count(spec.fraction, members.size)
                forget_mask[members[stream(spec.seed, 'forget', c).permutation(members.size)[:count]]] = True
        else:
            count = _forget_count(spec.fraction, n)
            forget_mask[stream(spec.seed, 'forget').permutation(n)[:count]] = True

    forget_pos, retain_pos = np.flatnonzero(forget_mask), np.flatnonzero(~forget_mask)
    if forget_pos.size == 0 or retain_pos.size == 0:
        raise InvalidInputError(f"{spec.describe()} on {n} samples leaves an empty partition "
                                f"(retain {retain_pos.size}, forget {forget_pos.size})")
    logger.info(f"Forget split {spec.describe()}: retain {retain_pos.size}, forget {forget_pos.size}")
    return SplitDataset(retain=train.take(retain_pos), forget=train.take(forget_pos), test=test, spec=spec)

from django.conf import settings
from django.core.cache import cache
from pathlib import Path
from typing import Dict, Optional
import logging

import numpy as np

from qunlearn.exceptions import ConfigError
from .idx import read_idx, read_verified
from .iris import load_iris
from .sets import ForgetSpec, LabeledSet, SplitDataset
from .splits import make_forget, split, subsample_indices

logger = logging.getLogger(__name__)


class DatasetService:
    """Loads configured datasets and turns them into retain/forget/test splits"""

    def __init__(self):
        self.files = settings.DATASET_FILES

    def _paths(self, dataset: str, paths: Optional[Dict[str, str]]) -> Dict[str, Path]:
        if dataset not in self.files:
            raise ConfigError(f"unknown dataset {dataset!r}; expected one of {sorted(self.files)}")
        resolved = dict(self.files[dataset])
        resolved.update({key: Path(value) for key, value in (paths or {}).items()})
        return resolved

    def _raw_images(self, dataset: str, paths: Dict[str, Path], checksums: Dict[str, str]):
        """Decoded uint8 images and labels, cached per file pair."""
        key = f"idx:{paths['images']}:{paths['labels']}"
        cached = cache.get(key)
        if cached is not None:
            return cached
        try:
            images = read_idx(paths['images'], checksums.get('images'), raw=True)
            labels = read_idx(paths['labels'], checksums.get('labels'))
        except Exception as e:
            logger.error(f"Failed to read {dataset} files: {str(e)}")
            raise
        if images.shape[0] != labels.shape[0]:
            raise ConfigError(f"{dataset}: {images.shape[0]} images but {labels.shape[0]} labels")
        cache.set(key, (images, labels))
        return images, labels

    def load(self, dataset: str, per_class: Optional[int] = None, seed: int = 0,
             paths: Optional[Dict[str, str]] = None, checksums: Optional[Dict[str, str]] = None) -> LabeledSet:
        """
        Load a dataset as a LabeledSet.

        Image datasets are subsampled to ``per_class`` samples per class
        before pixel scaling; iris ignores ``per_class``.
        """
        paths = self._paths(dataset, paths)
        checksums = checksums or {}
        if dataset == 'iris':
            try:
                labeled = load_iris(read_verified(paths['csv'], checksums.get('csv')).decode('utf-8'))
            except ConfigError as e:
                logger.error(f"Failed to read iris file: {str(e)}")
                raise
            logger.info(f"Loaded iris: {len(labeled)} samples")
            return labeled

        images, labels = self._raw_images(dataset, paths, checksums)
        num_classes = 10
        if per_class is None:
            positions = np.arange(labels.shape[0])
        else:
            positions = subsample_indices(labels, num_classes, per_class, seed)
        labeled = LabeledSet(inputs=images[positions] / 255.0, labels=labels[positions],
                             num_classes=num_classes, ids=positions)
        logger.info(f"Loaded {dataset}: {len(labeled)} samples ({per_class or 'all'} per class)")
        return labeled

    def prepare(self, dataset: str, forget: ForgetSpec, seed: int, per_class: Optional[int] = None,
                test_fraction: Optional[float] = None, paths: Optional[Dict[str, str]] = None,
                checksums: Optional[Dict[str, str]] = None) -> SplitDataset:
        """Load, split off the test set, then carve the forget set out of the training part."""
        labeled = self.load(dataset, per_class=per_class, seed=seed, paths=paths, checksums=checksums)
        fraction = settings.TEST_FRACTION if test_fraction is None else test_fraction
        train, test = split(labeled, fraction, seed)
        return make_forget(train, forget, test=test)


dataset_service = DatasetService()

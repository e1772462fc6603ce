import csv
import io

import numpy as np

from qunlearn.exceptions import FormatError
from .sets import LabeledSet

IRIS_CLASSES = ('setosa', 'versicolor', 'virginica')


def _class_id(name: str, line: int) -> int:
    key = name.strip().lower()
    if key.startswith('iris-'):
        key = key[len('iris-'):]
    try:
        return IRIS_CLASSES.index(key)
    except ValueError:
        raise FormatError(f"unknown iris class {name.strip()!r}", line=line)


def _is_header(row) -> bool:
    try:
        float(row[0])
        return False
    except ValueError:
        return True


def load_iris(csv_text: str) -> LabeledSet:
    """
    Parse the four-feature iris CSV and standardize every column.

    Blank lines and a leading header row are skipped; class names may carry
    the "Iris-" prefix. Mean and population standard deviation come from the
    whole file.

    Raises:
        FormatError: a row that does not have four numbers and a known
            class, with its 1-based line number
    """
    features, labels = [], []
    seen_data = False
    for line, row in enumerate(csv.reader(io.StringIO(csv_text)), start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if not seen_data and _is_header(row):
            seen_data = True
            continue
        seen_data = True
        if len(row) != 5:
            raise FormatError(f"expected 5 fields, found {len(row)}", line=line)
        try:
            features.append([float(cell) for cell in row[:4]])
        except ValueError:
            raise FormatError(f"non-numeric feature in {row[:4]}", line=line)
        labels.append(_class_id(row[4], line))

    if not features:
        raise FormatError('no iris rows found', line=1)
    x = np.array(features)
    std = x.std(axis=0)
    x = (x - x.mean(axis=0)) / np.where(std > 0, std, 1.0)
    return LabeledSet(inputs=x, labels=np.array(labels), num_classes=len(IRIS_CLASSES))

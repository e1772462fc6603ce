import gzip
import hashlib
import struct
import tempfile
import unittest
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.cache import cache
from django.test import SimpleTestCase

from qunlearn.exceptions import CapacityError, ConfigError, FormatError, InvalidInputError
from qunlearn.streams import stream
from .idx import parse_idx, read_idx
from .iris import load_iris
from .service import dataset_service
from .sets import ForgetSpec, LabeledSet
from .splits import make_forget, split, subsample_per_class


def image_blob(pixels):
    pixels = np.asarray(pixels, dtype=np.uint8)
    n, rows, cols = pixels.shape
    return struct.pack('>IIII', 0x803, n, rows, cols) + pixels.tobytes()


def label_blob(labels):
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack('>II', 0x801, labels.size) + labels.tobytes()


def synthetic_set(per_class, num_classes, seed=0):
    labels = np.repeat(np.arange(num_classes), per_class)
    inputs = stream(seed, 'synthetic').normal(size=(labels.size, 4))
    return LabeledSet(inputs=inputs, labels=labels, num_classes=num_classes)


class ParseIdxTest(SimpleTestCase):
    def test_two_image_fixture(self):
        blob = image_blob([[[0, 255], [51, 102]], [[255, 0], [0, 255]]])
        images = parse_idx(blob)
        self.assertEqual(images.shape, (2, 1, 2, 2))
        np.testing.assert_array_equal(images[0, 0], [[0.0, 1.0], [0.2, 0.4]])
        np.testing.assert_array_equal(images[1, 0], [[1.0, 0.0], [0.0, 1.0]])
        self.assertEqual(parse_idx(blob, raw=True).dtype, np.uint8)

    def test_labels(self):
        np.testing.assert_array_equal(parse_idx(label_blob([5, 0, 4])), [5, 0, 4])

    def test_truncated_payload_reports_offset(self):
        blob = image_blob(np.zeros((2, 2, 2)))
        with self.assertRaises(FormatError) as ctx:
            parse_idx(blob[:-1])
        self.assertEqual(ctx.exception.offset, len(blob) - 1)

    def test_bad_magic(self):
        blob = struct.pack('>II', 0x802, 1) + b'\x00'
        with self.assertRaises(FormatError) as ctx:
            parse_idx(blob)
        self.assertEqual(ctx.exception.offset, 0)

    def test_trailing_bytes(self):
        with self.assertRaises(FormatError) as ctx:
            parse_idx(label_blob([1, 2]) + b'\x07')
        self.assertEqual(ctx.exception.offset, 10)

    def test_truncated_header(self):
        with self.assertRaises(FormatError) as ctx:
            parse_idx(struct.pack('>II', 0x803, 1))
        self.assertEqual(ctx.exception.offset, 8)


class ReadIdxTest(SimpleTestCase):
    def setUp(self):
        """Set up a gzip label file in a temporary directory."""
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / 'labels.gz'
        self.path.write_bytes(gzip.compress(label_blob([3, 1, 4])))

    def tearDown(self):
        self.tmp.cleanup()

    def test_gzip_file(self):
        np.testing.assert_array_equal(read_idx(self.path), [3, 1, 4])

    def test_checksum(self):
        digest = hashlib.sha256(self.path.read_bytes()).hexdigest()
        np.testing.assert_array_equal(read_idx(self.path, sha256=digest), [3, 1, 4])
        with self.assertRaises(ConfigError):
            read_idx(self.path, sha256='0' * 64)

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            read_idx(Path(self.tmp.name) / 'absent.gz')

    @unittest.skipUnless(settings.DATASET_FILES['mnist']['labels'].is_file(), 'MNIST files not present')
    def test_canonical_mnist_first_label(self):
        """Ensure the parser agrees with a byte-level read of the official label file."""
        with gzip.open(settings.DATASET_FILES['mnist']['labels'], 'rb') as f:
            independent = f.read(9)[8]
        labels = read_idx(settings.DATASET_FILES['mnist']['labels'])
        self.assertEqual(independent, 5)
        self.assertEqual(labels[0], independent)


class IrisTest(SimpleTestCase):
    def setUp(self):
        """Set up the bundled iris fixture."""
        self.text = settings.DATASET_FILES['iris']['csv'].read_text()

    def test_balanced_classes(self):
        iris = load_iris(self.text)
        self.assertEqual(len(iris), 150)
        self.assertEqual(iris.num_classes, 3)
        self.assertEqual(iris.class_counts().tolist(), [50, 50, 50])

    def test_standardized_columns(self):
        iris = load_iris(self.text)
        self.assertLess(np.abs(iris.inputs.mean(axis=0)).max(), 1e-9)
        np.testing.assert_allclose(iris.inputs.std(axis=0), 1.0, atol=1e-12)

    def test_header_and_blank_lines(self):
        text = 'sepal_length,sepal_width,petal_length,petal_width,species\n\n5.1,3.5,1.4,0.2,setosa\n4.9,3.0,1.4,0.2,Iris-virginica\n'
        iris = load_iris(text)
        self.assertEqual(iris.labels.tolist(), [0, 2])

    def test_unknown_class(self):
        with self.assertRaises(FormatError) as ctx:
            load_iris('5.1,3.5,1.4,0.2,setosa\n4.9,3.0,1.4,0.2,rosa\n')
        self.assertEqual(ctx.exception.line, 2)

    def test_bad_feature(self):
        with self.assertRaises(FormatError) as ctx:
            load_iris('5.1,3.5,1.4,0.2,setosa\n\n4.9,x,1.4,0.2,setosa\n')
        self.assertEqual(ctx.exception.line, 3)


class SubsampleTest(SimpleTestCase):
    def test_per_class_count(self):
        subset = subsample_per_class(synthetic_set(300, 10), 200, seed=1)
        self.assertEqual(len(subset), 2000)
        self.assertEqual(subset.class_counts().tolist(), [200] * 10)

    def test_deterministic(self):
        base = synthetic_set(30, 3)
        a, b = subsample_per_class(base, 10, seed=4), subsample_per_class(base, 10, seed=4)
        np.testing.assert_array_equal(a.ids, b.ids)
        self.assertFalse(np.array_equal(a.ids, subsample_per_class(base, 10, seed=5).ids))

    def test_full_class_size_is_identity(self):
        base = synthetic_set(7, 3)
        np.testing.assert_array_equal(subsample_per_class(base, 7, seed=2).ids, base.ids)

    def test_insufficient_population(self):
        with self.assertRaises(CapacityError):
            subsample_per_class(synthetic_set(5, 2), 6, seed=0)


class SplitTest(SimpleTestCase):
    def test_stratified_split(self):
        base = synthetic_set(50, 3)
        train, test = split(base, 0.2, seed=0)
        self.assertEqual(test.class_counts().tolist(), [10, 10, 10])
        self.assertEqual(len(train) + len(test), 150)
        self.assertEqual(len(np.intersect1d(train.ids, test.ids)), 0)

    def test_uneven_classes_within_one(self):
        labels = np.array([0] * 13 + [1] * 7 + [2] * 21)
        base = LabeledSet(np.zeros((labels.size, 4)), labels, 3)
        _, test = split(base, 0.3, seed=3)
        exact = np.array([13, 7, 21]) * 0.3
        self.assertTrue(np.all(np.abs(test.class_counts() - exact) <= 1))

    def test_bad_fraction(self):
        with self.assertRaises(InvalidInputError):
            split(synthetic_set(5, 2), 1.0, seed=0)


class MakeForgetTest(SimpleTestCase):
    def setUp(self):
        """Set up a 2000-sample training set with ten classes."""
        self.train = synthetic_set(200, 10)

    def test_subset_size(self):
        splits = make_forget(self.train, ForgetSpec.subset(0.02, seed=0))
        self.assertEqual(len(splits.forget), 40)
        self.assertEqual(len(splits.retain), 1960)

    def test_partition_is_disjoint_and_exhaustive(self):
        splits = make_forget(self.train, ForgetSpec.subset(0.05, seed=3))
        self.assertEqual(len(np.intersect1d(splits.retain.ids, splits.forget.ids)), 0)
        np.testing.assert_array_equal(np.union1d(splits.retain.ids, splits.forget.ids), self.train.ids)
        np.testing.assert_array_equal(splits.train.ids, self.train.ids)
        np.testing.assert_array_equal(splits.train.inputs, self.train.inputs)

    def test_full_class(self):
        splits = make_forget(self.train, ForgetSpec.full_class(4))
        self.assertEqual(int((splits.retain.labels == 4).sum()), 0)
        self.assertEqual(len(splits.forget), 200)
        self.assertTrue(np.all(splits.forget.labels == 4))

    def test_deterministic(self):
        a = make_forget(self.train, ForgetSpec.subset(0.1, seed=7))
        b = make_forget(self.train, ForgetSpec.subset(0.1, seed=7))
        np.testing.assert_array_equal(a.forget.ids, b.forget.ids)

    def test_stratified_subset(self):
        splits = make_forget(self.train, ForgetSpec.subset(0.05, seed=1, stratified=True))
        self.assertEqual(splits.forget.class_counts().tolist(), [10] * 10)

    def test_empty_partition(self):
        labels = np.zeros(10, dtype=int)
        only_zero = LabeledSet(np.zeros((10, 4)), labels, 3)
        with self.assertRaises(InvalidInputError):
            make_forget(only_zero, ForgetSpec.full_class(1))
        with self.assertRaises(InvalidInputError):
            make_forget(only_zero, ForgetSpec.full_class(0))

    def test_fraction_out_of_range(self):
        with self.assertRaises(InvalidInputError):
            ForgetSpec.subset(0.0)


class DatasetServiceTest(SimpleTestCase):
    def setUp(self):
        """Set up gzip IDX files holding three images per class."""
        cache.clear()
        self.tmp = tempfile.TemporaryDirectory()
        root = Path(self.tmp.name)
        labels = np.repeat(np.arange(10), 3)
        pixels = stream(0, 'pixels').integers(0, 256, size=(30, 28, 28))
        self.paths = {'images': str(root / 'images.gz'), 'labels': str(root / 'labels.gz')}
        Path(self.paths['images']).write_bytes(gzip.compress(image_blob(pixels)))
        Path(self.paths['labels']).write_bytes(gzip.compress(label_blob(labels)))

    def tearDown(self):
        self.tmp.cleanup()
        cache.clear()

    def test_load_images_subsampled(self):
        labeled = dataset_service.load('mnist', per_class=2, seed=1, paths=self.paths)
        self.assertEqual(labeled.inputs.shape, (20, 1, 28, 28))
        self.assertTrue(labeled.inputs.min() >= 0.0 and labeled.inputs.max() <= 1.0)
        self.assertEqual(labeled.class_counts().tolist(), [2] * 10)

    def test_prepare_full_class(self):
        splits = dataset_service.prepare('fashion', ForgetSpec.full_class(2), seed=0, per_class=3,
                                         test_fraction=0.34, paths=self.paths)
        self.assertEqual(len(splits.test), 10)
        self.assertTrue(np.all(splits.forget.labels == 2))
        self.assertEqual(len(splits.forgotten_test()), 1)

    def test_load_iris(self):
        self.assertEqual(len(dataset_service.load('iris')), 150)

    def test_iris_checksum(self):
        csv = settings.DATASET_FILES['iris']['csv']
        digest = hashlib.sha256(csv.read_bytes()).hexdigest()
        self.assertEqual(len(dataset_service.load('iris', checksums={'csv': digest.upper()})), 150)
        with self.assertRaises(ConfigError) as ctx:
            dataset_service.load('iris', checksums={'csv': '0' * 64})
        self.assertIn('checksum mismatch', str(ctx.exception))

    def test_iris_checksum_covers_a_configured_path(self):
        copy = Path(self.tmp.name) / 'iris.csv'
        copy.write_text(settings.DATASET_FILES['iris']['csv'].read_text() + '\n')
        paths = {'csv': str(copy)}
        own = hashlib.sha256(copy.read_bytes()).hexdigest()
        bundled = hashlib.sha256(settings.DATASET_FILES['iris']['csv'].read_bytes()).hexdigest()
        splits = dataset_service.prepare('iris', ForgetSpec.subset(0.1), seed=0, paths=paths, checksums={'csv': own})
        self.assertEqual(len(splits.train) + len(splits.test), 150)
        with self.assertRaises(ConfigError):
            dataset_service.prepare('iris', ForgetSpec.subset(0.1), seed=0, paths=paths, checksums={'csv': bundled})

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            dataset_service.load('mnist', paths={'images': '/nonexistent/images.gz', 'labels': '/nonexistent/l.gz'})

    def test_unknown_dataset(self):
        with self.assertRaises(ConfigError):
            dataset_service.load('cifar')

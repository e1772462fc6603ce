import tempfile
from pathlib import Path
from unittest.mock import patch

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase

from data.iris import load_iris
from data.sets import ForgetSpec
from data.splits import make_forget, split
from diffcore.tensor import LayerParams
from hybrid.arch import ArchSpec
from hybrid.model import build_model, predict
from qunlearn.exceptions import ConfigError, DimensionError, FormatError, InvalidInputError, TrainingDiverged
from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig
from .loop import ce_step, fit, retrain_oracle, set_accuracy
from .optim import OptimizerState, adam_step
from .serializers import TrainConfigSerializer


def iris_split(seed=0):
    iris = load_iris(settings.DATASET_FILES['iris']['csv'].read_text())
    return split(iris, 0.2, seed)


class AdamTest(SimpleTestCase):
    def test_zero_gradients_leave_parameters(self):
        params = LayerParams({'w': [1.0, -2.0], 'b': [0.5]})
        before = params.copy()
        state = OptimizerState.for_params(params)
        adam_step(params, params.zeros_like(), state, lr=0.1)
        for name in params:
            np.testing.assert_array_equal(params[name], before[name])

    def test_constant_gradient_decreases_monotonically(self):
        params = LayerParams({'x': [0.0]})
        state = OptimizerState.for_params(params)
        grads = LayerParams({'x': [1.0]})
        trace = [0.0]
        for _ in range(10):
            adam_step(params, grads, state, lr=1e-3)
            trace.append(float(params['x'][0]))
        self.assertTrue(all(b < a for a, b in zip(trace, trace[1:])))

    def test_matches_reference_trace(self):
        """Test three steps against a scalar reference implementation."""
        grads_seq = [0.3, -1.2, 0.7]
        theta, m, v = 2.0, 0.0, 0.0
        for t, g in enumerate(grads_seq, start=1):
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            theta -= 0.01 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)

        params = LayerParams({'theta': [2.0]})
        state = OptimizerState.for_params(params)
        for g in grads_seq:
            adam_step(params, LayerParams({'theta': [g]}), state, lr=0.01)
        self.assertAlmostEqual(float(params['theta'][0]), theta, delta=1e-12)
        self.assertEqual(state.step, 3)

    def test_shape_mismatch(self):
        params = LayerParams({'w': np.zeros((2, 2))})
        with self.assertRaises(DimensionError):
            adam_step(params, LayerParams({'w': np.zeros(4)}), OptimizerState.for_params(params), lr=0.1)

    def test_trainable_subset(self):
        params = LayerParams({'a': [1.0], 'b': [1.0]})
        state = OptimizerState.for_params(params)
        adam_step(params, LayerParams({'a': [1.0], 'b': [1.0]}), state, lr=0.1, trainable={'a'})
        self.assertEqual(float(params['b'][0]), 1.0)
        self.assertLess(float(params['a'][0]), 1.0)
        self.assertEqual(float(state.m['b'][0]), 0.0)


class TrainConfigTest(SimpleTestCase):
    def test_defaults_per_dataset(self):
        self.assertEqual(TrainConfig.for_dataset('iris').batch_size, 16)
        self.assertEqual(TrainConfig.for_dataset('mnist').batch_size, 32)
        self.assertEqual(TrainConfig.for_dataset('iris').max_epochs, 100)

    def test_invalid_values(self):
        with self.assertRaises(InvalidInputError):
            TrainConfig(patience=0)
        with self.assertRaises(InvalidInputError):
            TrainConfig(lr=0.0)
        with self.assertRaises(ConfigError):
            TrainConfig(objective='hinge')

    def test_serializer(self):
        serializer = TrainConfigSerializer(data={'lr': 0.01, 'patience': 3}, context={'dataset': 'mnist'})
        self.assertTrue(serializer.is_valid())
        config = serializer.save()
        self.assertEqual((config.lr, config.patience, config.batch_size), (0.01, 3, 32))

        serializer = TrainConfigSerializer(data={'lr': -1, 'objective': 'hinge'})
        self.assertFalse(serializer.is_valid())
        self.assertIn('lr', serializer.errors)
        self.assertIn('objective', serializer.errors)


class FitTest(SimpleTestCase):
    def setUp(self):
        """Set up the iris train/test split and a fresh model."""
        self.train, self.test = iris_split()
        self.spec = ArchSpec.for_dataset('iris')
        self.model = build_model(self.spec, seed=0)

    def test_iris_reaches_ninety_percent(self):
        config = TrainConfig.for_dataset('iris', lr=0.01)
        model, report = fit(self.model, self.train, self.test, config)
        self.assertGreaterEqual(max(report.test_accuracies), 0.9)
        self.assertEqual(set_accuracy(model, self.test), max(report.test_accuracies))
        self.assertEqual(report.test_accuracies[report.best_epoch - 1], max(report.test_accuracies))

    def test_patience_one_without_improvement_stops_after_two_epochs(self):
        config = TrainConfig(max_epochs=20, patience=1, lr=0.01)
        with patch('train.loop.set_accuracy', return_value=0.5):
            _, report = fit(self.model, self.train, self.test, config)
        self.assertEqual(report.epochs, 2)
        self.assertTrue(report.stopped_early)
        self.assertEqual(report.best_epoch, 1)

    def test_deterministic(self):
        config = TrainConfig(max_epochs=3, patience=3, lr=0.01)
        a, report_a = fit(self.model, self.train, self.test, config)
        b, report_b = fit(self.model, self.train, self.test, config)
        self.assertEqual(report_a.train_losses, report_b.train_losses)
        self.assertEqual(report_a.test_accuracies, report_b.test_accuracies)
        for name in a.params:
            self.assertEqual(a.params[name].tobytes(), b.params[name].tobytes())

    def test_input_model_untouched(self):
        before = self.model.params.copy()
        fit(self.model, self.train, self.test, TrainConfig(max_epochs=1, lr=0.01))
        for name in before:
            np.testing.assert_array_equal(self.model.params[name], before[name])

    def test_fixed_batch_loss_decreases(self):
        """Ensure five Adam steps at lr 1e-3 lower the loss of a fixed batch."""
        inputs, targets = self.train.inputs[:16], self.train.one_hot()[:16]
        for seed in range(5):
            model = build_model(self.spec, seed=seed)
            state = OptimizerState.for_params(model.params)
            first, grads = ce_step(model, inputs, targets)
            for _ in range(5):
                adam_step(model.params, grads, state, lr=1e-3)
                last, grads = ce_step(model, inputs, targets)
            self.assertLess(last, first, msg=f"seed {seed}")

    def test_nan_loss_raises_with_epoch(self):
        with patch('train.loop.ce_step', return_value=(float('nan'), None)):
            with self.assertRaises(TrainingDiverged) as ctx:
                fit(self.model, self.train, self.test, TrainConfig(max_epochs=5))
        self.assertEqual(ctx.exception.epoch, 1)


class OracleTest(SimpleTestCase):
    def setUp(self):
        """Set up the iris split used for oracle runs."""
        self.train, self.test = iris_split(seed=1)
        self.spec = ArchSpec.for_dataset('iris')
        self.config = TrainConfig(max_epochs=15, patience=15, lr=0.01)

    def test_full_retain_set_equals_original_training(self):
        oracle, _ = retrain_oracle(self.spec, self.train, self.test, self.config, init_seed=3)
        original, _ = fit(build_model(self.spec, 3), self.train, self.test, self.config)
        for name in oracle.params:
            self.assertEqual(oracle.params[name].tobytes(), original.params[name].tobytes())

    def test_full_class_oracle_never_predicts_forgotten_class(self):
        splits = make_forget(self.train, ForgetSpec.full_class(1), test=self.test)
        oracle, _ = retrain_oracle(self.spec, splits.retain, self.test, self.config, init_seed=0)
        self.assertLessEqual(set_accuracy(oracle, splits.forgotten_test()), 0.1)


class CheckpointTest(SimpleTestCase):
    def setUp(self):
        """Set up a temporary directory and a model to persist."""
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        self.model = build_model(ArchSpec.for_dataset('iris', layers=3), seed=8)

    def tearDown(self):
        self.tmp.cleanup()

    def test_save_load_save_is_byte_identical(self):
        first = save_checkpoint(self.model, self.root / 'a.qunl')
        second = save_checkpoint(load_checkpoint(first), self.root / 'b.qunl')
        self.assertEqual(first.read_bytes(), second.read_bytes())

    def test_forward_identical_after_round_trip(self):
        x = np.linspace(-1, 1, 12).reshape(3, 4)
        restored = load_checkpoint(save_checkpoint(self.model, self.root / 'm.qunl'))
        np.testing.assert_array_equal(predict(restored, x), predict(self.model, x))

    def test_truncated_file(self):
        path = save_checkpoint(self.model, self.root / 'm.qunl')
        path.write_bytes(path.read_bytes()[:-3])
        with self.assertRaises(FormatError):
            load_checkpoint(path)

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_checkpoint(self.root / 'absent.qunl')

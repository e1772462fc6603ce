from functools import lru_cache

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase

from data.iris import load_iris
from data.sets import ForgetSpec, LabeledSet, SplitDataset
from data.splits import make_forget, split
from diffcore import ops
from diffcore.tensor import Graph, LayerParams
from hybrid.arch import ArchSpec
from hybrid.model import build_model, clone, group_parameters, predict
from qunlearn.exceptions import ConfigError, InvalidInputError
from train.config import TrainConfig
from train.loop import fit, set_accuracy
from train.optim import OptimizerState, adam_step
from .config import METHOD_IDS, UnlearnConfig
from .methods import (
    METHODS, finetune_retain, fisher_noise, rewind_target, run_method, substitute_labels, unlearn_baseline,
)
from .objectives import complement_labels, fgsm_uniform, kl_step, uniform_target
from .serializers import UnlearnConfigSerializer


@lru_cache(maxsize=None)
def iris_sets():
    iris = load_iris(settings.DATASET_FILES['iris']['csv'].read_text())
    return split(iris, 0.2, 0)


@lru_cache(maxsize=None)
def trained_iris():
    train, test = iris_sets()
    config = TrainConfig(max_epochs=30, patience=10, lr=0.01)
    model, _ = fit(build_model(ArchSpec.for_dataset('iris'), 0), train, test, config)
    return model


def iris_splits(full_class=False):
    train, test = iris_sets()
    spec = ForgetSpec.full_class(2) if full_class else ForgetSpec.subset(0.1, seed=0)
    return make_forget(train, spec, test=test)


def uniform_model(dataset='iris'):
    """Model whose head outputs constant logits, so every prediction is uniform."""
    model = build_model(ArchSpec.for_dataset(dataset), 0)
    for name in group_parameters(model, ['head']):
        model.params[name] = np.zeros_like(model.params[name])
    return model


def entropy(probs):
    return float(np.mean(-np.sum(probs * np.log(np.maximum(probs, 1e-10)), axis=1)))


class ComplementLabelsTest(SimpleTestCase):
    def test_hand_values(self):
        np.testing.assert_array_equal(complement_labels([0], 3), [[0.0, 0.5, 0.5]])
        np.testing.assert_array_equal(complement_labels([1], 2), [[1.0, 0.0]])
        row = complement_labels([4], 10)[0]
        self.assertEqual(row[4], 0.0)
        np.testing.assert_array_equal(np.delete(row, 4), np.full(9, 1 / 9))

    def test_law_for_all_class_counts(self):
        """Rows sum to one and vanish at the true class for K in [2, 10]."""
        for k in range(2, 11):
            labels = np.arange(k).repeat(3)
            rows = complement_labels(labels, k)
            np.testing.assert_allclose(rows.sum(axis=1), 1.0, rtol=0, atol=1e-12)
            np.testing.assert_array_equal(rows[np.arange(labels.size), labels], 0.0)
            self.assertTrue(np.all(rows >= 0))

    def test_needs_two_classes(self):
        with self.assertRaises(InvalidInputError):
            complement_labels([0], 1)
        with self.assertRaises(InvalidInputError):
            complement_labels([3], 3)

    def test_uniform_target_entropy(self):
        for k in (2, 3, 10):
            self.assertAlmostEqual(entropy(uniform_target(4, k)), np.log(k), delta=1e-12)


class KlDirectionTest(SimpleTestCase):
    def test_prediction_against_complement_hand_value(self):
        """Test KL(prediction || complement) for p=[0.8, 0.1, 0.1], target=[0, 0.5, 0.5]."""
        g = Graph()
        p = g.param('p', [[0.8, 0.1, 0.1]])
        loss = ops.kl_loss(p, np.array([[0.0, 0.5, 0.5]]))
        expected = 0.8 * np.log(0.8 / 1e-10) + 2 * 0.1 * np.log(0.1 / 0.5)
        self.assertAlmostEqual(float(loss.data), expected, delta=1e-12)

    def test_kl_step_directions(self):
        model = uniform_model()
        x = np.zeros((2, 4))
        target = complement_labels([0, 0], 3)
        forward_value, _ = kl_step(model, x, target, 'forward')
        reversed_value, _ = kl_step(model, x, target, 'reversed')
        third = 1.0 / 3.0
        self.assertAlmostEqual(forward_value, third * np.log(third / 1e-10) + 2 * third * np.log(third / 0.5),
                               delta=1e-9)
        self.assertAlmostEqual(reversed_value, np.log(1.5), delta=1e-12)

    def test_complement_steps_push_true_class_below_half(self):
        """Ensure repeated complement-label steps drive forget samples off their class."""
        model = clone(trained_iris())
        splits = iris_splits()
        x, labels = splits.forget.inputs, splits.forget.labels
        before = predict(model, x)[np.arange(labels.size), labels].mean()
        state = OptimizerState.for_params(model.params)
        target = complement_labels(labels, 3)
        for _ in range(100):
            _, grads = kl_step(model, x, target)
            adam_step(model.params, grads, state, lr=0.05)
        after = predict(model, x)[np.arange(labels.size), labels].mean()
        self.assertLess(after, 0.5)
        self.assertLess(after, before)


class FgsmUniformTest(SimpleTestCase):
    def setUp(self):
        """Set up an untrained iris model and random inputs."""
        self.model = build_model(ArchSpec.for_dataset('iris'), 4)
        self.x = np.random.default_rng(0).normal(size=(6, 4))

    def test_perturbation_bounded_by_eps(self):
        for eps in (0.01, 0.1, 0.5):
            adversarial = fgsm_uniform(self.model, self.x, eps)
            self.assertLessEqual(np.max(np.abs(adversarial - self.x)), eps + 1e-15)

    def test_uniform_model_leaves_inputs(self):
        np.testing.assert_array_equal(fgsm_uniform(uniform_model(), self.x, 0.1), self.x)

    def test_small_step_increases_divergence_from_uniform(self):
        def divergence(inputs):
            probs = predict(self.model, inputs)
            return float(np.mean(ops.kl_rows(probs, uniform_target(len(probs), 3))))

        self.assertGreater(divergence(fgsm_uniform(self.model, self.x, 1e-3)), divergence(self.x))

    def test_images_stay_in_unit_range(self):
        model = build_model(ArchSpec.for_dataset('mnist'), 0)
        x = np.random.default_rng(1).uniform(size=(2, 1, 28, 28))
        adversarial = fgsm_uniform(model, x, 0.1)
        self.assertGreaterEqual(adversarial.min(), 0.0)
        self.assertLessEqual(adversarial.max(), 1.0)
        self.assertLessEqual(np.max(np.abs(adversarial - x)), 0.1 + 1e-15)

    def test_steps_toward_uniform_raise_entropy(self):
        """Test that minimizing KL to uniform on perturbed inputs flattens predictions."""
        model = clone(trained_iris())
        x = iris_splits().forget.inputs
        before = entropy(predict(model, x))
        state = OptimizerState.for_params(model.params)
        for _ in range(20):
            adversarial = fgsm_uniform(model, x, 0.1)
            _, grads = kl_step(model, adversarial, uniform_target(len(x), 3))
            adam_step(model.params, grads, state, lr=0.01)
        self.assertGreater(entropy(predict(model, x)), before)


class UnlearnConfigTest(SimpleTestCase):
    def test_defaults(self):
        config = UnlearnConfig.for_dataset('mnist')
        self.assertEqual((config.max_epochs, config.patience, config.batch_size), (25, 5, 32))
        self.assertEqual((config.alpha, config.k, config.eps_adv), (0.9, 1, 0.1))

    def test_invalid_values(self):
        for overrides in ({'max_epochs': 26}, {'alpha': 0.0}, {'alpha': 1.5}, {'k': 0}, {'eps_adv': 0.0},
                          {'sigma_noise': -1.0}, {'lr': 0.0}):
            with self.assertRaises(InvalidInputError, msg=str(overrides)):
                UnlearnConfig(**overrides)
        with self.assertRaises(ConfigError):
            UnlearnConfig(kl_direction='sideways')
        with self.assertRaises(ConfigError):
            UnlearnConfig(method='FORGET-ALL')

    def test_labels(self):
        config = UnlearnConfig(k=2)
        self.assertEqual(config.method_label('EU-k'), 'EU-k2')
        self.assertEqual(config.method_label('CF-k'), 'CF-k2')
        self.assertEqual(config.method_label('LCA'), 'LCA')

    def test_serializer(self):
        serializer = UnlearnConfigSerializer(data={'alpha': 0.5, 'k': 2}, context={'dataset': 'iris'})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        config = serializer.save()
        self.assertEqual((config.alpha, config.k, config.batch_size), (0.5, 2, 16))

        serializer = UnlearnConfigSerializer(data={'alpha': 0, 'eps_adv': -1, 'method': 'nope',
                                                   'max_epochs': 30})
        self.assertFalse(serializer.is_valid())
        for field in ('alpha', 'eps_adv', 'method', 'max_epochs'):
            self.assertIn(field, serializer.errors)

        serializer = UnlearnConfigSerializer(data={'ga_clip': 0})
        self.assertFalse(serializer.is_valid())
        self.assertIn('ga_clip', serializer.errors)


class DispatchTest(SimpleTestCase):
    def setUp(self):
        """Set up the trained iris model and a subset-forgetting split."""
        self.model = trained_iris()
        self.splits = iris_splits()
        self.config = UnlearnConfig.for_dataset('iris', max_epochs=3, lr=0.005)

    def test_table_covers_eleven_ids(self):
        self.assertEqual(len(METHODS), 11)
        self.assertEqual(tuple(METHODS), METHOD_IDS)

    def test_unknown_method(self):
        with self.assertRaises(ConfigError) as ctx:
            run_method('FORGET-ALL', self.model, self.splits, self.config)
        self.assertIn('ADV-UNIFORM', str(ctx.exception))
        with self.assertRaises(ConfigError):
            unlearn_baseline('LCA', self.model, self.splits, self.config)

    def test_repeated_dispatch_is_identical(self):
        for method in ('Q-MUL', 'Certified', 'SCRUB'):
            a = run_method(method, self.model, self.splits, self.config)
            b = run_method(method, self.model, self.splits, self.config)
            self.assertEqual(a.trace, b.trace)
            for name in a.model.params:
                self.assertEqual(a.model.params[name].tobytes(), b.model.params[name].tobytes())

    def test_result_carries_method_and_hyperparameters(self):
        result = run_method('EU-k', self.model, self.splits, self.config)
        self.assertEqual(result.method, 'EU-k')
        self.assertEqual(result.label, 'EU-k1')
        self.assertEqual(result.hyperparameters['method'], 'EU-k')
        self.assertEqual(result.hyperparameters['k'], 1)

    def test_input_model_untouched(self):
        before = self.model.params.copy()
        run_method('GA', self.model, self.splits, self.config)
        for name in before:
            np.testing.assert_array_equal(self.model.params[name], before[name])

    def test_empty_forget_set(self):
        empty = LabeledSet(np.zeros((0, 4)), [], 3)
        splits = SplitDataset(self.splits.retain, empty, self.splits.test, self.splits.spec)
        for method in METHOD_IDS:
            with self.assertRaises(InvalidInputError, msg=method):
                run_method(method, self.model, splits, self.config)


class BudgetTest(SimpleTestCase):
    def test_every_method_stays_within_budget(self):
        """Ensure no method records more than 25 epochs under the default budget."""
        model, splits = trained_iris(), iris_splits()
        config = UnlearnConfig.for_dataset('iris', patience=25)
        for method in METHOD_IDS:
            result = run_method(method, model, splits, config)
            self.assertLessEqual(result.epochs, 25, msg=method)
            self.assertEqual(result.model.params.shapes(), model.params.shapes())
            self.assertTrue(all(np.all(np.isfinite(v)) for v in result.model.params.values()), msg=method)

    def test_zero_epochs(self):
        model, splits = trained_iris(), iris_splits()
        result = run_method('LCA', model, splits, UnlearnConfig(max_epochs=0))
        self.assertEqual(result.trace, [])
        for name in model.params:
            np.testing.assert_array_equal(result.model.params[name], model.params[name])


class MethodContractTest(SimpleTestCase):
    def setUp(self):
        """Set up the trained iris model, both forgetting scenarios and a short budget."""
        self.model = trained_iris()
        self.splits = iris_splits()
        self.full_class = iris_splits(full_class=True)
        self.config = UnlearnConfig.for_dataset('iris', max_epochs=4, lr=0.005)

    def assert_same_run(self, a, b):
        self.assertEqual(a.trace, b.trace)
        for name in a.model.params:
            self.assertEqual(a.model.params[name].tobytes(), b.model.params[name].tobytes())

    def test_cf_k_freezes_other_groups(self):
        result = run_method('CF-k', self.model, self.splits, self.config)
        frozen = group_parameters(self.model, ['vqc', 'proj'])
        for name in frozen:
            self.assertEqual(result.model.params[name].tobytes(), self.model.params[name].tobytes())
        head = group_parameters(self.model, ['head'])
        self.assertTrue(any(not np.array_equal(result.model.params[n], self.model.params[n]) for n in head))

    def test_eu_k_reinitializes_head_only(self):
        result = run_method('EU-k', self.model, self.splits, UnlearnConfig(max_epochs=0))
        for name in self.model.params:
            same = result.model.params[name].tobytes() == self.model.params[name].tobytes()
            if name.startswith('head.fc.weight'):
                self.assertFalse(same, msg=name)
            elif not name.startswith('head.'):
                self.assertTrue(same, msg=name)

    def test_eu_k_recovers_at_its_method_default_rate(self):
        config = UnlearnConfig.for_dataset('iris', **settings.UNLEARN_METHOD_DEFAULTS['EU-k'])
        result = run_method('EU-k', self.model, self.splits, config)
        self.assertGreaterEqual(set_accuracy(result.model, self.splits.test), 0.7)
        self.assertGreaterEqual(set_accuracy(result.model, self.splits.retain), 0.7)


    def test_neggrad_plus_with_alpha_one_is_retain_finetuning(self):
        config = UnlearnConfig.for_dataset('iris', max_epochs=4, lr=0.005, alpha=1.0)
        self.assert_same_run(run_method('NegGrad+', self.model, self.splits, config),
                             finetune_retain(self.model, self.splits, config))

    def test_certified_without_noise_is_retain_finetuning(self):
        config = UnlearnConfig.for_dataset('iris', max_epochs=4, lr=0.005, sigma_noise=0.0)
        self.assert_same_run(run_method('Certified', self.model, self.splits, config),
                             finetune_retain(self.model, self.splits, config))

    def test_certified_noise_changes_the_run(self):
        config = UnlearnConfig.for_dataset('iris', max_epochs=2, lr=0.005, sigma_noise=0.5)
        noisy = run_method('Certified', self.model, self.splits, config)
        plain = finetune_retain(self.model, self.splits, config)
        self.assertNotEqual(noisy.model.params.flat().tobytes(), plain.model.params.flat().tobytes())

    def test_ga_raises_forget_loss(self):
        config = UnlearnConfig.for_dataset('iris', max_epochs=3, patience=3, lr=0.005)
        result = run_method('GA', self.model, self.full_class, config)
        losses = [row.forget_loss for row in result.trace]
        self.assertTrue(all(b > a for a, b in zip(losses, losses[1:])), losses)
        self.assertLessEqual(set_accuracy(result.model, self.full_class.forget),
                             set_accuracy(self.model, self.full_class.forget))

    def test_ga_clip_skips_every_batch(self):
        config = UnlearnConfig.for_dataset('iris', max_epochs=2, ga_clip=1e-12)
        result = run_method('GA', self.model, self.splits, config)
        for name in self.model.params:
            np.testing.assert_array_equal(result.model.params[name], self.model.params[name])

    def test_scrub_rewind_selects_closest_forget_accuracy(self):
        result = run_method('SCRUB+R', self.model, self.full_class, self.config)
        target = rewind_target(self.model, self.full_class)
        gaps = [abs(row.forget_accuracy - target) for row in result.trace]
        self.assertEqual(result.selected_epoch, int(np.argmin(gaps)) + 1)
        self.assertEqual(set_accuracy(result.model, self.full_class.forget),
                         result.trace[result.selected_epoch - 1].forget_accuracy)

    def test_rewind_target_by_scenario(self):
        self.assertEqual(rewind_target(self.model, self.splits), set_accuracy(self.model, self.splits.test))
        self.assertEqual(rewind_target(self.model, self.full_class),
                         set_accuracy(self.model, self.full_class.forgotten_test()))

    def test_substituted_labels_are_wrong_and_fixed(self):
        forget = self.splits.forget
        relabeled = substitute_labels(forget, seed=3)
        self.assertTrue(np.all(relabeled.labels != forget.labels))
        np.testing.assert_array_equal(relabeled.labels, substitute_labels(forget, seed=3).labels)
        np.testing.assert_array_equal(relabeled.ids, forget.ids)

    def test_fisher_noise_scales_with_information(self):
        config = UnlearnConfig(lambda_fisher=1e-4, fisher_cap=1e3)
        informed = fisher_noise(self.model, LayerParams({n: np.full_like(v, 1e12) for n, v in
                                                         self.model.params.items()}), config)
        blind = fisher_noise(self.model, self.model.params.zeros_like(), config)
        cap = np.sqrt(1e-4 * 1e3)
        for name in self.model.params:
            self.assertLess(np.max(np.abs(informed.params[name] - self.model.params[name])), 1e-6)
            shift = np.abs(blind.params[name] - self.model.params[name])
            self.assertLessEqual(np.max(shift), 8 * cap)
            self.assertGreater(np.max(shift), 0.0)

    def test_full_class_forgetting_direction(self):
        """Test that forgetting-oriented methods do not raise forget accuracy on a full class."""
        before = set_accuracy(self.model, self.full_class.forget)
        for method in ('GA', 'NegGrad+', 'SCRUB', 'LCA', 'ADV-UNIFORM'):
            result = run_method(method, self.model, self.full_class, self.config)
            self.assertLessEqual(set_accuracy(result.model, self.full_class.forget), before, msg=method)

from functools import lru_cache

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase

from data.iris import load_iris
from data.sets import ForgetSpec, LabeledSet
from data.splits import make_forget, split
from hybrid.arch import ArchSpec
from hybrid.model import build_model, clone, group_parameters
from qunlearn.exceptions import ConfigError, DimensionError, InvalidInputError
from qunlearn.streams import stream
from train.config import TrainConfig
from train.loop import retrain_oracle
from .mia import LossThresholdAttack, mia_from_losses, mia_score
from .report import REPORT_COLUMNS, evaluate
from .scores import (
    ProbTable, accuracy, accuracy_of, agreement, divergences, f1_of, macro_f1, state_distance, uqi,
)

LN2 = np.log(2.0)


@lru_cache(maxsize=None)
def iris_splits(full_class=False):
    iris = load_iris(settings.DATASET_FILES['iris']['csv'].read_text())
    train, test = split(iris, 0.2, 0)
    spec = ForgetSpec.full_class(0) if full_class else ForgetSpec.subset(0.1, seed=0)
    return make_forget(train, spec, test=test)


def uniform_model():
    model = build_model(ArchSpec.for_dataset('iris'), 0)
    for name in group_parameters(model, ['head']):
        model.params[name] = np.zeros_like(model.params[name])
    return model


def random_tables(rng, n=5, k=4):
    return ProbTable(rng.dirichlet(np.ones(k), size=n)), ProbTable(rng.dirichlet(np.ones(k), size=n))


class AccuracyTest(SimpleTestCase):
    def test_perfect_predictor(self):
        labels = np.array([0, 1, 2, 2])
        self.assertEqual(accuracy_of(labels, labels), 1.0)
        self.assertEqual(f1_of(labels, labels, 3), 1.0)

    def test_constant_predictor_on_balanced_set(self):
        """Ensure a uniform model predicts class 0 everywhere (lowest index wins ties)."""
        balanced = LabeledSet(np.zeros((6, 4)), [0, 0, 1, 1, 2, 2], 3)
        self.assertAlmostEqual(accuracy(uniform_model(), balanced), 1 / 3, delta=1e-15)
        self.assertAlmostEqual(macro_f1(uniform_model(), balanced), 0.5 / 3, delta=1e-15)

    def test_macro_f1_hand_case(self):
        labels = np.array([0, 0, 1, 1, 2, 2])
        predictions = np.array([0, 1, 1, 1, 2, 0])
        self.assertAlmostEqual(f1_of(predictions, labels, 3), (0.5 + 0.8 + 2 / 3) / 3, delta=1e-15)

    def test_absent_class_scores_zero(self):
        self.assertAlmostEqual(f1_of(np.array([0, 1]), np.array([0, 1]), 3), 2 / 3, delta=1e-15)

    def test_empty_set(self):
        empty = LabeledSet(np.zeros((0, 4)), [], 3)
        with self.assertRaises(InvalidInputError):
            accuracy(uniform_model(), empty)
        with self.assertRaises(InvalidInputError):
            macro_f1(uniform_model(), empty)


class DivergenceTest(SimpleTestCase):
    def test_identical_tables(self):
        p, _ = random_tables(np.random.default_rng(0))
        self.assertEqual(divergences(p, p), (0.0, 0.0))

    def test_disjoint_rows(self):
        _, js = divergences(ProbTable([[1.0, 0.0]]), ProbTable([[0.0, 1.0]]))
        self.assertAlmostEqual(js, LN2, delta=1e-12)

    def test_properties_over_random_pairs(self):
        """Test KL/JS identities and bounds over 1000 random pairs."""
        rng = np.random.default_rng(7)
        for _ in range(1000):
            p, q = random_tables(rng, n=3, k=int(rng.integers(2, 6)))
            kl, js = divergences(p, q)
            _, js_swapped = divergences(q, p)
            self.assertGreaterEqual(kl, -1e-12)
            self.assertGreaterEqual(js, -1e-12)
            self.assertLessEqual(js, LN2 + 1e-12)
            self.assertAlmostEqual(js, js_swapped, delta=1e-12)

    def test_mismatched_tables(self):
        with self.assertRaises(DimensionError):
            divergences(ProbTable([[0.5, 0.5]]), ProbTable([[0.5, 0.5], [1.0, 0.0]]))
        with self.assertRaises(DimensionError):
            agreement(ProbTable([[0.5, 0.5]]), ProbTable([[0.2, 0.3, 0.5]]))

    def test_rows_must_be_distributions(self):
        with self.assertRaises(InvalidInputError):
            ProbTable([[0.5, 0.6]])
        with self.assertRaises(InvalidInputError):
            ProbTable([[1.5, -0.5]])
        with self.assertRaises(DimensionError):
            ProbTable([0.5, 0.5])


class AgreementTest(SimpleTestCase):
    def test_identical_and_permuted(self):
        p = ProbTable([[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.2, 0.2, 0.6]])
        q = ProbTable([[0.1, 0.7, 0.2], [0.1, 0.1, 0.8], [0.6, 0.2, 0.2]])
        self.assertEqual(agreement(p, p), 1.0)
        self.assertEqual(agreement(p, q), 0.0)

    def test_rank_preserving_rescaling(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            p, r = random_tables(rng)
            squared = p.probs ** 2
            rescaled = ProbTable(squared / squared.sum(axis=1, keepdims=True))
            self.assertEqual(agreement(p, rescaled), 1.0)
            self.assertEqual(agreement(p, r), agreement(rescaled, r))


class MiaTest(SimpleTestCase):
    def test_separable_populations(self):
        members, nonmembers = [0.1, 0.2, 0.3], [1.0, 1.5, 2.0]
        attack = LossThresholdAttack.calibrate(members, nonmembers)
        self.assertAlmostEqual(attack.threshold, 0.65)
        self.assertEqual((attack.tpr, attack.fpr), (1.0, 0.0))
        self.assertEqual(mia_from_losses([2.5, 3.0], members, nonmembers), 0.0)
        self.assertEqual(mia_from_losses([0.01], members, nonmembers), 1.0)

    def test_equal_loss_populations_score_half(self):
        for seed in range(10):
            score = mia_score(uniform_model(), iris_splits().forget, iris_splits().test, iris_splits().retain, seed)
            self.assertEqual(score, 0.5)
            self.assertEqual(mia_from_losses(np.full(5, 0.7), np.full(8, 0.7), np.full(4, 0.7)), 0.5)

    def test_identically_distributed_losses_score_near_half(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            losses = rng.exponential(size=(3, 500))
            score = mia_from_losses(losses[0, :200], losses[1], losses[2])
            self.assertGreaterEqual(score, 0.4, f"seed {seed}")
            self.assertLessEqual(score, 0.6, f"seed {seed}")

    def test_threshold_advantage_does_not_shift_the_score(self):
        # a low threshold labels every forget sample a non-member
        members = np.array([0.05, 0.06, 0.07, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6])
        nonmembers = np.array([0.8, 0.9, 0.95, 1.05, 1.15, 1.25, 1.35, 1.45, 1.55, 1.65])
        attack = LossThresholdAttack.calibrate(members, nonmembers)
        forget = np.linspace(0.5, 1.7, 13)
        self.assertEqual(attack.member_rate(forget), 0.0)
        self.assertGreater(attack.membership_score(forget), 0.4)

    def test_member_like_forget_scores_high(self):
        rng = np.random.default_rng(3)
        members, nonmembers = 0.2 * rng.exponential(size=500), rng.exponential(size=500)
        self.assertGreater(mia_from_losses(0.2 * rng.exponential(size=300), members, nonmembers), 0.6)
        self.assertLess(mia_from_losses(rng.exponential(size=300), members, nonmembers), 0.4)

    def test_score_in_unit_interval(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            score = mia_from_losses(rng.exponential(size=4), rng.exponential(size=6), rng.exponential(size=6))
            self.assertGreaterEqual(score, 0.0)
            self.assertLessEqual(score, 1.0)

    def test_oracle_on_forgotten_class_scores_low(self):
        splits = iris_splits(full_class=True)
        oracle, _ = retrain_oracle(ArchSpec.for_dataset('iris'), splits.retain, splits.test,
                                   TrainConfig(max_epochs=20, patience=20, lr=0.01), init_seed=0)
        self.assertLess(mia_score(oracle, splits.forget, splits.test, splits.retain), 0.4)

    def test_empty_sets(self):
        empty = LabeledSet(np.zeros((0, 4)), [], 3)
        splits = iris_splits()
        with self.assertRaises(InvalidInputError):
            mia_score(uniform_model(), empty, splits.test, splits.retain)
        with self.assertRaises(InvalidInputError):
            mia_from_losses([], [0.1], [0.2])


class UqiTest(SimpleTestCase):
    def test_perfect_alignment(self):
        self.assertEqual(uqi(1.0, 0.2, 0.2, 0.95, 0.95), 1.0)
        self.assertEqual(uqi(0.5, 0.5, 0.5, 0.9, 0.95), 1.0)

    def test_no_unlearning(self):
        self.assertEqual(uqi(1.0, 1.0, 0.0, 0.9, 0.9), 0.0)
        self.assertLess(uqi(1.0, 1.0, 0.0, 0.9, 0.8), 0.0)

    def test_overforgetting_with_retain_damage(self):
        value = uqi(0.9, 0.0, 0.5, 0.9, 0.5)
        self.assertAlmostEqual(value, 1.0 - 0.4 / (0.9 + 1e-6), delta=1e-12)

    def test_monotone_in_retain_drop(self):
        values = [uqi(1.0, 0.3, 0.0, 0.9, retained) for retained in (0.9, 0.8, 0.6, 0.3)]
        self.assertTrue(all(b < a for a, b in zip(values, values[1:])))

    def test_alignment_is_clamped(self):
        self.assertEqual(uqi(1.0, -5.0, 0.5, 0.9, 0.9), 1.0)
        self.assertEqual(uqi(0.5, 1.0, 0.4, 0.9, 0.9), -1.0)


class StateDistanceTest(SimpleTestCase):
    def setUp(self):
        """Set up a random iris model and the iris test set."""
        self.model = build_model(ArchSpec.for_dataset('iris'), 2)
        self.test = iris_splits().test

    def test_same_model(self):
        fidelity_mean, trace_mean = state_distance(self.model, clone(self.model), self.test)
        self.assertAlmostEqual(fidelity_mean, 1.0, delta=1e-12)
        self.assertAlmostEqual(trace_mean, 0.0, delta=1e-6)

    def test_fidelity_falls_with_noise(self):
        fidelities = []
        for scale in (0.01, 0.1, 1.0):
            noisy = clone(self.model)
            draw = stream(5, 'perturb').standard_normal(noisy.params['vqc.theta'].shape)
            noisy.params['vqc.theta'] = noisy.params['vqc.theta'] + scale * draw
            fidelity_mean, trace_mean = state_distance(self.model, noisy, self.test)
            self.assertTrue(0.0 <= fidelity_mean <= 1.0 and 0.0 <= trace_mean <= 1.0)
            fidelities.append(fidelity_mean)
        self.assertTrue(fidelities[0] > fidelities[1] > fidelities[2], fidelities)

    def test_architecture_mismatch(self):
        other = build_model(ArchSpec.for_dataset('iris', layers=3), 2)
        with self.assertRaises(ConfigError):
            state_distance(self.model, other, self.test)


class EvaluateTest(SimpleTestCase):
    def setUp(self):
        """Set up three random iris models."""
        spec = ArchSpec.for_dataset('iris')
        self.original, self.unlearned, self.oracle = (build_model(spec, s) for s in (0, 1, 2))

    def test_oracle_against_itself(self):
        report = evaluate(self.oracle, self.oracle, self.oracle, iris_splits())
        self.assertEqual(report.agree_test, 1.0)
        self.assertEqual((report.kl_test, report.js_test, report.kl_retain, report.js_retain), (0.0,) * 4)
        self.assertEqual(report.uqi, 1.0)
        self.assertAlmostEqual(report.fidelity_mean, 1.0, delta=1e-12)

    def test_field_ranges(self):
        for full_class in (False, True):
            report = evaluate(self.original, self.unlearned, self.oracle, iris_splits(full_class))
            for field in ('acc_retain', 'acc_test', 'f1_test', 'acc_forget', 'agree_test', 'fidelity_mean'):
                self.assertTrue(0.0 <= getattr(report, field) <= 1.0, field)
            for field in ('js_retain', 'js_test'):
                self.assertTrue(0.0 <= getattr(report, field) <= LN2 + 1e-12, field)
            self.assertGreaterEqual(min(report.kl_retain, report.kl_test), 0.0)
            if full_class:
                self.assertIsNone(report.mia)
            else:
                self.assertTrue(0.0 <= report.mia <= 1.0)

    def test_row_columns(self):
        row = evaluate(self.original, self.unlearned, self.oracle, iris_splits()).as_row()
        self.assertEqual(tuple(row), REPORT_COLUMNS)

    def test_utility_criterion(self):
        report = evaluate(self.original, self.unlearned, self.oracle, iris_splits(), epsilon=1e9)
        self.assertTrue(report.utility_ok)
        report = evaluate(self.original, self.original, self.oracle, iris_splits(), epsilon=-1e9)
        self.assertFalse(report.utility_ok)

    def test_architecture_mismatch(self):
        other = build_model(ArchSpec.for_dataset('iris', layers=3), 0)
        with self.assertRaises(ConfigError):
            evaluate(self.original, other, self.oracle, iris_splits())

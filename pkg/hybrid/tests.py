import numpy as np
from django.test import SimpleTestCase

from diffcore.gradcheck import central_difference, relative_error
from diffcore.ops import softmax_values
from qsim.circuit import run_circuit
from qsim.statevector import expect_z, norm
from qunlearn.exceptions import ConfigError, ContractError, DimensionError, FormatError
from qunlearn.streams import stream
from . import checkpoint
from .arch import ArchSpec
from .model import (HybridModel, backward, build_model, clone, forward, group_parameters, layer_groups,
                    output_groups, predict, reinitialize)


def iris_batch(seed, n=6):
    return stream(seed, 'iris-batch').normal(size=(n, 4))


class ArchSpecTest(SimpleTestCase):
    def test_iris_parameter_count(self):
        for layers in (1, 2, 3):
            model = build_model(ArchSpec.for_dataset('iris', layers=layers), seed=0)
            self.assertEqual(model.n_params, 20 + layers * 8 + 15)

    def test_fashion_flatten_size(self):
        spec = ArchSpec.for_dataset('fashion')
        self.assertEqual(spec.flat_features, 1568)
        self.assertEqual(spec.tensor_slots()['proj.weight'].shape, (1568, 10))

    def test_unknown_dataset(self):
        with self.assertRaises(ConfigError):
            ArchSpec.for_dataset('cifar')

    def test_qubits_fixed_per_dataset(self):
        with self.assertRaises(ConfigError):
            ArchSpec(dataset='mnist', qubits=4, layers=2, conv_channels=(8, 16))

    def test_tag_round_trip(self):
        spec = ArchSpec.for_dataset('fashion', layers=1, conv_channels=(4, 8), head_hidden=16)
        self.assertEqual(spec.tag, 'fashion;layers=1;conv=4,8;hidden=16')
        self.assertEqual(ArchSpec.from_tag(spec.tag), spec)

    def test_layer_groups(self):
        self.assertEqual(layer_groups(build_model(ArchSpec.for_dataset('iris'), 0)), ['head', 'vqc', 'proj'])
        fashion = build_model(ArchSpec.for_dataset('fashion', layers=1, conv_channels=(2, 2)), 0)
        self.assertEqual(layer_groups(fashion), ['head', 'vqc', 'proj', 'extractor'])
        self.assertEqual(output_groups(fashion, 1), ['head'])
        everything = group_parameters(fashion, output_groups(fashion, 4))
        self.assertEqual(sorted(everything), list(fashion.params))

    def test_same_seed_is_bit_identical(self):
        spec = ArchSpec.for_dataset('mnist')
        a, b = build_model(spec, seed=3), build_model(spec, seed=3)
        for name in a.params:
            self.assertEqual(a.params[name].tobytes(), b.params[name].tobytes())
        self.assertEqual(a.n_params, b.n_params)


class ForwardTest(SimpleTestCase):
    def setUp(self):
        """Set up an iris model and a random batch."""
        self.model = build_model(ArchSpec.for_dataset('iris'), seed=1)
        self.x = iris_batch(1)

    def test_rows_sum_to_one(self):
        probs, _ = forward(self.model, self.x)
        self.assertLess(np.abs(probs.data.sum(axis=1) - 1.0).max(), 1e-9)

    def test_identical_samples_identical_rows(self):
        x = np.repeat(self.x[:1], 3, axis=0)
        probs, _ = forward(self.model, x)
        np.testing.assert_array_equal(probs.data[0], probs.data[1])
        np.testing.assert_array_equal(probs.data[0], probs.data[2])

    def test_permutation_permutes_rows(self):
        order = np.array([3, 0, 5, 1, 4, 2])
        probs, _ = forward(self.model, self.x)
        permuted, _ = forward(self.model, self.x[order])
        np.testing.assert_allclose(permuted.data, probs.data[order], atol=1e-14)

    def test_matches_direct_composition(self):
        """Ensure the iris forward equals projection -> VQC -> head composed by hand."""
        p = self.model.params
        angles = np.pi * np.tanh(self.x @ p['proj.weight'] + p['proj.bias'])
        measured = np.array([expect_z(run_circuit(self.model.spec.layout, p['vqc.theta'], a)) for a in angles])
        expected = softmax_values(measured @ p['head.fc.weight'] + p['head.fc.bias'])
        probs, _ = forward(self.model, self.x)
        np.testing.assert_allclose(probs.data, expected, atol=1e-12)

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionError):
            forward(self.model, np.zeros((2, 5)))

    def test_cached_states_are_normalised(self):
        _, cache = forward(self.model, self.x)
        self.assertLess(np.abs(norm(cache.states) - 1.0).max(), 1e-12)

    def test_predict_matches_forward(self):
        probs, states = predict(self.model, self.x, batch_size=4, return_states=True)
        direct, cache = forward(self.model, self.x)
        np.testing.assert_allclose(probs, direct.data, atol=1e-14)
        self.assertEqual(states.shape, (6, 16))


class BackwardTest(SimpleTestCase):
    def test_zero_upstream_gives_zero_gradients(self):
        model = build_model(ArchSpec.for_dataset('iris'), seed=2)
        _, cache = forward(model, iris_batch(2))
        grads, input_grad = backward(model, cache, np.zeros((6, 3)))
        for name in grads:
            np.testing.assert_array_equal(grads[name], 0.0)
        np.testing.assert_array_equal(input_grad, 0.0)

    def test_stale_cache_rejected(self):
        model = build_model(ArchSpec.for_dataset('iris'), seed=2)
        _, cache = forward(model, iris_batch(2))
        backward(model, cache, np.ones((6, 3)))
        with self.assertRaises(ContractError):
            backward(model, cache, np.ones((6, 3)))

    def test_full_model_gradient_matches_finite_difference(self):
        """Test every iris parameter and the input over five seeds."""
        for seed in range(5):
            model = build_model(ArchSpec.for_dataset('iris'), seed=seed)
            x = iris_batch(seed, n=4)
            weights = stream(seed, 'upstream').normal(size=(4, 3))
            objective = lambda: float((forward(model, x)[0].data * weights).sum())
            _, cache = forward(model, x)
            grads, input_grad = backward(model, cache, weights)
            for name in model.params:
                numeric = central_difference(objective, model.params[name])
                self.assertLess(relative_error(grads[name], numeric), 1e-5, msg=f"seed {seed}, {name}")
            self.assertLess(relative_error(input_grad, central_difference(objective, x)), 1e-5)

    def test_dead_relu_path_has_zero_input_gradient(self):
        model = build_model(ArchSpec.for_dataset('mnist', layers=1), seed=4)
        model.params['extractor.conv1.bias'] = np.full(8, -100.0)
        x = stream(4, 'pixels').uniform(size=(2, 1, 28, 28))
        _, cache = forward(model, x)
        _, input_grad = backward(model, cache, np.ones((2, 10)))
        self.assertEqual(input_grad.shape, x.shape)
        np.testing.assert_array_equal(input_grad, 0.0)


class ReinitializeTest(SimpleTestCase):
    def test_only_selected_groups_change(self):
        model = build_model(ArchSpec.for_dataset('iris'), seed=5)
        model.params['head.fc.bias'] = np.array([0.1, -0.2, 0.3])
        fresh = reinitialize(model, ['head'], seed=9)
        self.assertFalse(np.array_equal(fresh.params['head.fc.weight'], model.params['head.fc.weight']))
        for name in ('proj.weight', 'proj.bias', 'vqc.theta'):
            self.assertEqual(fresh.params[name].tobytes(), model.params[name].tobytes())

    def test_clone_is_independent(self):
        model = build_model(ArchSpec.for_dataset('iris'), seed=5)
        copy = clone(model)
        copy.params['vqc.theta'] = np.zeros_like(copy.params['vqc.theta'])
        self.assertFalse(np.array_equal(model.params['vqc.theta'], copy.params['vqc.theta']))


class CheckpointCodecTest(SimpleTestCase):
    def setUp(self):
        """Set up a small image model for encoding."""
        self.model = build_model(ArchSpec.for_dataset('mnist', layers=1, conv_channels=(2, 3)), seed=6)
        self.blob = checkpoint.encode(self.model)

    def test_encode_decode_encode_is_byte_identical(self):
        restored = checkpoint.decode(self.blob)
        self.assertEqual(restored.spec, self.model.spec)
        self.assertEqual(checkpoint.encode(restored), self.blob)

    def test_init_seed_survives(self):
        self.assertEqual(checkpoint.decode(self.blob).init_seed, 6)
        unseeded = HybridModel(self.model.spec, self.model.params.copy())
        self.assertIsNone(checkpoint.decode(checkpoint.encode(unseeded)).init_seed)

    def test_header_layout(self):
        self.assertEqual(self.blob[:4], b'QUNL')
        self.assertEqual(int.from_bytes(self.blob[4:8], 'little'), 2)
        tag_length = int.from_bytes(self.blob[8:12], 'little')
        self.assertEqual(self.blob[12:12 + tag_length].decode(), self.model.spec.tag)
        self.assertEqual(int.from_bytes(self.blob[12 + tag_length:20 + tag_length], 'little', signed=True), 6)


    def test_truncated_payload(self):
        with self.assertRaises(FormatError) as ctx:
            checkpoint.decode(self.blob[:-1])
        self.assertIsNotNone(ctx.exception.offset)

    def test_bad_magic(self):
        with self.assertRaises(FormatError) as ctx:
            checkpoint.decode(b'QUNX' + self.blob[4:])
        self.assertEqual(ctx.exception.offset, 0)

    def test_version_mismatch(self):
        blob = self.blob[:4] + (1).to_bytes(4, 'little') + self.blob[8:]
        with self.assertRaises(FormatError):
            checkpoint.decode(blob)

    def test_trailing_bytes(self):
        with self.assertRaises(FormatError):
            checkpoint.decode(self.blob + b'\x00')

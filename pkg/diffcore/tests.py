import numpy as np
from django.test import SimpleTestCase

from qunlearn.exceptions import ContractError, DimensionError, InvalidInputError
from qunlearn.streams import stream
from . import ops
from .gradcheck import central_difference, relative_error
from .tensor import Graph, LayerParams, backward


def one_hot(labels, k):
    return np.eye(k)[np.asarray(labels)]


def total(x):
    """Scalar sum node, so any tensor can seed a backward pass."""
    out = x.graph.node(np.array(x.data.sum()), (x,))

    def _backward():
        x.accumulate(np.full(x.shape, float(out.grad)))

    out._backward = _backward
    return out


class LinearTest(SimpleTestCase):
    def test_identity_weights(self):
        """Test that identity weights and zero bias return the input."""
        g = Graph()
        out = ops.linear(g.input([[1.0, 2.0]]), g.param('w', np.eye(2)), g.param('b', np.zeros(2)))
        np.testing.assert_array_equal(out.data, [[1.0, 2.0]])

    def test_hand_computed(self):
        g = Graph()
        out = ops.linear(g.input([[1.0, 1.0]]), g.param('w', [[2.0], [3.0]]), g.param('b', [1.0]))
        self.assertEqual(out.data.tolist(), [[6.0]])

    def test_shape_mismatch_names_both_shapes(self):
        g = Graph()
        with self.assertRaises(DimensionError) as ctx:
            ops.linear(g.input(np.ones((2, 3))), g.param('w', np.ones((2, 2))), g.param('b', np.zeros(2)))
        self.assertIn('(2, 3)', str(ctx.exception))
        self.assertIn('(2, 2)', str(ctx.exception))

    def test_weight_gradient_matches_finite_difference(self):
        rng = stream(0, 'linear-test')
        x, w, b = rng.normal(size=(4, 3)), rng.normal(size=(3, 2)), rng.normal(size=2)

        def loss():
            g = Graph()
            return total(ops.linear(g.input(x), g.param('w', w), g.param('b', b))).data

        g = Graph()
        grads = backward(g, total(ops.linear(g.input(x), g.param('w', w), g.param('b', b))))
        self.assertLess(relative_error(grads['w'], central_difference(loss, w)), 1e-6)
        self.assertLess(relative_error(grads['b'], central_difference(loss, b)), 1e-6)


class Conv2dTest(SimpleTestCase):
    def test_delta_kernel_is_identity(self):
        """Ensure a centre-1 delta kernel reproduces its input."""
        x = np.arange(9, dtype=float).reshape(1, 1, 3, 3)
        kernel = np.zeros((1, 1, 3, 3))
        kernel[0, 0, 1, 1] = 1.0
        g = Graph()
        out = ops.conv2d(g.input(x), g.param('k', kernel), g.param('b', [0.0]))
        np.testing.assert_array_equal(out.data, x)

    def test_ones_input_with_delta_kernel(self):
        x = np.ones((1, 1, 3, 3))
        kernel = np.zeros((1, 1, 3, 3))
        kernel[0, 0, 1, 1] = 1.0
        g = Graph()
        out = ops.conv2d(g.input(x), g.param('k', kernel), g.param('b', [0.0]))
        np.testing.assert_array_equal(out.data, x)

    def test_zero_input_gives_bias(self):
        g = Graph()
        out = ops.conv2d(g.input(np.zeros((2, 1, 4, 4))), g.param('k', np.ones((3, 1, 3, 3))),
                         g.param('b', [0.5, -1.0, 2.0]))
        self.assertEqual(out.shape, (2, 3, 4, 4))
        for f, value in enumerate([0.5, -1.0, 2.0]):
            self.assertTrue(np.all(out.data[:, f] == value))

    def test_channel_mismatch(self):
        g = Graph()
        with self.assertRaises(DimensionError):
            ops.conv2d(g.input(np.zeros((1, 2, 4, 4))), g.param('k', np.ones((1, 3, 3, 3))), g.param('b', [0.0]))

    def test_gradients_match_finite_difference(self):
        """Test kernel, bias and input gradients on a random 1x2x5x5 input."""
        rng = stream(1, 'conv-test')
        x = rng.normal(size=(1, 2, 5, 5))
        kernel = rng.normal(size=(3, 2, 3, 3))
        bias = rng.normal(size=3)
        weights = rng.normal(size=(3, 5, 5))

        def build():
            g = Graph()
            xin = g.input(x, requires_grad=True)
            out = ops.conv2d(xin, g.param('k', kernel), g.param('b', bias))
            weighted = g.node(out.data * weights, (out,))
            weighted._backward = lambda: out.accumulate(weighted.grad * weights)
            return g, xin, total(weighted)

        g, xin, loss = build()
        grads = backward(g, loss)
        numeric = lambda: build()[2].data
        self.assertLess(relative_error(grads['k'], central_difference(numeric, kernel)), 1e-5)
        self.assertLess(relative_error(grads['b'], central_difference(numeric, bias)), 1e-5)
        self.assertLess(relative_error(xin.grad, central_difference(numeric, x)), 1e-5)


class ElementwiseTest(SimpleTestCase):
    def test_relu(self):
        g = Graph()
        self.assertEqual(ops.relu(g.input([-1.0, 0.0, 2.0])).data.tolist(), [0.0, 0.0, 2.0])

    def test_maxpool(self):
        g = Graph()
        out = ops.maxpool2(g.input(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)))
        self.assertEqual(out.data.reshape(-1).tolist(), [4.0])

    def test_maxpool_odd_dims(self):
        g = Graph()
        with self.assertRaises(DimensionError):
            ops.maxpool2(g.input(np.zeros((1, 1, 3, 4))))

    def test_maxpool_gradient_only_at_argmax(self):
        """Ensure non-maximal entries of each window get exactly zero gradient."""
        rng = stream(2, 'pool-test')
        x = rng.normal(size=(2, 3, 4, 6))
        g = Graph()
        xin = g.input(x, requires_grad=True)
        g.propagate(ops.maxpool2(xin), np.ones((2, 3, 2, 3)))
        blocks = x.reshape(2, 3, 2, 2, 3, 2).transpose(0, 1, 2, 4, 3, 5).reshape(2, 3, 2, 3, 4)
        grad_blocks = xin.grad.reshape(2, 3, 2, 2, 3, 2).transpose(0, 1, 2, 4, 3, 5).reshape(2, 3, 2, 3, 4)
        is_max = blocks == blocks.max(axis=-1, keepdims=True)
        np.testing.assert_array_equal(grad_blocks[~is_max], 0.0)
        np.testing.assert_array_equal(grad_blocks[is_max], 1.0)

    def test_tanh_scale(self):
        g = Graph()
        out = ops.tanh_scale(g.input([0.0, 10.0]))
        self.assertEqual(out.data[0], 0.0)
        self.assertAlmostEqual(out.data[1], np.pi, delta=1e-4)

    def test_softmax_rows_sum_to_one(self):
        rng = stream(3, 'softmax-test')
        g = Graph()
        out = ops.softmax(g.input(rng.normal(scale=20.0, size=(50, 7))))
        self.assertLess(np.abs(out.data.sum(axis=1) - 1.0).max(), 1e-12)


class LossTest(SimpleTestCase):
    def test_uniform_logits_cross_entropy(self):
        g = Graph()
        loss = ops.softmax_cross_entropy(g.input(np.zeros((1, 3))), one_hot([0], 3))
        self.assertAlmostEqual(float(loss.data), np.log(3.0), places=12)

    def test_soft_target_equal_to_prediction_gives_entropy(self):
        logits = np.array([[0.3, -1.2, 2.0]])
        p = ops.softmax_values(logits)
        g = Graph()
        loss = ops.softmax_cross_entropy(g.input(logits), p)
        self.assertAlmostEqual(float(loss.data), float(-(p * np.log(p)).sum()), places=12)

    def test_cross_entropy_gradient_matches_finite_difference(self):
        rng = stream(4, 'ce-test')
        logits = rng.normal(size=(5, 4))
        targets = one_hot(rng.integers(0, 4, size=5), 4)
        g = Graph()
        z = g.param('z', logits)
        grads = backward(g, ops.softmax_cross_entropy(z, targets))
        numeric = central_difference(
            lambda: ops.softmax_cross_entropy(Graph().input(logits), targets).data, logits)
        self.assertLess(relative_error(grads['z'], numeric), 1e-6)

    def test_cross_entropy_rejects_bad_target_rows(self):
        g = Graph()
        with self.assertRaises(InvalidInputError):
            ops.softmax_cross_entropy(g.input(np.zeros((1, 3))), [[0.5, 0.2, 0.2]])

    def test_kl_examples(self):
        g = Graph()
        self.assertEqual(float(ops.kl_loss(g.input([[0.5, 0.5]]), [[0.5, 0.5]]).data), 0.0)
        g = Graph()
        self.assertAlmostEqual(float(ops.kl_loss(g.input([[1.0, 0.0]]), [[0.5, 0.5]]).data), np.log(2.0), places=12)

    def test_kl_rejects_negative_entries(self):
        g = Graph()
        with self.assertRaises(InvalidInputError):
            ops.kl_loss(g.input([[1.2, -0.2]]), [[0.5, 0.5]])

    def test_kl_non_negative_on_random_pairs(self):
        rng = stream(5, 'kl-sweep')
        p = rng.dirichlet(np.ones(4), size=1000)
        q = rng.dirichlet(np.ones(4), size=1000)
        self.assertTrue(np.all(ops.kl_rows(p, q) >= 0.0))

    def test_kl_gradient_through_softmax(self):
        rng = stream(6, 'kl-grad')
        logits = rng.normal(size=(3, 4))
        target = rng.dirichlet(np.ones(4), size=3)

        def value():
            g = Graph()
            return ops.kl_loss(ops.softmax(g.input(logits)), target).data

        g = Graph()
        z = g.param('z', logits)
        grads = backward(g, ops.kl_loss(ops.softmax(z), target))
        self.assertLess(relative_error(grads['z'], central_difference(value, logits)), 1e-6)


class BackwardTest(SimpleTestCase):
    def setUp(self):
        """Set up a small conv -> relu -> pool -> linear -> CE network."""
        self.rng = stream(7, 'backward-test')

    def test_sum_of_parameters_has_unit_gradients(self):
        g = Graph()
        theta = g.param('theta', [1.0, -2.0, 3.0])
        grads = backward(g, total(theta))
        np.testing.assert_array_equal(grads['theta'], np.ones(3))

    def test_unused_parameter_gets_exact_zero(self):
        g = Graph()
        used = g.param('used', [1.0, 2.0])
        g.param('unused', np.ones((2, 2)))
        grads = backward(g, total(used))
        np.testing.assert_array_equal(grads['unused'], np.zeros((2, 2)))
        self.assertEqual(list(grads), ['unused', 'used'])

    def test_non_scalar_loss_rejected(self):
        g = Graph()
        theta = g.param('theta', [1.0, 2.0])
        with self.assertRaises(ContractError):
            backward(g, ops.relu(theta))

    def test_second_backward_rejected(self):
        g = Graph()
        loss = total(g.param('theta', [1.0]))
        backward(g, loss)
        with self.assertRaises(ContractError):
            backward(g, loss)

    def _network(self, params, x, targets):
        g = Graph()
        h = ops.conv2d(g.input(x), g.param('k', params['k']), g.param('kb', params['kb']))
        h = ops.flatten(ops.maxpool2(ops.relu(h)))
        logits = ops.linear(h, g.param('w', params['w']), g.param('b', params['b']))
        return g, ops.softmax_cross_entropy(logits, targets)

    def test_composite_network_matches_finite_difference(self):
        """Test conv, relu, pool, linear and CE together over ten seeds."""
        for seed in range(10):
            rng = stream(seed, 'composite')
            params = LayerParams({
                'k': rng.normal(size=(2, 1, 3, 3)), 'kb': rng.normal(size=2),
                'w': rng.normal(size=(8, 3)), 'b': rng.normal(size=3),
            })
            x = rng.normal(size=(2, 1, 4, 4))
            targets = one_hot(rng.integers(0, 3, size=2), 3)
            g, loss = self._network(params, x, targets)
            grads = backward(g, loss)
            for name in params:
                numeric = central_difference(lambda: self._network(params, x, targets)[1].data, params[name])
                self.assertLess(relative_error(grads[name], numeric), 1e-5, msg=f"seed {seed}, {name}")

    def test_forward_is_pure(self):
        params = LayerParams({
            'k': self.rng.normal(size=(2, 1, 3, 3)), 'kb': self.rng.normal(size=2),
            'w': self.rng.normal(size=(8, 3)), 'b': self.rng.normal(size=3),
        })
        x = self.rng.normal(size=(2, 1, 4, 4))
        targets = one_hot([0, 2], 3)
        first = self._network(params, x, targets)[1].data
        second = self._network(params, x, targets)[1].data
        self.assertEqual(first.tobytes(), second.tobytes())


class LayerParamsTest(SimpleTestCase):
    def test_iteration_is_lexicographic_and_copies_on_assign(self):
        params = LayerParams()
        source = np.zeros(2)
        params['vqc.theta'] = source
        params['head.fc.weight'] = np.ones((2, 2))
        source[0] = 5.0
        self.assertEqual(list(params), ['head.fc.weight', 'vqc.theta'])
        self.assertEqual(params['vqc.theta'][0], 0.0)
        self.assertEqual(params.size, 6)

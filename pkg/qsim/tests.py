from functools import reduce

import numpy as np
from django.test import SimpleTestCase

from qunlearn.exceptions import CapacityError, DimensionError, WireIndexError
from qunlearn.streams import stream
from . import statevector as sv
from .circuit import CircuitLayout, run_circuit, run_circuit_batch
from .gradients import (adjoint_grad, adjoint_grad_batch, finite_difference_grad,
                        param_shift_angle_grad, param_shift_grad)

P1 = np.array([[0, 0], [0, 1]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)


def dense_on_wire(op, wire, q):
    """Kron product with ``op`` on ``wire``; qubit 0 is the rightmost factor."""
    factors = [op if w == wire else np.eye(2) for w in reversed(range(q))]
    return reduce(np.kron, factors)


def dense_cz(a, b, q):
    return np.eye(1 << q) - 2 * dense_on_wire(P1, a, q) @ dense_on_wire(P1, b, q)


class StateVectorTest(SimpleTestCase):
    def test_zero_state(self):
        np.testing.assert_array_equal(sv.zero_state(1), [1 + 0j, 0j])
        state = sv.zero_state(3)
        self.assertEqual(state.shape, (8,))
        self.assertEqual(state[0], 1.0)
        self.assertEqual(float(sv.norm(state)), 1.0)

    def test_qubit_capacity(self):
        with self.assertRaises(CapacityError):
            sv.zero_state(0)
        with self.assertRaises(CapacityError):
            sv.zero_state(13)

    def test_ry_pi_flips(self):
        state = sv.apply_rotation(sv.zero_state(1), 'Y', 0, np.pi)
        self.assertAlmostEqual(abs(state[1]), 1.0, places=12)

    def test_rz_keeps_zero_eigenstate(self):
        for theta in np.linspace(-3, 3, 7):
            state = sv.apply_rotation(sv.zero_state(1), 'Z', 0, theta)
            self.assertAlmostEqual(abs(state[0]), 1.0, places=12)

    def test_cz_on_11(self):
        state = np.zeros(4, dtype=complex)
        state[3] = 1.0
        np.testing.assert_array_equal(sv.apply_cz(state, 0, 1), -state)

    def test_wire_out_of_range(self):
        with self.assertRaises(WireIndexError):
            sv.apply_rotation(sv.zero_state(2), 'X', 2, 0.3)
        with self.assertRaises(WireIndexError):
            sv.apply_cz(sv.zero_state(2), 0, 5)

    def test_encode_zero_angles(self):
        np.testing.assert_array_equal(sv.encode_angles(sv.zero_state(3), np.zeros(3)), sv.zero_state(3))

    def test_encode_single_qubit_closed_form(self):
        state = sv.encode_angles(sv.zero_state(1), [np.pi / 2])
        np.testing.assert_allclose(state, [np.cos(np.pi / 4), np.sin(np.pi / 4)], atol=1e-15)

    def test_encode_product_state(self):
        """Ensure a 4-qubit encoding equals the kron product of per-qubit pairs."""
        angles = stream(0, 'encode').uniform(-np.pi, np.pi, size=4)
        pairs = [np.array([np.cos(a / 2), np.sin(a / 2)]) for a in angles]
        expected = reduce(np.kron, reversed(pairs))
        np.testing.assert_allclose(sv.encode_angles(sv.zero_state(4), angles), expected, atol=1e-12)

    def test_encode_wrong_angle_count(self):
        with self.assertRaises(DimensionError):
            sv.encode_angles(sv.zero_state(3), [0.1, 0.2])

    def test_expect_z_examples(self):
        np.testing.assert_array_equal(sv.expect_z(sv.zero_state(3)), np.ones(3))
        state = sv.apply_rotation(sv.zero_state(1), 'Y', 0, np.pi / 2)
        self.assertAlmostEqual(float(sv.expect_z(state)[0]), 0.0, delta=1e-12)

    def test_expect_z_matches_density_matrix_trace(self):
        rng = stream(1, 'expect-z')
        for _ in range(20):
            amps = rng.normal(size=8) + 1j * rng.normal(size=8)
            state = amps / np.linalg.norm(amps)
            rho = np.outer(state, np.conj(state))
            expected = [np.trace(rho @ dense_on_wire(Z, w, 3)).real for w in range(3)]
            np.testing.assert_allclose(sv.expect_z(state), expected, atol=1e-12)

    def test_fidelity_and_trace_distance(self):
        rng = stream(2, 'fidelity')
        amps = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi = amps / np.linalg.norm(amps)
        self.assertAlmostEqual(float(sv.fidelity(psi, psi)), 1.0, places=12)
        zero, one = sv.zero_state(1), np.array([0j, 1.0])
        self.assertEqual(float(sv.fidelity(zero, one)), 0.0)
        self.assertEqual(float(sv.trace_distance(zero, one)), 1.0)
        other = sv.apply_rotation(psi, 'X', 1, 0.7)
        phase = np.exp(1j * 1.3)
        self.assertAlmostEqual(float(sv.fidelity(phase * psi, phase * other)),
                               float(sv.fidelity(psi, other)), places=12)

    def test_fidelity_qubit_mismatch(self):
        with self.assertRaises(DimensionError):
            sv.fidelity(sv.zero_state(1), sv.zero_state(2))


class GateInvariantTest(SimpleTestCase):
    def test_norm_preserved_over_random_gate_sequences(self):
        """Test 1000 trials of 100 random gates keep the norm within 1e-12."""
        rng = stream(3, 'norm-sweep')
        for _ in range(1000):
            q = int(rng.integers(1, 5))
            state = sv.encode_angles(sv.zero_state(q), rng.uniform(-np.pi, np.pi, size=q))
            for _ in range(100):
                if q > 1 and rng.random() < 0.25:
                    a, b = rng.choice(q, size=2, replace=False)
                    state = sv.apply_cz(state, int(a), int(b))
                else:
                    axis = 'XYZ'[int(rng.integers(3))]
                    state = sv.apply_rotation(state, axis, int(rng.integers(q)), rng.uniform(-6, 6))
            self.assertLess(abs(float(sv.norm(state)) - 1.0), 1e-12)
            self.assertTrue(np.all(np.abs(sv.expect_z(state)) <= 1.0))

    def test_gate_then_inverse_restores_state(self):
        rng = stream(4, 'inverse')
        for _ in range(1000):
            q = int(rng.integers(1, 5))
            amps = rng.normal(size=1 << q) + 1j * rng.normal(size=1 << q)
            state = amps / np.linalg.norm(amps)
            axis, wire, angle = 'XYZ'[int(rng.integers(3))], int(rng.integers(q)), rng.uniform(-6, 6)
            restored = sv.apply_inverse_rotation(sv.apply_rotation(state, axis, wire, angle), axis, wire, angle)
            self.assertLess(np.abs(restored - state).max(), 1e-12)


class CircuitTest(SimpleTestCase):
    def test_parameter_count(self):
        layout = CircuitLayout(qubits=4, layers=3)
        self.assertEqual(layout.n_params, 24)
        self.assertEqual(CircuitLayout(qubits=2, layers=1).ring_pairs, [(0, 1)])
        self.assertEqual(len(CircuitLayout(qubits=5, layers=1).ring_pairs), 5)

    def test_capacity(self):
        with self.assertRaises(CapacityError):
            CircuitLayout(qubits=13, layers=1)

    def test_zero_layers_is_encoding(self):
        angles = np.array([0.3, -1.1, 2.0])
        np.testing.assert_array_equal(run_circuit(CircuitLayout(3, 0), [], angles),
                                      sv.encode_angles(sv.zero_state(3), angles))

    def test_zero_params_apply_ring_per_layer(self):
        """Test zero rotations against a dense CZ-ring matrix oracle."""
        q, layers = 3, 2
        angles = np.array([0.4, 1.7, -2.2])
        ring = reduce(np.matmul, [dense_cz(i, (i + 1) % q, q) for i in range(q)])
        expected = np.linalg.matrix_power(ring, layers) @ sv.encode_angles(sv.zero_state(q), angles)
        actual = run_circuit(CircuitLayout(q, layers), np.zeros(q * layers * 2), angles)
        np.testing.assert_allclose(actual, expected, atol=1e-12)

    def test_parameter_length_mismatch(self):
        with self.assertRaises(DimensionError):
            run_circuit(CircuitLayout(2, 1), np.zeros(3), np.zeros(2))

    def test_output_norm(self):
        rng = stream(5, 'circuit-norm')
        layout = CircuitLayout(4, 2)
        for _ in range(100):
            state = run_circuit(layout, rng.uniform(-np.pi, np.pi, layout.n_params), rng.uniform(-np.pi, np.pi, 4))
            self.assertLess(abs(float(sv.norm(state)) - 1.0), 1e-12)

    def test_batch_matches_single(self):
        rng = stream(6, 'batch')
        layout = CircuitLayout(3, 2)
        params = rng.uniform(-np.pi, np.pi, layout.n_params)
        angles = rng.uniform(-np.pi, np.pi, (5, 3))
        batch = run_circuit_batch(layout, params, angles)
        for i in range(5):
            np.testing.assert_allclose(batch[i], run_circuit(layout, params, angles[i]), atol=1e-14)


class GradientTest(SimpleTestCase):
    def test_zero_upstream(self):
        layout = CircuitLayout(3, 2)
        grad = adjoint_grad(layout, np.ones(layout.n_params), np.ones(3), np.zeros(3))
        np.testing.assert_array_equal(grad.d_params, 0.0)
        np.testing.assert_array_equal(grad.d_angles, 0.0)

    def test_single_qubit_encoding_gradient(self):
        for a in (-2.0, 0.3, 1.4):
            grad = adjoint_grad(CircuitLayout(1, 0), [], [a], [1.0])
            self.assertAlmostEqual(float(grad.d_angles[0]), -np.sin(a), places=12)

    def test_adjoint_matches_parameter_shift(self):
        rng = stream(7, 'adjoint-vs-shift')
        layout = CircuitLayout(4, 2)
        for _ in range(5):
            params = rng.uniform(-np.pi, np.pi, layout.n_params)
            angles = rng.uniform(-np.pi, np.pi, 4)
            upstream = rng.normal(size=4)
            grad = adjoint_grad(layout, params, angles, upstream)
            shift = [param_shift_grad(layout, params, angles, upstream, j) for j in range(layout.n_params)]
            np.testing.assert_allclose(grad.d_params, shift, atol=1e-10)
            shift_angles = [param_shift_angle_grad(layout, params, angles, upstream, w) for w in range(4)]
            np.testing.assert_allclose(grad.d_angles, shift_angles, atol=1e-10)

    def test_causally_disconnected_parameter(self):
        """Ensure RY on qubit 1 has no effect on <Z_0> in a one-layer 2-qubit circuit."""
        layout = CircuitLayout(2, 1)
        rng = stream(8, 'disconnected')
        params = rng.uniform(-np.pi, np.pi, layout.n_params)
        angles = rng.uniform(-np.pi, np.pi, 2)
        j = layout.param_index(0, 1, 0)
        self.assertLess(abs(param_shift_grad(layout, params, angles, [1.0, 0.0], j)), 1e-12)

    def test_single_qubit_shift_closed_form(self):
        layout = CircuitLayout(1, 1)
        for theta in (-1.0, 0.25, 2.5):
            params = np.array([theta, 0.0])
            self.assertAlmostEqual(param_shift_grad(layout, params, [0.0], [1.0], 0), -np.sin(theta), delta=1e-12)

    def test_parameter_index_out_of_range(self):
        layout = CircuitLayout(2, 1)
        with self.assertRaises(WireIndexError):
            param_shift_grad(layout, np.zeros(4), np.zeros(2), np.ones(2), 4)

    def test_gradient_triangle_on_random_circuits(self):
        """Test adjoint, shift and finite differences agree pairwise on 20 circuits."""
        rng = stream(9, 'triangle')
        for _ in range(20):
            layout = CircuitLayout(int(rng.integers(1, 5)), int(rng.integers(1, 4)))
            params = rng.uniform(-np.pi, np.pi, layout.n_params)
            angles = rng.uniform(-np.pi, np.pi, layout.qubits)
            upstream = rng.normal(size=layout.qubits)
            adjoint = adjoint_grad(layout, params, angles, upstream)
            shift = np.array([param_shift_grad(layout, params, angles, upstream, j)
                              for j in range(layout.n_params)])
            numeric = finite_difference_grad(layout, params, angles, upstream)
            self.assertLess(np.abs(adjoint.d_params - shift).max(), 1e-7)
            self.assertLess(np.abs(adjoint.d_params - numeric.d_params).max(), 1e-7)
            self.assertLess(np.abs(shift - numeric.d_params).max(), 1e-7)
            self.assertLess(np.abs(adjoint.d_angles - numeric.d_angles).max(), 1e-7)

    def test_batch_gradient_sums_parameters(self):
        rng = stream(10, 'batch-grad')
        layout = CircuitLayout(3, 2)
        params = rng.uniform(-np.pi, np.pi, layout.n_params)
        angles = rng.uniform(-np.pi, np.pi, (4, 3))
        upstream = rng.normal(size=(4, 3))
        batch = adjoint_grad_batch(layout, params, angles, upstream)
        singles = [adjoint_grad(layout, params, angles[i], upstream[i]) for i in range(4)]
        np.testing.assert_allclose(batch.d_params, sum(s.d_params for s in singles), atol=1e-12)
        np.testing.assert_allclose(batch.d_angles, [s.d_angles for s in singles], atol=1e-12)

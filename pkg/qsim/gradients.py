"""
Gradients of the weighted expectation g = sum_i u_i <Z_i>.

The adjoint sweep is the production path. The parameter-shift rule and
central differences recompute the same quantity independently and are used
as cross-checks.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from qunlearn.exceptions import DimensionError, WireIndexError
from . import statevector as sv
from .circuit import CircuitLayout, check_angles, check_params, run_circuit, run_circuit_batch


@dataclass(frozen=True)
class CircuitGrad:
    d_params: np.ndarray
    d_angles: np.ndarray


def weighted_expectation(layout: CircuitLayout, params, angles, upstream) -> float:
    upstream = np.asarray(upstream, dtype=np.float64)
    return float(sv.expect_z(run_circuit(layout, params, angles)) @ upstream)


def _check_upstream(layout: CircuitLayout, upstream, shape) -> np.ndarray:
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != shape:
        raise DimensionError(f"upstream gradient has shape {upstream.shape}, expected {shape}")
    return upstream


def adjoint_grad_batch(layout: CircuitLayout, params, angles, upstream,
                       states: Optional[np.ndarray] = None) -> CircuitGrad:
    """
    Adjoint differentiation over a batch.

    Args:
        layout: Circuit shape
        params: Shared rotation parameters, length L*q*2
        angles: [B, q] encoding angles
        upstream: [B, q] weights on each <Z_i>
        states: Final states from the forward pass, recomputed when omitted

    Returns:
        CircuitGrad: d_params summed over the batch, d_angles per sample
    """
    params = check_params(layout, params)
    angles = check_angles(layout, angles, batched=True)
    upstream = _check_upstream(layout, upstream, angles.shape)
    q = layout.qubits
    phi = run_circuit_batch(layout, params, angles) if states is None else np.array(states, copy=True)
    lam = phi * (upstream @ sv.z_signs(q).T)

    d_params = np.zeros(layout.n_params)
    for op in reversed(list(layout.operations())):
        if op[0] == 'ring':
            phi = phi * layout.ring_signs
            lam = lam * layout.ring_signs
            continue
        _, axis, wire, index = op
        d_params[index] = _rotation_grad(lam, phi, axis, wire).sum()
        phi = sv.apply_inverse_rotation(phi, axis, wire, params[index])
        lam = sv.apply_inverse_rotation(lam, axis, wire, params[index])

    d_angles = np.zeros(angles.shape)
    for wire in reversed(range(q)):
        d_angles[:, wire] = _rotation_grad(lam, phi, 'Y', wire)
        phi = sv.apply_inverse_rotation(phi, 'Y', wire, angles[:, wire])
        lam = sv.apply_inverse_rotation(lam, 'Y', wire, angles[:, wire])
    return CircuitGrad(d_params=d_params, d_angles=d_angles)


def _rotation_grad(lam: np.ndarray, phi: np.ndarray, axis: str, wire: int) -> np.ndarray:
    # d/dtheta <psi|O|psi> = Im <lam| sigma |phi> for R = exp(-i theta sigma / 2)
    return np.imag((np.conj(lam) * sv.apply_pauli(phi, axis, wire)).sum(axis=-1))


def adjoint_grad(layout: CircuitLayout, params, angles, upstream) -> CircuitGrad:
    """Single-sample adjoint gradient."""
    angles = check_angles(layout, angles, batched=False)
    upstream = _check_upstream(layout, upstream, angles.shape)
    grad = adjoint_grad_batch(layout, params, angles[None, :], upstream[None, :])
    return CircuitGrad(d_params=grad.d_params, d_angles=grad.d_angles[0])


def param_shift_grad(layout: CircuitLayout, params, angles, upstream, j: int) -> float:
    """1/2 [g(theta + pi/2 e_j) - g(theta - pi/2 e_j)]"""
    params = check_params(layout, params)
    if j < 0 or j >= layout.n_params:
        raise WireIndexError(f"parameter index {j} out of range for {layout.n_params} parameters")
    shifted = params.copy()
    shifted[j] = params[j] + np.pi / 2
    plus = weighted_expectation(layout, shifted, angles, upstream)
    shifted[j] = params[j] - np.pi / 2
    minus = weighted_expectation(layout, shifted, angles, upstream)
    return 0.5 * (plus - minus)


def param_shift_angle_grad(layout: CircuitLayout, params, angles, upstream, wire: int) -> float:
    """Shift rule applied to an encoding angle (each is a single RY)."""
    angles = check_angles(layout, angles, batched=False)
    if wire < 0 or wire >= layout.qubits:
        raise WireIndexError(f"wire {wire} out of range for {layout.qubits} qubits")
    shifted = angles.copy()
    shifted[wire] = angles[wire] + np.pi / 2
    plus = weighted_expectation(layout, params, shifted, upstream)
    shifted[wire] = angles[wire] - np.pi / 2
    minus = weighted_expectation(layout, params, shifted, upstream)
    return 0.5 * (plus - minus)


def finite_difference_grad(layout: CircuitLayout, params, angles, upstream, h: float = 1e-6) -> CircuitGrad:
    params = check_params(layout, params).copy()
    angles = check_angles(layout, angles, batched=False).copy()
    d_params = np.zeros_like(params)
    d_angles = np.zeros_like(angles)
    for target, out in ((params, d_params), (angles, d_angles)):
        for i in range(target.size):
            original = target[i]
            target[i] = original + h
            plus = weighted_expectation(layout, params, angles, upstream)
            target[i] = original - h
            minus = weighted_expectation(layout, params, angles, upstream)
            target[i] = original
            out[i] = (plus - minus) / (2.0 * h)
    return CircuitGrad(d_params=d_params, d_angles=d_angles)

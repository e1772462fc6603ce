"""
Dense statevector kernels.

States are complex128 arrays whose last axis holds the 2**q amplitudes,
with qubit 0 as the least significant bit of the basis index. Any leading
axes are a batch: each kernel applies the gate to every state at once, with
either one shared angle or one angle per state.
"""
from functools import lru_cache

import numpy as np

from qunlearn.exceptions import CapacityError, DimensionError, InvalidInputError, WireIndexError

MAX_QUBITS = 12

_PAULI = {
    'X': np.array([[0, 1], [1, 0]], dtype=complex),
    'Y': np.array([[0, -1j], [1j, 0]], dtype=complex),
    'Z': np.array([[1, 0], [0, -1]], dtype=complex),
}


def check_qubits(q: int) -> int:
    if not isinstance(q, (int, np.integer)) or q < 1 or q > MAX_QUBITS:
        raise CapacityError(f"qubit count must be in [1, {MAX_QUBITS}], got {q}")
    return int(q)


def qubit_count(state: np.ndarray) -> int:
    dim = state.shape[-1]
    q = dim.bit_length() - 1
    if dim < 2 or (1 << q) != dim:
        raise DimensionError(f"state length {dim} is not a power of two")
    return check_qubits(q)


def _check_wire(wire: int, q: int):
    if wire < 0 or wire >= q:
        raise WireIndexError(f"wire {wire} out of range for {q} qubits")


def zero_state(q: int) -> np.ndarray:
    state = np.zeros(1 << check_qubits(q), dtype=np.complex128)
    state[0] = 1.0
    return state


def zero_states(q: int, batch: int) -> np.ndarray:
    states = np.zeros((batch, 1 << check_qubits(q)), dtype=np.complex128)
    states[:, 0] = 1.0
    return states


def rotation_matrix(axis: str, angle) -> np.ndarray:
    """exp(-i angle/2 sigma_axis); a batch of angles gives a batch of matrices."""
    half = np.asarray(angle, dtype=np.float64) / 2.0
    c, s = np.cos(half), np.sin(half)
    zero = np.zeros_like(c)
    if axis == 'X':
        rows = [[c + 0j, -1j * s], [-1j * s, c + 0j]]
    elif axis == 'Y':
        rows = [[c + 0j, -s + 0j], [s + 0j, c + 0j]]
    elif axis == 'Z':
        rows = [[np.exp(-1j * half), zero + 0j], [zero + 0j, np.exp(1j * half)]]
    else:
        raise InvalidInputError(f"unknown rotation axis {axis!r}")
    return np.stack([np.stack(row, axis=-1) for row in rows], axis=-2)


def apply_matrix(state: np.ndarray, matrix: np.ndarray, wire: int) -> np.ndarray:
    """Apply a 2x2 matrix (or one matrix per batch entry) to ``wire``."""
    q = qubit_count(state)
    _check_wire(wire, q)
    view = state.reshape(-1, 1 << (q - wire - 1), 2, 1 << wire)
    if matrix.ndim == 2:
        out = np.einsum('rc,bhcl->bhrl', matrix, view)
    else:
        out = np.einsum('brc,bhcl->bhrl', matrix.reshape(-1, 2, 2), view)
    return out.reshape(state.shape)


def apply_rotation(state: np.ndarray, axis: str, wire: int, angle) -> np.ndarray:
    return apply_matrix(state, rotation_matrix(axis, angle), wire)


def apply_inverse_rotation(state: np.ndarray, axis: str, wire: int, angle) -> np.ndarray:
    return apply_rotation(state, axis, wire, -np.asarray(angle, dtype=np.float64))


def apply_pauli(state: np.ndarray, axis: str, wire: int) -> np.ndarray:
    return apply_matrix(state, _PAULI[axis], wire)


@lru_cache(maxsize=None)
def z_signs(q: int) -> np.ndarray:
    """(2**q, q) table of Z eigenvalues: +1 where bit i of the index is 0."""
    basis = np.arange(1 << q)[:, None]
    signs = 1.0 - 2.0 * ((basis >> np.arange(q)[None, :]) & 1)
    signs.setflags(write=False)
    return signs


def cz_signs(q: int, pairs) -> np.ndarray:
    basis = np.arange(1 << q)
    signs = np.ones(1 << q)
    for a, b in pairs:
        both = ((basis >> a) & 1) & ((basis >> b) & 1)
        signs = signs * (1.0 - 2.0 * both)
    return signs


def apply_cz(state: np.ndarray, wire_a: int, wire_b: int) -> np.ndarray:
    q = qubit_count(state)
    _check_wire(wire_a, q)
    _check_wire(wire_b, q)
    if wire_a == wire_b:
        raise InvalidInputError(f"CZ needs two distinct wires, got {wire_a} twice")
    return state * cz_signs(q, [(wire_a, wire_b)])


def encode_angles(state: np.ndarray, angles) -> np.ndarray:
    """RY(angles[..., i]) on qubit i for every qubit."""
    q = qubit_count(state)
    angles = np.asarray(angles, dtype=np.float64)
    if angles.shape[-1] != q:
        raise DimensionError(f"expected {q} encoding angles, got {angles.shape[-1]}")
    for wire in range(q):
        state = apply_rotation(state, 'Y', wire, angles[..., wire])
    return state


def probabilities(state: np.ndarray) -> np.ndarray:
    return state.real ** 2 + state.imag ** 2


def expect_z(state: np.ndarray) -> np.ndarray:
    """<Z_i> for every qubit; works on single states and batches."""
    q = qubit_count(state)
    return np.clip(probabilities(state) @ z_signs(q), -1.0, 1.0)


def norm(state: np.ndarray):
    return np.sqrt(probabilities(state).sum(axis=-1))


def fidelity(a: np.ndarray, b: np.ndarray):
    """|<a|b>|**2, clamped to [0, 1]."""
    if a.shape[-1] != b.shape[-1]:
        raise DimensionError(f"cannot compare states of length {a.shape[-1]} and {b.shape[-1]}")
    overlap = (np.conj(a) * b).sum(axis=-1)
    return np.clip(overlap.real ** 2 + overlap.imag ** 2, 0.0, 1.0)


def trace_distance(a: np.ndarray, b: np.ndarray):
    """sqrt(1 - fidelity), the trace distance between pure states."""
    return np.sqrt(np.maximum(0.0, 1.0 - fidelity(a, b)))

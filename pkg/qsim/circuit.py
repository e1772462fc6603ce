"""
Layered VQC: RY angle encoding, then L layers of (RY, RZ) on every qubit
followed by a CZ ring.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, List, Tuple

import numpy as np

from qunlearn.exceptions import DimensionError, InvalidInputError
from . import statevector as sv

ROTATION_AXES = ('Y', 'Z')


@dataclass(frozen=True)
class CircuitLayout:
    qubits: int
    layers: int

    def __post_init__(self):
        sv.check_qubits(self.qubits)
        if self.layers < 0:
            raise InvalidInputError(f"layer count must be non-negative, got {self.layers}")

    @property
    def n_params(self) -> int:
        return self.layers * self.qubits * len(ROTATION_AXES)

    def param_index(self, layer: int, wire: int, slot: int) -> int:
        """Flat index of the rotation on ``wire`` in ``layer``; slot 0 is RY, 1 is RZ."""
        return (layer * self.qubits + wire) * len(ROTATION_AXES) + slot

    @cached_property
    def ring_pairs(self) -> List[Tuple[int, int]]:
        q = self.qubits
        if q == 1:
            return []
        if q == 2:
            return [(0, 1)]
        return [(i, (i + 1) % q) for i in range(q)]

    @cached_property
    def ring_signs(self) -> np.ndarray:
        signs = sv.cz_signs(self.qubits, self.ring_pairs)
        signs.setflags(write=False)
        return signs

    def operations(self) -> Iterator[tuple]:
        """
        Gate sequence after encoding, as ('rot', axis, wire, param index)
        and ('ring',) entries.
        """
        for layer in range(self.layers):
            for wire in range(self.qubits):
                for slot, axis in enumerate(ROTATION_AXES):
                    yield ('rot', axis, wire, self.param_index(layer, wire, slot))
            yield ('ring',)


def check_params(layout: CircuitLayout, params) -> np.ndarray:
    params = np.asarray(params, dtype=np.float64).reshape(-1)
    if params.size != layout.n_params:
        raise DimensionError(f"circuit with {layout.layers} layers on {layout.qubits} qubits "
                             f"takes {layout.n_params} parameters, got {params.size}")
    return params


def check_angles(layout: CircuitLayout, angles, batched: bool) -> np.ndarray:
    angles = np.asarray(angles, dtype=np.float64)
    expected = 2 if batched else 1
    if angles.ndim != expected or angles.shape[-1] != layout.qubits:
        raise DimensionError(f"expected {'[B, ' if batched else '['}{layout.qubits}] encoding angles, "
                             f"got shape {angles.shape}")
    return angles


def _evolve(layout: CircuitLayout, params: np.ndarray, state: np.ndarray) -> np.ndarray:
    for op in layout.operations():
        if op[0] == 'ring':
            state = state * layout.ring_signs
        else:
            _, axis, wire, index = op
            state = sv.apply_rotation(state, axis, wire, params[index])
    return state


def run_circuit(layout: CircuitLayout, params, angles) -> np.ndarray:
    """Final state of one sample."""
    params = check_params(layout, params)
    angles = check_angles(layout, angles, batched=False)
    state = sv.encode_angles(sv.zero_state(layout.qubits), angles)
    return _evolve(layout, params, state)


def run_circuit_batch(layout: CircuitLayout, params, angles) -> np.ndarray:
    """Final states for a [B, q] batch of encodings sharing one parameter vector."""
    params = check_params(layout, params)
    angles = check_angles(layout, angles, batched=True)
    states = sv.encode_angles(sv.zero_states(layout.qubits, angles.shape[0]), angles)
    return _evolve(layout, params, states)


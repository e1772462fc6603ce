from typing import Tuple

import numpy as np

from diffcore.tensor import Tensor
from qsim.circuit import CircuitLayout, run_circuit_batch
from qsim.gradients import adjoint_grad_batch
from qsim.statevector import expect_z


def quantum_layer(angles: Tensor, theta: Tensor, layout: CircuitLayout) -> Tuple[Tensor, np.ndarray]:
    """
    Graph node running the VQC on every row of ``angles``.

    Returns the [B, q] Pauli-Z expectations and the final states; the
    backward closure runs the adjoint sweep from those cached states.
    """
    states = run_circuit_batch(layout, theta.data, angles.data)
    out = angles.graph.node(expect_z(states), (angles, theta))

    def _backward():
        grad = adjoint_grad_batch(layout, theta.data, angles.data, out.grad, states=states)
        theta.accumulate(grad.d_params)
        angles.accumulate(grad.d_angles)

    out._backward = _backward
    return out, states

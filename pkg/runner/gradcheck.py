"""Cross-checks of the analytic gradients against independent estimates."""
import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from diffcore.gradcheck import central_difference, relative_error
from hybrid.arch import ArchSpec
from hybrid.model import backward, build_model, forward
from qsim.circuit import CircuitLayout
from qsim.gradients import adjoint_grad, finite_difference_grad, param_shift_angle_grad, param_shift_grad
from qunlearn.streams import stream

logger = logging.getLogger(__name__)

CIRCUIT_TOLERANCE = 1e-7
MODEL_TOLERANCE = 1e-5


@dataclass(frozen=True)
class GradCheck:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tolerance)


def circuit_checks(circuits: int = 20, seed: int = 0) -> List[GradCheck]:
    """
    Adjoint, parameter-shift and finite differences, pairwise, on random circuits (q <= 4, L <= 3).

    Encoding angles get the same treatment: adjoint against the shift rule and against finite differences.
    """
    rng = stream(seed, 'gradcheck', 'circuits')
    checks = []
    for i in range(circuits):
        layout = CircuitLayout(int(rng.integers(1, 5)), int(rng.integers(1, 4)))
        params = rng.uniform(-np.pi, np.pi, layout.n_params)
        angles = rng.uniform(-np.pi, np.pi, layout.qubits)
        upstream = rng.normal(size=layout.qubits)
        adjoint = adjoint_grad(layout, params, angles, upstream)
        shift = np.array([param_shift_grad(layout, params, angles, upstream, j) for j in range(layout.n_params)])
        angle_shift = np.array([param_shift_angle_grad(layout, params, angles, upstream, wire)
                                for wire in range(layout.qubits)])
        numeric = finite_difference_grad(layout, params, angles, upstream)
        tag = f"circuit {i} (q={layout.qubits}, L={layout.layers})"
        checks += [
            GradCheck(f"{tag} adjoint/shift", float(np.abs(adjoint.d_params - shift).max()), CIRCUIT_TOLERANCE),
            GradCheck(f"{tag} adjoint/fd", float(np.abs(adjoint.d_params - numeric.d_params).max()),
                      CIRCUIT_TOLERANCE),
            GradCheck(f"{tag} shift/fd", float(np.abs(shift - numeric.d_params).max()), CIRCUIT_TOLERANCE),
            GradCheck(f"{tag} angles adjoint/shift", float(np.abs(adjoint.d_angles - angle_shift).max()),
                      CIRCUIT_TOLERANCE),
            GradCheck(f"{tag} angles adjoint/fd", float(np.abs(adjoint.d_angles - numeric.d_angles).max()),
                      CIRCUIT_TOLERANCE),
        ]
    return checks


def model_checks(dataset: str = 'iris', seed: int = 0, batch: int = 4) -> List[GradCheck]:
    """Full hybrid model: every parameter tensor against central differences."""
    model = build_model(ArchSpec.for_dataset(dataset), seed)
    rng = stream(seed, 'gradcheck', 'model')
    x = rng.normal(size=(batch, *model.spec.input_shape))
    if model.spec.is_image:
        x = rng.uniform(size=x.shape)
    weights = rng.normal(size=(batch, model.spec.num_classes))

    def objective():
        return float((forward(model, x, track_input=False)[0].data * weights).sum())

    _, cache = forward(model, x, track_input=False)
    grads, _ = backward(model, cache, weights)
    checks = []
    for name in model.params:
        numeric = central_difference(objective, model.params[name])
        checks.append(GradCheck(f"{dataset} {name}", relative_error(grads[name], numeric), MODEL_TOLERANCE))
    return checks


def run_gradcheck(circuits: int = 20, seed: int = 0) -> List[GradCheck]:
    checks = circuit_checks(circuits, seed) + model_checks('iris', seed)
    failed = [check for check in checks if not check.passed]
    for check in failed:
        logger.error(f"Gradient check {check.name} failed: error {check.error:.3e} > {check.tolerance:.0e}")
    logger.info(f"Gradient checks: {len(checks) - len(failed)}/{len(checks)} passed")
    return checks

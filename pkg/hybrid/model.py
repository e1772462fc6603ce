"""
Hybrid classifiers: classical extractor, projection to rotation angles,
VQC, Pauli-Z readout and a classical head.
"""
import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np

from diffcore import ops
from diffcore.init import glorot_uniform, rotation_uniform, zeros
from diffcore.tensor import Graph, LayerParams, Tensor, backward as graph_backward
from qunlearn.exceptions import ConfigError, DimensionError
from qunlearn.streams import stream
from .arch import ArchSpec
from .layers import quantum_layer

logger = logging.getLogger(__name__)


class HybridModel:
    """A spec plus the full parameter vector theta, held as named tensors."""

    def __init__(self, spec: ArchSpec, params: LayerParams, init_seed: Optional[int] = None):
        expected = {name: slot.shape for name, slot in spec.tensor_slots().items()}
        actual = params.shapes()
        if actual != expected:
            raise DimensionError(f"parameters {actual} do not match spec {spec.tag} ({expected})")
        self.spec = spec
        self.params = params
        self.init_seed = init_seed

    @property
    def n_params(self) -> int:
        return self.params.size

    def __repr__(self):
        return f"HybridModel({self.spec.tag}, m={self.n_params})"


@dataclass
class ForwardCache:
    graph: Graph
    inputs: Tensor
    logits: Tensor
    probs: Tensor
    angles: np.ndarray
    states: np.ndarray


def _init_tensor(slot, rng) -> np.ndarray:
    if slot.kind == 'glorot':
        return glorot_uniform(slot.shape, slot.fan_in, slot.fan_out, rng)
    if slot.kind == 'rotation':
        return rotation_uniform(slot.shape, rng)
    return zeros(slot.shape)


def build_model(spec: ArchSpec, seed: int) -> HybridModel:
    """Fresh model; every tensor draws from its own (seed, 'init', name) stream."""
    params = LayerParams()
    for name, slot in spec.tensor_slots().items():
        params[name] = _init_tensor(slot, stream(seed, 'init', name))
    logger.debug(f"Built {spec.tag} with {params.size} parameters (seed {seed})")
    return HybridModel(spec, params, init_seed=seed)


def clone(model: HybridModel) -> HybridModel:
    return HybridModel(model.spec, model.params.copy(), init_seed=model.init_seed)


def forward(model: HybridModel, batch, track_input: bool = True) -> Tuple[Tensor, ForwardCache]:
    """
    Probabilities for a batch plus the cache backward needs.

    With ``track_input=False`` the graph skips input gradients, which the
    training loops never use.
    """
    spec = model.spec
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != len(spec.input_shape) + 1 or batch.shape[1:] != spec.input_shape or batch.shape[0] < 1:
        raise DimensionError(f"{spec.dataset} expects input [B, {', '.join(map(str, spec.input_shape))}], "
                             f"got {batch.shape}")
    g = Graph()
    p = {name: g.param(name, model.params[name]) for name in model.params}
    x = g.input(batch, requires_grad=track_input, name='input')

    h = x
    if spec.is_image:
        for i in range(1, len(spec.conv_channels) + 1):
            h = ops.conv2d(h, p[f'extractor.conv{i}.kernel'], p[f'extractor.conv{i}.bias'])
            h = ops.maxpool2(ops.relu(h))
        h = ops.flatten(h)
    angles = ops.tanh_scale(ops.linear(h, p['proj.weight'], p['proj.bias']))
    measured, states = quantum_layer(angles, p['vqc.theta'], spec.layout)
    if spec.head_hidden:
        hidden = ops.relu(ops.linear(measured, p['head.fc1.weight'], p['head.fc1.bias']))
        logits = ops.linear(hidden, p['head.fc2.weight'], p['head.fc2.bias'])
    else:
        logits = ops.linear(measured, p['head.fc.weight'], p['head.fc.bias'])
    probs = ops.softmax(logits)
    return probs, ForwardCache(graph=g, inputs=x, logits=logits, probs=probs,
                               angles=angles.data, states=states)


def backward(model: HybridModel, cache: ForwardCache, d_probs) -> Tuple[LayerParams, Optional[np.ndarray]]:
    """
    Chain d(objective)/d(probs) back to every parameter and to the input.

    Input grads are None when the forward pass did not track the input.

    Raises:
        ContractError: the cache was already consumed
    """
    cache.graph.propagate(cache.probs, d_probs)
    input_grad = None
    if cache.inputs.requires_grad:
        input_grad = cache.inputs.grad if cache.inputs.grad is not None else np.zeros(cache.inputs.shape)
    return cache.graph.param_grads(), input_grad


def loss_backward(model: HybridModel, cache: ForwardCache, loss: Tensor) -> LayerParams:
    """Parameter gradients of a scalar loss built on this cache's graph."""
    return graph_backward(cache.graph, loss)


def predict(model: HybridModel, inputs, batch_size: int = 256, return_states: bool = False):
    """Probabilities (and optionally VQC states) for a whole set, in chunks."""
    inputs = np.asarray(inputs, dtype=np.float64)
    probs, states = [], []
    for start in range(0, inputs.shape[0], batch_size):
        p, cache = forward(model, inputs[start:start + batch_size], track_input=False)
        probs.append(p.data)
        states.append(cache.states)
    probs = np.concatenate(probs) if probs else np.zeros((0, model.spec.num_classes))
    if return_states:
        states = np.concatenate(states) if states else np.zeros((0, 1 << model.spec.qubits), dtype=complex)
        return probs, states
    return probs


def layer_groups(model: HybridModel) -> List[str]:
    return model.spec.groups()


def group_of(name: str) -> str:
    return name.split('.', 1)[0]


def group_parameters(model: HybridModel, groups: Iterable[str]) -> List[str]:
    groups = set(groups)
    unknown = groups - set(layer_groups(model))
    if unknown:
        raise ConfigError(f"unknown layer groups {sorted(unknown)} for {model.spec.tag}")
    return [name for name in model.params if group_of(name) in groups]


def output_groups(model: HybridModel, k: int) -> List[str]:
    """The ``k`` output-side groups; k past the group count selects everything."""
    if k < 1:
        raise ConfigError(f"k must be at least 1, got {k}")
    return layer_groups(model)[:k]


def reinitialize(model: HybridModel, groups: Iterable[str], seed: int) -> HybridModel:
    """Copy of ``model`` with the named groups drawn fresh from (seed, 'reinit', name)."""
    fresh = clone(model)
    slots = model.spec.tensor_slots()
    for name in group_parameters(model, groups):
        fresh.params[name] = _init_tensor(slots[name], stream(seed, 'reinit', name))
    return fresh

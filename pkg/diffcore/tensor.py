"""
Tensors, parameter maps and the computation graph.

A Graph records nodes in construction order, which is already a valid
topological order, so backward is a single reverse sweep over that list.
"""
from collections.abc import MutableMapping
from typing import Callable, Dict, Iterable, Optional

import numpy as np

from qunlearn.exceptions import ContractError, DimensionError


class Tensor:
    """A float64 array plus the bookkeeping needed for reverse-mode gradients."""

    __slots__ = ('data', 'grad', 'name', 'graph', 'requires_grad', '_parents', '_backward')

    def __init__(self, data, graph: Optional['Graph'] = None, parents=(), name: Optional[str] = None,
                 requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.name = name
        self.graph = graph
        self.requires_grad = requires_grad
        self._parents = tuple(parents)
        self._backward: Callable[[], None] = lambda: None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def accumulate(self, grad):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64, copy=True).reshape(self.data.shape)
        else:
            self.grad = self.grad + grad

    def __add__(self, other):
        other = _same_graph(self, other)
        if other.shape != self.shape:
            raise DimensionError(f"cannot add tensors of shape {self.shape} and {other.shape}")
        out = self.graph.node(self.data + other.data, (self, other))

        def _backward():
            self.accumulate(out.grad)
            other.accumulate(out.grad)

        out._backward = _backward
        return out

    def __mul__(self, scale):
        scale = float(scale)
        out = self.graph.node(self.data * scale, (self,))

        def _backward():
            self.accumulate(out.grad * scale)

        out._backward = _backward
        return out

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-_same_graph(self, other))

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ''
        return f"Tensor(shape={self.shape}{label})"


def _same_graph(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor) or b.graph is not a.graph:
        raise ContractError('tensor arithmetic requires operands from the same graph')
    return b


class Graph:
    """
    One forward pass worth of nodes.

    Parameters and inputs are leaves; every op appends its output node. A
    graph can be propagated exactly once.
    """

    def __init__(self):
        self.nodes = []
        self.params: Dict[str, Tensor] = {}
        self.consumed = False

    def param(self, name: str, value) -> Tensor:
        leaf = Tensor(value, graph=self, name=name, requires_grad=True)
        self.params[name] = leaf
        self.nodes.append(leaf)
        return leaf

    def input(self, value, requires_grad: bool = False, name: Optional[str] = None) -> Tensor:
        leaf = Tensor(value, graph=self, name=name, requires_grad=requires_grad)
        self.nodes.append(leaf)
        return leaf

    def node(self, data, parents: Iterable[Tensor]) -> Tensor:
        parents = tuple(parents)
        out = Tensor(data, graph=self, parents=parents,
                     requires_grad=any(p.requires_grad for p in parents))
        self.nodes.append(out)
        return out

    def propagate(self, root: Tensor, seed) -> None:
        """Push ``seed`` (d loss / d root) back through every recorded node."""
        if self.consumed:
            raise ContractError('graph already propagated; run forward again')
        if root.graph is not self:
            raise ContractError('root node does not belong to this graph')
        seed = np.asarray(seed, dtype=np.float64)
        if seed.shape != root.shape:
            raise DimensionError(f"seed gradient {seed.shape} does not match node {root.shape}")
        self.consumed = True
        if not root.requires_grad:
            return
        root.grad = seed.copy()
        for node in reversed(self.nodes):
            if node.grad is not None and node._parents:
                node._backward()

    def param_grads(self) -> 'LayerParams':
        grads = LayerParams()
        for name, leaf in self.params.items():
            grads[name] = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
        return grads


class LayerParams(MutableMapping):
    """
    Named float64 arrays with lexicographic iteration order.

    Assignment stores a copy so callers never alias optimizer state or
    snapshots.
    """

    def __init__(self, items=None):
        self._store: Dict[str, np.ndarray] = {}
        for name, value in dict(items or {}).items():
            self[name] = value

    def __getitem__(self, name):
        return self._store[name]

    def __setitem__(self, name, value):
        self._store[name] = np.array(value, dtype=np.float64, copy=True)

    def __delitem__(self, name):
        del self._store[name]

    def __iter__(self):
        return iter(sorted(self._store))

    def __len__(self):
        return len(self._store)

    @property
    def size(self) -> int:
        return int(sum(value.size for value in self._store.values()))

    def copy(self) -> 'LayerParams':
        return LayerParams(self._store)

    def zeros_like(self) -> 'LayerParams':
        return LayerParams({name: np.zeros_like(value) for name, value in self._store.items()})

    def shapes(self) -> Dict[str, tuple]:
        return {name: self._store[name].shape for name in self}

    def flat(self) -> np.ndarray:
        if not self._store:
            return np.zeros(0)
        return np.concatenate([self._store[name].ravel() for name in self])

    def __repr__(self):
        return f"LayerParams({', '.join(f'{n}{self._store[n].shape}' for n in self)})"


def backward(graph: Graph, loss: Tensor) -> LayerParams:
    """
    Run reverse-mode differentiation from a scalar loss.

    Returns:
        LayerParams: gradient for every parameter of the graph, zeros for
        parameters the loss does not depend on.

    Raises:
        ContractError: non-scalar loss, or the graph was already propagated.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    graph.propagate(loss, np.ones(loss.shape))
    return graph.param_grads()

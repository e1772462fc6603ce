"""Differentiable layers and losses used by the hybrid architectures."""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from qunlearn.exceptions import DimensionError, InvalidInputError
from .tensor import Tensor

PROB_CLAMP = 1e-10
ROW_SUM_TOL = 1e-6


def _values(x):
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """out[b, o] = sum_i x[b, i] * W[i, o] + b[o]"""
    if (x.data.ndim != 2 or weight.data.ndim != 2 or x.shape[1] != weight.shape[0]
            or bias.shape != (weight.shape[1],)):
        raise DimensionError(
            f"linear: input {x.shape} does not conform to weight {weight.shape} / bias {bias.shape}")
    out = x.graph.node(x.data @ weight.data + bias.data, (x, weight, bias))

    def _backward():
        g = out.grad
        x.accumulate(g @ weight.data.T)
        weight.accumulate(x.data.T @ g)
        bias.accumulate(g.sum(axis=0))

    out._backward = _backward
    return out


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
    """3x3 cross-correlation, stride 1, zero padding 1."""
    if x.data.ndim != 4 or kernel.data.ndim != 4 or kernel.shape[2:] != (3, 3):
        raise DimensionError(f"conv2d: expected [B,C,H,W] input and [F,C,3,3] kernel, "
                             f"got {x.shape} and {kernel.shape}")
    if x.shape[1] != kernel.shape[1]:
        raise DimensionError(f"conv2d: input has {x.shape[1]} channels, kernel expects {kernel.shape[1]}")
    if bias.shape != (kernel.shape[0],):
        raise DimensionError(f"conv2d: bias {bias.shape} does not match {kernel.shape[0]} filters")

    height, width = x.shape[2], x.shape[3]
    padded = np.pad(x.data, ((0, 0), (0, 0), (1, 1), (1, 1)))
    windows = sliding_window_view(padded, (3, 3), axis=(2, 3))
    result = np.einsum('bchwij,fcij->bfhw', windows, kernel.data, optimize=True)
    out = x.graph.node(result + bias.data[None, :, None, None], (x, kernel, bias))

    def _backward():
        g = out.grad
        kernel.accumulate(np.einsum('bchwij,bfhw->fcij', windows, g, optimize=True))
        bias.accumulate(g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            d_padded = np.zeros_like(padded)
            for i in range(3):
                for j in range(3):
                    d_padded[:, :, i:i + height, j:j + width] += np.einsum(
                        'bfhw,fc->bchw', g, kernel.data[:, :, i, j], optimize=True)
            x.accumulate(d_padded[:, :, 1:-1, 1:-1])

    out._backward = _backward
    return out


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = x.graph.node(np.where(mask, x.data, 0.0), (x,))

    def _backward():
        x.accumulate(out.grad * mask)

    out._backward = _backward
    return out


def maxpool2(x: Tensor) -> Tensor:
    """2x2 non-overlapping max pool; gradient flows only to the recorded argmax."""
    if x.data.ndim != 4 or x.shape[2] % 2 or x.shape[3] % 2:
        raise DimensionError(f"maxpool2 needs [B,C,H,W] with even H and W, got {x.shape}")
    b, c, h, w = x.shape
    blocks = (x.data.reshape(b, c, h // 2, 2, w // 2, 2)
              .transpose(0, 1, 2, 4, 3, 5)
              .reshape(b, c, h // 2, w // 2, 4))
    argmax = blocks.argmax(axis=-1)[..., None]
    out = x.graph.node(np.take_along_axis(blocks, argmax, axis=-1)[..., 0], (x,))

    def _backward():
        d_blocks = np.zeros_like(blocks)
        np.put_along_axis(d_blocks, argmax, out.grad[..., None], axis=-1)
        x.accumulate(d_blocks.reshape(b, c, h // 2, w // 2, 2, 2)
                     .transpose(0, 1, 2, 4, 3, 5)
                     .reshape(b, c, h, w))

    out._backward = _backward
    return out


def tanh_scale(x: Tensor) -> Tensor:
    """pi * tanh(x), bounding features to rotation angles in (-pi, pi)."""
    t = np.tanh(x.data)
    out = x.graph.node(np.pi * t, (x,))

    def _backward():
        x.accumulate(out.grad * np.pi * (1.0 - t * t))

    out._backward = _backward
    return out


def flatten(x: Tensor) -> Tensor:
    shape = x.shape
    out = x.graph.node(x.data.reshape(shape[0], -1), (x,))

    def _backward():
        x.accumulate(out.grad.reshape(shape))

    out._backward = _backward
    return out


def softmax_values(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax(logits: Tensor) -> Tensor:
    p = softmax_values(logits.data)
    out = logits.graph.node(p, (logits,))

    def _backward():
        g = out.grad
        logits.accumulate(p * (g - (g * p).sum(axis=1, keepdims=True)))

    out._backward = _backward
    return out


def _check_distribution(name, rows, like_shape):
    if rows.shape != like_shape:
        raise DimensionError(f"{name} has shape {rows.shape}, expected {like_shape}")
    if (rows < 0).any():
        raise InvalidInputError(f"{name} has negative entries")
    sums = rows.sum(axis=1)
    if np.abs(sums - 1.0).max(initial=0.0) > ROW_SUM_TOL:
        raise InvalidInputError(f"{name} rows must sum to 1 (worst row sums to {sums[np.argmax(np.abs(sums - 1))]:.6g})")


def softmax_cross_entropy(logits: Tensor, targets) -> Tensor:
    """
    Mean over the batch of -sum_k t_k log softmax(logits)_k.

    ``targets`` may be one-hot or soft rows; each must sum to 1.
    """
    t = _values(targets)
    if logits.data.ndim != 2:
        raise DimensionError(f"softmax_cross_entropy expects [B,K] logits, got {logits.shape}")
    _check_distribution('targets', t, logits.shape)
    batch = logits.shape[0]
    p = softmax_values(logits.data)
    loss = -(t * np.log(np.maximum(p, PROB_CLAMP))).sum() / batch
    out = logits.graph.node(np.array(loss), (logits,))

    def _backward():
        logits.accumulate(float(out.grad) * (p - t) / batch)

    out._backward = _backward
    return out


def kl_loss(p, q) -> Tensor:
    """
    Mean over the batch of KL(p_i || q_i), both arguments clamped at 1e-10.

    Either argument may be a graph tensor (differentiated) or a fixed array;
    at least one must be a tensor.
    """
    p_rows, q_rows = _values(p), _values(q)
    if p_rows.ndim != 2:
        raise DimensionError(f"kl_loss expects [B,K] rows, got {p_rows.shape}")
    _check_distribution('p', p_rows, p_rows.shape)
    _check_distribution('q', q_rows, p_rows.shape)
    batch = p_rows.shape[0]
    pc = np.maximum(p_rows, PROB_CLAMP)
    qc = np.maximum(q_rows, PROB_CLAMP)
    log_ratio = np.log(pc) - np.log(qc)
    value = (p_rows * log_ratio).sum() / batch

    parents = tuple(t for t in (p, q) if isinstance(t, Tensor))
    if not parents:
        raise InvalidInputError('kl_loss needs at least one tensor argument')
    out = parents[0].graph.node(np.array(value), parents)

    def _backward():
        g = float(out.grad) / batch
        if isinstance(p, Tensor):
            p.accumulate(g * (log_ratio + (p_rows > PROB_CLAMP)))
        if isinstance(q, Tensor):
            q.accumulate(g * (-p_rows / qc) * (q_rows > PROB_CLAMP))

    out._backward = _backward
    return out


def kl_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Per-row KL(p || q) with the same clamp as kl_loss, no graph."""
    pc = np.maximum(p, PROB_CLAMP)
    qc = np.maximum(q, PROB_CLAMP)
    return (p * (np.log(pc) - np.log(qc))).sum(axis=1)

"""Parameter initialization and composite layers built from autograd primitives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch
from .autograd import Tensor, add, matmul, mul, sigmoid, sub, tanh


def glorot(rng, shape, fan_in, fan_out, dtype=np.float32) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=shape).astype(dtype), requires_grad=True)


def zeros(shape, dtype=np.float32) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)


def ones(shape, dtype=np.float32) -> Tensor:
    return Tensor(np.ones(shape, dtype=dtype), requires_grad=True)


def dense(x, weight, bias=None):
    """``x @ weight + bias`` with ``weight`` laid out (in, out)."""
    out = matmul(x, weight)
    return out if bias is None else add(out, bias)


@dataclass
class BatchNormState:
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.99
    eps: float = 1e-5

    @classmethod
    def create(cls, features, dtype=np.float32, momentum=0.99, eps=1e-5):
        return cls(np.zeros(features, dtype=dtype), np.ones(features, dtype=dtype), momentum, eps)


def gru_params(rng, input_size, hidden_size, dtype=np.float32) -> dict[str, Tensor]:
    """Gate weights stacked as [update | reset | candidate] along the output axis."""
    return {
        "W": glorot(rng, (input_size, 3 * hidden_size), input_size, hidden_size, dtype),
        "U": glorot(rng, (hidden_size, 3 * hidden_size), hidden_size, hidden_size, dtype),
        "b": zeros((3 * hidden_size,), dtype),
    }


def gru_update(xw, h, U, b):
    """One GRU step given the input projection ``xw = x @ W`` (..., 3H)."""
    H = h.shape[-1]
    hu = matmul(h, U[:, :2 * H])
    gates = sigmoid(add(add(xw[..., :2 * H], hu), b[:2 * H]))
    z, r = gates[..., :H], gates[..., H:]
    cand = tanh(add(add(xw[..., 2 * H:], matmul(mul(r, h), U[:, 2 * H:])), b[2 * H:]))
    # (1 - z) * h + z * cand
    return add(h, mul(z, sub(cand, h)))


def gru_cell(x, h, params):
    """z = σ(xW_z + hU_z + b_z), r = σ(xW_r + hU_r + b_r),
    h~ = tanh(xW_h + (r⊙h)U_h + b_h), h' = (1-z)⊙h + z⊙h~."""
    W, U, b = params["W"], params["U"], params["b"]
    if x.shape[-1] != W.shape[0] or h.shape[-1] * 3 != W.shape[1] or U.shape[0] != h.shape[-1]:
        raise ShapeMismatch(f"gru_cell x{x.shape} h{h.shape} W{W.shape} U{U.shape}")
    squeeze = x.ndim == 1
    if squeeze:
        x, h = x[None, :], h[None, :]
    out = gru_update(matmul(x, W), h, U, b)
    return out[0] if squeeze else out

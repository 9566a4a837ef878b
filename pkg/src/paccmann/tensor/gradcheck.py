"""Finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

import numpy as np

from .autograd import Tensor


def grad_check(f, point, h=1e-5, return_details=False):
    """Max relative error between autograd and central-difference gradients.

    ``f`` maps a list of Tensors to a scalar Tensor; ``point`` is a list of
    arrays (a single array is accepted). The error for one coordinate is
    ``|g_ad - g_fd| / max(1, |g_ad|, |g_fd|)``. Use float64 inputs.
    """
    single = isinstance(point, np.ndarray) or np.isscalar(point)
    arrays = [np.array(point, dtype=np.float64)] if single else [np.array(p, dtype=np.float64) for p in point]
    leaves = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    f(leaves).backward()
    analytic = [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data) for leaf in leaves]

    def value(arrs):
        return float(f([Tensor(a) for a in arrs]).data)

    worst = 0.0
    numeric = []
    for k, arr in enumerate(arrays):
        fd = np.zeros_like(arr)
        flat = arr.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            plus = value(arrays)
            flat[i] = orig - h
            minus = value(arrays)
            flat[i] = orig
            fd.reshape(-1)[i] = (plus - minus) / (2 * h)
        numeric.append(fd)
        ad = analytic[k]
        err = np.abs(ad - fd) / np.maximum(1.0, np.maximum(np.abs(ad), np.abs(fd)))
        if err.size:
            worst = max(worst, float(err.max()))
    if return_details:
        return worst, analytic, numeric
    return worst

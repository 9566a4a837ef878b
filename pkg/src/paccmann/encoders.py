"""Gene and SMILES encoders.

All encoders work on batches: embeddings ``E`` are (B, T, H), token masks
(B, T) and gene contexts ``G`` (B, |G|). Parameters are plain dicts of
:class:`~paccmann.tensor.Tensor`; attention parameter shapes follow the
column-vector convention (``W_e`` is A×H, ``W_g`` is A×|G|).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AllMasked, MissingContextParams, SequenceTooShort, ShapeMismatch
from .tensor import (
    Tensor,
    add,
    concat,
    conv1d,
    conv2d,
    embedding,
    glorot,
    gru_params,
    gru_update,
    matmul,
    max_pool,
    mul,
    relu,
    reshape,
    sigmoid,
    softmax_masked,
    stack,
    sum,
    swapaxes,
    tanh,
    zeros,
)


@dataclass
class EncoderOutput:
    encoding: Tensor
    attention: Optional[np.ndarray] = None


def init_embedding(rng, vocab_size, dim, dtype=np.float32) -> Tensor:
    table = glorot(rng, (vocab_size, dim), vocab_size, dim, dtype)
    table.data[0] = 0
    return table


def embed(indices, mask, table: Tensor) -> Tensor:
    """Look up token embeddings; PAD (index 0) rows are zero and stay frozen."""
    indices = np.asarray(indices)
    return embedding(table, indices, pad_index=0)


def init_gene_attention(rng, n_genes, dtype=np.float32):
    return {"W": glorot(rng, (n_genes, n_genes), n_genes, n_genes, dtype), "b": zeros((n_genes,), dtype)}


def gene_attention_encode(G, params) -> EncoderOutput:
    """Softmax weights from a dense |G|→|G| layer, applied elementwise to the genes."""
    G = G if isinstance(G, Tensor) else Tensor(G)
    W = params["W"]
    if W.shape != (G.shape[-1], G.shape[-1]):
        raise ShapeMismatch(f"gene attention weights {W.shape} vs {G.shape[-1]} genes")
    weights = softmax_masked(add(matmul(G, W), params["b"]))
    return EncoderOutput(mul(weights, G), weights.data)


def init_attention(rng, dim, attention_dim, context_dim=None, dtype=np.float32):
    """Attention parameters; ``W_g`` is added for contextual attention, ``b`` otherwise."""
    params = {
        "V": glorot(rng, (attention_dim,), attention_dim, 1, dtype),
        "W_e": glorot(rng, (attention_dim, dim), dim, attention_dim, dtype),
    }
    if context_dim is None:
        params["b"] = zeros((attention_dim,), dtype)
    else:
        params["W_g"] = glorot(rng, (attention_dim, context_dim), context_dim, attention_dim, dtype)
    return params


def _check_mask(mask, shape):
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != shape:
        raise ShapeMismatch(f"mask {mask.shape} vs sequence {shape}")
    if not np.all(mask.any(axis=-1)):
        raise AllMasked("a sequence has no unmasked positions")
    return mask


def _attend(E, projected, mask, V) -> EncoderOutput:
    B, T, _ = E.shape
    A = V.shape[0]
    u = reshape(matmul(tanh(projected), reshape(V, (A, 1))), (B, T))
    alpha = softmax_masked(u, mask)
    encoding = sum(mul(reshape(alpha, (B, T, 1)), E), axis=1)
    return EncoderOutput(encoding, alpha.data)


def self_attention_encode(E, mask, params) -> EncoderOutput:
    """u_i = V·tanh(W_e e_i + b); alpha = softmax(u); encoding = Σ alpha_i e_i."""
    mask = _check_mask(mask, E.shape[:2])
    W_e = params["W_e"]
    if W_e.shape[1] != E.shape[-1]:
        raise ShapeMismatch(f"W_e {W_e.shape} vs embedding width {E.shape[-1]}")
    projected = matmul(E, swapaxes(W_e, 0, 1))
    if "b" in params:
        projected = add(projected, params["b"])
    return _attend(E, projected, mask, params["V"])


def contextual_attention_encode(E, G, mask, params) -> EncoderOutput:
    """u_i = V·tanh(W_e e_i + W_g G) with the gene context shared across tokens."""
    if "W_g" not in params:
        raise MissingContextParams("contextual attention needs W_g")
    mask = _check_mask(mask, E.shape[:2])
    G = G if isinstance(G, Tensor) else Tensor(G)
    W_e, W_g = params["W_e"], params["W_g"]
    if W_e.shape[1] != E.shape[-1] or W_g.shape[1] != G.shape[-1]:
        raise ShapeMismatch(f"W_e {W_e.shape} / W_g {W_g.shape} vs inputs {E.shape}, {G.shape}")
    B, _, _ = E.shape
    A = W_e.shape[0]
    context = reshape(matmul(G, swapaxes(W_g, 0, 1)), (B, 1, A))
    projected = add(matmul(E, swapaxes(W_e, 0, 1)), context)
    return _attend(E, projected, mask, params["V"])


def init_brnn(rng, dim, hidden, dtype=np.float32):
    return {
        "l1f": gru_params(rng, dim, hidden, dtype),
        "l1b": gru_params(rng, dim, hidden, dtype),
        "l2f": gru_params(rng, 2 * hidden, hidden, dtype),
        "l2b": gru_params(rng, 2 * hidden, hidden, dtype),
    }


def _gru_scan(X, mask, params, reverse):
    B, T, _ = X.shape
    H = params["U"].shape[0]
    xw = matmul(X, params["W"])
    h = Tensor(np.zeros((B, H), dtype=X.dtype))
    states = [None] * T
    for t in (reversed(range(T)) if reverse else range(T)):
        m = mask[:, t]
        if m.any():
            h_new = gru_update(xw[:, t, :], h, params["U"], params["b"])
            if m.all():
                h = h_new
            else:
                keep = m[:, None].astype(X.dtype)
                h = add(mul(h_new, keep), mul(h, 1 - keep))
        states[t] = h
    return stack(states, axis=1), h


def brnn_encode(E, mask, params) -> EncoderOutput:
    """Two stacked bidirectional GRU layers over each sequence's unmasked prefix.

    The encoding concatenates final states as [layer-2 fwd, layer-2 bwd,
    layer-1 fwd, layer-1 bwd].
    """
    mask = _check_mask(mask, E.shape[:2])
    seq_f, h1f = _gru_scan(E, mask, params["l1f"], reverse=False)
    seq_b, h1b = _gru_scan(E, mask, params["l1b"], reverse=True)
    layer2_in = concat([seq_f, seq_b], axis=-1)
    _, h2f = _gru_scan(layer2_in, mask, params["l2f"], reverse=False)
    _, h2b = _gru_scan(layer2_in, mask, params["l2b"], reverse=True)
    return EncoderOutput(concat([h2f, h2b, h1f, h1b], axis=-1))


def init_scnn(rng, dim, filters=(32, 32, 16, 16), kernels=(5, 5, 5, 3), dtype=np.float32):
    if len(filters) != len(kernels) or not filters:
        raise ShapeMismatch("filters and kernels must be non-empty and equal in length")
    layers = []
    in_ch = None
    for i, (f, k) in enumerate(zip(filters, kernels)):
        if i == 0:
            w = glorot(rng, (f, dim, k), dim * k, f, dtype)
        else:
            w = glorot(rng, (f, k, in_ch), in_ch * k, f, dtype)
        layers.append({"W": w, "b": zeros((f,), dtype)})
        in_ch = f
    return {"layers": layers}


def scnn_encode(E, params) -> EncoderOutput:
    """Full-height 2-D conv, then 1-D convs, all sigmoid; global max-pool over positions."""
    layers = params["layers"]
    T = E.shape[1]
    longest = max([layers[0]["W"].shape[2]] + [layer["W"].shape[1] for layer in layers[1:]])
    if T < longest:
        raise SequenceTooShort(f"sequence length {T} shorter than kernel {longest}")
    h = sigmoid(conv2d(E, layers[0]["W"], layers[0]["b"]))
    for layer in layers[1:]:
        h = sigmoid(conv1d(h, layer["W"], layer["b"]))
    return EncoderOutput(max_pool(h, axis=1))


def init_mca(rng, dim, n_genes, filters=16, kernels=(5, 11), conv_attention_dim=64,
             attention_dim=256, dtype=np.float32):
    params = {"channels": []}
    for k in kernels:
        params["channels"].append({
            "W": glorot(rng, (filters, dim, k), dim * k, filters, dtype),
            "b": zeros((filters,), dtype),
            "attention": init_attention(rng, filters, conv_attention_dim, n_genes, dtype),
        })
    params["tokens"] = init_attention(rng, dim, attention_dim, n_genes, dtype)
    return params


def mca_encode(E, G, mask, params):
    """Convolutional channels plus a token-level channel, each with contextual attention.

    Returns ``(EncoderOutput, reports)``; ``reports`` holds one attention array
    per channel, the token-level channel last. The encoding concatenates the
    channel outputs in the same order.
    """
    T = E.shape[1]
    longest = max(ch["W"].shape[2] for ch in params["channels"])
    if T < longest:
        raise SequenceTooShort(f"sequence length {T} shorter than kernel {longest}")
    outputs, reports = [], []
    for ch in params["channels"]:
        maps = relu(conv2d(E, ch["W"], ch["b"]))
        out = contextual_attention_encode(maps, G, mask, ch["attention"])
        outputs.append(out.encoding)
        reports.append(out.attention)
    tok = contextual_attention_encode(E, G, mask, params["tokens"])
    outputs.append(tok.encoding)
    reports.append(tok.attention)
    return EncoderOutput(concat(outputs, axis=-1), tok.attention), reports

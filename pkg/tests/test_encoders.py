import numpy as np
import pytest

from paccmann import encoders as enc
from paccmann.errors import AllMasked, MissingContextParams, SequenceTooShort, ShapeMismatch
from paccmann.tensor import Tensor, grad_check, sum

F64 = np.float64


def _zero(params):
    return {k: Tensor(np.zeros_like(v.data)) for k, v in params.items()}


def test_embed():
    table = enc.init_embedding(np.random.default_rng(0), 5, 3, F64)
    assert np.array_equal(table.data[0], np.zeros(3))
    out = enc.embed(np.zeros((1, 4), dtype=int), np.zeros((1, 4), bool), table)
    assert np.array_equal(out.data, np.zeros((1, 4, 3)))
    out = enc.embed(np.array([[3]]), np.array([[True]]), table)
    assert np.array_equal(out.data[0, 0], table.data[3])


def test_embedding_gradient_only_reaches_used_rows():
    table = enc.init_embedding(np.random.default_rng(0), 6, 2, F64)
    idx = np.array([[2, 4, 0, 0]])
    mask = idx > 0

    def f(t):
        E = enc.embed(idx, mask, t[0])
        return sum(enc.self_attention_encode(E, mask, params).encoding)

    params = enc.init_attention(np.random.default_rng(1), 2, 3, None, F64)
    err, ad, fd = grad_check(f, [table.data.copy()], return_details=True)
    assert np.all(ad[0][[0, 1, 3, 5]] == 0)
    assert np.abs(ad[0][[2, 4]] - fd[0][[2, 4]]).max() < 1e-6


def test_gene_attention():
    G = np.array([[1.0, -2.0, 3.0, 0.5]])
    params = _zero(enc.init_gene_attention(np.random.default_rng(0), 4, F64))
    out = enc.gene_attention_encode(Tensor(G), params)
    assert np.allclose(out.attention, 0.25)
    assert np.allclose(out.encoding.data, G / 4)
    rng = np.random.default_rng(3)
    params = enc.init_gene_attention(rng, 4, F64)
    params["b"].data[:] = rng.normal(size=4)
    out = enc.gene_attention_encode(Tensor(G), params)
    assert np.all(out.attention >= 0) and abs(out.attention.sum() - 1) < 1e-6
    perm = rng.permutation(4)
    permuted = {"W": Tensor(params["W"].data[np.ix_(perm, perm)]), "b": Tensor(params["b"].data[perm])}
    out_p = enc.gene_attention_encode(Tensor(G[:, perm]), permuted)
    assert np.allclose(out_p.encoding.data, out.encoding.data[:, perm])
    with pytest.raises(ShapeMismatch):
        enc.gene_attention_encode(Tensor(np.ones((1, 3))), params)


def _sa_params(rng, H=2, A=3):
    p = enc.init_attention(rng, H, A, None, F64)
    p["b"].data[:] = rng.normal(size=A)
    return p


def test_self_attention_simple_cases(rng):
    p = _sa_params(rng)
    e = rng.normal(size=(1, 1, 2))
    out = enc.self_attention_encode(Tensor(e), np.array([[True]]), p)
    assert out.attention.tolist() == [[1.0]] and np.allclose(out.encoding.data, e[:, 0])
    twin = np.repeat(e, 2, axis=1)
    out = enc.self_attention_encode(Tensor(twin), np.ones((1, 2), bool), p)
    assert np.allclose(out.attention, 0.5) and np.allclose(out.encoding.data, e[:, 0])
    with pytest.raises(AllMasked):
        enc.self_attention_encode(Tensor(twin), np.zeros((1, 2), bool), p)


def test_self_attention_hand_evaluation():
    E = np.array([[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]])
    V = np.array([1.0, -1.0])
    W_e = np.array([[0.5, 0.0], [0.0, 2.0]])
    b = np.array([0.1, -0.1])
    u = [sum_ for sum_ in (V @ np.tanh(W_e @ E[0, i] + b) for i in range(3))]
    alpha = np.exp(u) / np.exp(u).sum()
    expected = (alpha[:, None] * E[0]).sum(0)
    out = enc.self_attention_encode(Tensor(E), np.ones((1, 3), bool),
                                    {"V": Tensor(V), "W_e": Tensor(W_e), "b": Tensor(b)})
    assert np.allclose(out.attention[0], alpha, atol=1e-12)
    assert np.allclose(out.encoding.data[0], expected, atol=1e-12)


def test_contextual_attention_hand_evaluation():
    E = np.array([[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]])
    G = np.array([[0.3, -0.7]])
    V = np.array([1.0, 0.5])
    W_e = np.array([[0.5, 0.0], [0.2, 2.0]])
    W_g = np.array([[1.0, 0.0], [0.5, -1.0]])
    u = np.array([V @ np.tanh(W_e @ E[0, i] + W_g @ G[0]) for i in range(3)])
    alpha = np.exp(u) / np.exp(u).sum()
    out = enc.contextual_attention_encode(Tensor(E), Tensor(G), np.ones((1, 3), bool),
                                          {"V": Tensor(V), "W_e": Tensor(W_e), "W_g": Tensor(W_g)})
    assert np.allclose(out.attention[0], alpha, atol=1e-12)
    assert np.allclose(out.encoding.data[0], (alpha[:, None] * E[0]).sum(0), atol=1e-12)


def test_contextual_reduces_to_self(rng):
    E = Tensor(rng.normal(size=(2, 4, 2)))
    G = rng.normal(size=(2, 3))
    mask = np.array([[True, True, False, True], [True, False, False, False]])
    ca = enc.init_attention(rng, 2, 3, 3, F64)
    sa = {"V": ca["V"], "W_e": ca["W_e"], "b": Tensor(np.zeros(3))}
    zeroed = dict(ca, W_g=Tensor(np.zeros_like(ca["W_g"].data)))
    ref = enc.self_attention_encode(E, mask, sa)
    for out in (enc.contextual_attention_encode(E, G, mask, zeroed),
                enc.contextual_attention_encode(E, 0 * G, mask, ca)):
        assert np.array_equal(out.encoding.data, ref.encoding.data)
        assert np.array_equal(out.attention, ref.attention)
    assert np.all(ref.attention[~mask] == 0)
    with pytest.raises(MissingContextParams):
        enc.contextual_attention_encode(E, G, mask, sa)


def test_self_attention_permutation(rng):
    E = rng.normal(size=(1, 5, 2))
    p = _sa_params(rng)
    mask = np.ones((1, 5), bool)
    perm = rng.permutation(5)
    a = enc.self_attention_encode(Tensor(E), mask, p)
    b = enc.self_attention_encode(Tensor(E[:, perm]), mask, p)
    assert np.allclose(b.attention[0], a.attention[0][perm])
    assert np.allclose(b.encoding.data, a.encoding.data)


def _tied_brnn(rng, H=2):
    p = enc.init_brnn(rng, H, H, F64)
    p["l1b"] = p["l1f"]
    p["l2b"] = p["l2f"]
    return p


def test_brnn_single_token_symmetry(rng):
    p = _tied_brnn(rng)
    out = enc.brnn_encode(Tensor(rng.normal(size=(1, 1, 2))), np.ones((1, 1), bool), p).encoding.data[0]
    h2f, h2b, h1f, h1b = np.split(out, 4)
    assert np.array_equal(h1f, h1b) and np.array_equal(h2f, h2b)


def test_brnn_reversal_swaps_layer_one(rng):
    p = _tied_brnn(rng)
    E = rng.normal(size=(1, 6, 2))
    mask = np.ones((1, 6), bool)
    fwd = np.split(enc.brnn_encode(Tensor(E), mask, p).encoding.data[0], 4)
    rev = np.split(enc.brnn_encode(Tensor(E[:, ::-1].copy()), mask, p).encoding.data[0], 4)
    assert np.array_equal(fwd[2], rev[3]) and np.array_equal(fwd[3], rev[2])


def test_brnn_zero_parameters_and_padding(rng):
    p = {k: _zero(v) for k, v in enc.init_brnn(rng, 2, 2, F64).items()}
    out = enc.brnn_encode(Tensor(rng.normal(size=(2, 4, 2))), np.ones((2, 4), bool), p)
    assert out.encoding.shape == (2, 8) and not out.encoding.data.any()
    p = enc.init_brnn(rng, 2, 2, F64)
    E = rng.normal(size=(1, 3, 2))
    padded = np.concatenate([E, rng.normal(size=(1, 2, 2))], axis=1)
    short = enc.brnn_encode(Tensor(E), np.ones((1, 3), bool), p).encoding.data
    long_ = enc.brnn_encode(Tensor(padded), np.array([[True] * 3 + [False] * 2]), p).encoding.data
    assert np.allclose(short, long_, atol=1e-12)


def test_scnn(rng):
    p = enc.init_scnn(rng, 2, (4, 4, 3, 3), (5, 5, 5, 3), F64)
    a = enc.scnn_encode(Tensor(rng.normal(size=(2, 6, 2))), p).encoding
    b = enc.scnn_encode(Tensor(rng.normal(size=(2, 11, 2))), p).encoding
    assert a.shape == b.shape == (2, 3)
    with pytest.raises(SequenceTooShort):
        enc.scnn_encode(Tensor(np.zeros((1, 4, 2))), p)


def test_scnn_zero_input_single_layer(rng):
    p = enc.init_scnn(rng, 2, (4,), (5,), F64)
    p["layers"][0]["b"].data[:] = rng.normal(size=4)
    out = enc.scnn_encode(Tensor(np.zeros((1, 7, 2))), p).encoding.data[0]
    assert np.allclose(out, 1 / (1 + np.exp(-p["layers"][0]["b"].data)))


def test_scnn_gradient(rng):
    p = enc.init_scnn(rng, 2, (3, 3, 2, 2), (5, 5, 5, 3), F64)
    names = [(i, k) for i in range(4) for k in ("W", "b")]
    E = rng.normal(size=(2, 6, 2))

    def f(t):
        layers = [{"W": t[1 + 2 * i], "b": t[2 + 2 * i]} for i in range(4)]
        return sum(enc.scnn_encode(t[0], {"layers": layers}).encoding)

    point = [E] + [p["layers"][i][k].data for i, k in names]
    assert grad_check(f, point) < 1e-4


def test_mca(rng):
    H, G = 2, 3
    p = enc.init_mca(rng, H, G, filters=4, kernels=(3, 5), conv_attention_dim=3, attention_dim=3, dtype=F64)
    E = Tensor(rng.normal(size=(2, 6, H)))
    ctx = Tensor(rng.normal(size=(2, G)))
    mask = np.array([[True] * 6, [True] * 4 + [False] * 2])
    out, reports = enc.mca_encode(E, ctx, mask, p)
    assert out.encoding.shape == (2, 4 + 4 + H) and len(reports) == 3
    for r in reports:
        assert np.allclose(r.sum(axis=1), 1, atol=1e-6) and np.all(r[~mask] == 0)
    for ch in p["channels"]:
        ch["W"].data[:] = 0
        ch["b"].data[:] = 0
    out, _ = enc.mca_encode(E, ctx, mask, p)
    ca = enc.contextual_attention_encode(E, ctx, mask, p["tokens"])
    assert not out.encoding.data[:, :8].any()
    assert np.array_equal(out.encoding.data[:, 8:], ca.encoding.data)
    with pytest.raises(SequenceTooShort):
        enc.mca_encode(Tensor(np.zeros((1, 4, H))), ctx[:1], np.ones((1, 4), bool), p)

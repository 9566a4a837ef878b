import numpy as np
import pytest
import scipy.sparse as sp

from paccmann.errors import InputError, MalformedCsv, NoConvergence, SingularSystem
from paccmann.netprop import (
    NetworkPropagation, PpiNetwork, PropagationConfig, init_weights, load_ppi, load_targets,
    normalize_adjacency, pool_panels, propagate, propagate_direct, select_top_genes,
)


def test_init_weights():
    net = PpiNetwork(["g1", "g2"], [("g1", "g2", 1.0)])
    w, missing = init_weights({"g1"}, net)
    assert w.tolist() == [1.0, 1e-5] and missing == []
    w, _ = init_weights(set(), net)
    assert w.tolist() == [1e-5, 1e-5]
    w, missing = init_weights({"gX"}, net)
    assert w.tolist() == [1e-5, 1e-5] and missing == ["gX"]


def test_normalize_adjacency():
    assert np.array_equal(normalize_adjacency(np.array([[0, 1], [1, 0]])), [[0, 1], [1, 0]])
    tri = normalize_adjacency(np.ones((3, 3)) - np.eye(3))
    assert np.allclose(tri[~np.eye(3, dtype=bool)], 0.5)
    iso = normalize_adjacency(np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]]))
    assert not iso[2].any() and not iso[:, 2].any()
    sparse = normalize_adjacency(sp.csr_matrix(np.ones((3, 3)) - np.eye(3)))
    assert sp.issparse(sparse) and np.allclose(sparse.toarray(), tri)


def test_propagate_degenerate_cases():
    A = normalize_adjacency(np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=float))
    W0 = np.array([1.0, 1e-5, 0.3])
    W, iters = propagate(W0, A, PropagationConfig(alpha=0.0))
    assert np.array_equal(W, W0) and iters == 1
    W, _ = propagate(W0, A, PropagationConfig(alpha=0.7, tol=1e-12))
    assert W[2] == pytest.approx(0.3 * 0.3)


def test_two_node_oracle():
    A = normalize_adjacency(np.array([[0, 1], [1, 0]], dtype=float))
    W0 = np.array([1.0, 1e-5])
    W, _ = propagate(W0, A, PropagationConfig(alpha=0.7, tol=1e-8))
    assert np.max(np.abs(W - propagate_direct(W0, A, 0.7))) < 1e-6


def test_direct_small_cases():
    assert propagate_direct(np.array([0.4]), np.zeros((1, 1)), 0.7) == pytest.approx([0.3 * 0.4])
    W0 = np.array([0.2, 0.5])
    assert np.allclose(propagate_direct(W0, np.array([[0, 1], [1, 0]]), 0.0), W0)
    with pytest.raises(SingularSystem):
        propagate_direct(W0, np.array([[0.0, 1.0], [1.0, 0.0]]), 1.0)


def test_random_graph_agreement(rng):
    n = 20
    A = np.triu(rng.random((n, n)) < 0.2, 1) * rng.uniform(0.1, 1.0, (n, n))
    A = normalize_adjacency(A + A.T)
    W0 = rng.random(n)
    W, _ = propagate(W0, A, PropagationConfig(alpha=0.7, tol=1e-9))
    assert np.max(np.abs(W - propagate_direct(W0, A, 0.7))) < 1e-6


def test_no_convergence_at_alpha_one():
    A = normalize_adjacency(np.array([[0, 1], [1, 0]], dtype=float))
    with pytest.raises(NoConvergence):
        propagate(np.array([1.0, 0.0]), A, PropagationConfig(alpha=1.0, max_iters=50))


def test_select_and_pool():
    assert select_top_genes([0.5, 0.3, 0.1], ["g1", "g2", "g3"], k=2) == ["g1", "g2"]
    assert select_top_genes([0.5, 0.5], ["b", "a"], k=1) == ["a"]
    assert select_top_genes([0.1, 0.2, 0.3], ["a", "b", "c"]) == ["c", "b", "a"]
    assert pool_panels([["a", "b"], ["b", "c"]]) == ["a", "b", "c"]
    assert pool_panels([]) == []


def test_pooled_panel_bound(rng):
    genes = [f"g{i}" for i in range(5000)]
    panels = [select_top_genes(rng.random(len(genes)), genes, 20) for _ in range(208)]
    assert len(pool_panels(panels)) <= 208 * 20


def test_network_validation():
    with pytest.raises(InputError):
        PpiNetwork(["a", "b"], [("a", "b", 1.5)])
    with pytest.raises(InputError):
        PpiNetwork(["a"], [("a", "a", 0.5)])
    with pytest.raises(InputError):
        PpiNetwork(["a", "b"], [("a", "b", 0.5), ("b", "a", 0.4)])


def test_estimator(rng):
    net = PpiNetwork(list("abcde"), [("a", "b", 0.9), ("b", "c", 0.8), ("c", "d", 0.7), ("d", "e", 0.6)])
    prop = NetworkPropagation(k=2).fit(net)
    W = prop.transform([{"a"}, {"e", "zz"}])
    assert W.shape == (2, 5)
    assert prop.missing_targets_ == [[], ["zz"]]
    assert prop.select([{"a"}, {"e"}]) == ["a", "b", "d", "e"]
    assert prop.get_params()["alpha"] == 0.7


def test_loaders(tmp_path):
    ppi = tmp_path / "ppi.tsv"
    ppi.write_text("gene_a\tgene_b\tconfidence\nA\tB\t0.9\nB\tC\t0.4\n")
    net = load_ppi(ppi)
    assert net.nodes == ["A", "B", "C"] and net.adjacency.nnz == 4
    ppi.write_text("gene_a\tgene_b\tconfidence\nA\tB\tx\n")
    with pytest.raises(MalformedCsv, match="ppi.tsv:2"):
        load_ppi(ppi)
    targets = tmp_path / "t.csv"
    targets.write_text("drug_id,targets\nD1,A;B\nD2,\n")
    assert load_targets(targets) == {"D1": ["A", "B"], "D2": []}

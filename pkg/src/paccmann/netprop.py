"""Gene selection by diffusing drug-target weights over a protein interaction network.

Weights are row vectors over the network nodes and follow

    W_{t+1} = alpha * W_t @ A' + (1 - alpha) * W_0,   A' = D^-1/2 A D^-1/2

until successive iterates differ by less than ``tol`` in the max norm.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import InputError, MalformedCsv, NoConvergence, SingularSystem

logger = logging.getLogger(__name__)


@dataclass
class PpiNetwork:
    """Undirected confidence-weighted interaction graph; node order is file order."""

    nodes: list[str]
    edges: list[tuple[str, str, float]] = field(default_factory=list)

    def __post_init__(self):
        self.index = {g: i for i, g in enumerate(self.nodes)}
        if len(self.index) != len(self.nodes):
            raise InputError("duplicate node symbols in network")
        n = len(self.nodes)
        rows, cols, vals = [], [], []
        seen = set()
        for a, b, w in self.edges:
            if not 0.0 < w <= 1.0:
                raise InputError(f"confidence {w} for {a}-{b} outside (0, 1]")
            if a == b:
                raise InputError(f"self-interaction {a}-{a}")
            key = frozenset((a, b))
            if key in seen:
                raise InputError(f"duplicate edge {a}-{b}")
            seen.add(key)
            i, j = self.index[a], self.index[b]
            rows += [i, j]
            cols += [j, i]
            vals += [w, w]
        self.adjacency = sp.csr_matrix((vals, (rows, cols)), shape=(n, n), dtype=np.float64)

    def __len__(self):
        return len(self.nodes)

    @classmethod
    def from_adjacency(cls, adjacency, nodes=None) -> "PpiNetwork":
        A = np.asarray(adjacency.toarray() if sp.issparse(adjacency) else adjacency, dtype=float)
        n = A.shape[0]
        if A.shape != (n, n) or not np.allclose(A, A.T):
            raise InputError("adjacency must be square and symmetric")
        if np.any(np.diag(A) != 0):
            raise InputError("adjacency must have a zero diagonal")
        nodes = list(nodes) if nodes is not None else [f"g{i}" for i in range(n)]
        ii, jj = np.nonzero(np.triu(A, 1))
        return cls(nodes, [(nodes[i], nodes[j], float(A[i, j])) for i, j in zip(ii, jj)])


@dataclass
class PropagationConfig:
    alpha: float = 0.7
    tol: float = 1e-6
    max_iters: int = 10000
    target_weight: float = 1.0
    epsilon_weight: float = 1e-5

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InputError(f"alpha={self.alpha} outside [0, 1]")
        if self.tol <= 0:
            raise InputError("tol must be positive")
        if self.max_iters < 1:
            raise InputError("max_iters must be positive")


def init_weights(targets: Iterable[str], net: PpiNetwork, cfg: PropagationConfig | None = None):
    """Initial weights: ``target_weight`` on targets, ``epsilon_weight`` elsewhere.

    Returns ``(weights, missing)`` where ``missing`` lists targets absent from
    the network, sorted.
    """
    cfg = cfg or PropagationConfig()
    if len(net) == 0:
        raise InputError("empty network")
    w = np.full(len(net), cfg.epsilon_weight)
    missing = []
    for gene in set(targets):
        if gene in net.index:
            w[net.index[gene]] = cfg.target_weight
        else:
            missing.append(gene)
    return w, sorted(missing)


def normalize_adjacency(adjacency):
    """Symmetric normalization D^-1/2 A D^-1/2 with zero rows for isolated nodes.

    Accepts a dense array, a sparse matrix or a :class:`PpiNetwork`; returns the
    same kind (sparse CSR for networks).
    """
    if isinstance(adjacency, PpiNetwork):
        adjacency = adjacency.adjacency
    sparse = sp.issparse(adjacency)
    A = sp.csr_matrix(adjacency, dtype=np.float64) if sparse else np.asarray(adjacency, dtype=np.float64)
    deg = np.asarray(A.sum(axis=1)).ravel()
    if np.any(deg < 0):
        raise InputError("adjacency has negative entries")
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    if sparse:
        D = sp.diags(inv_sqrt)
        return sp.csr_matrix(D @ A @ D)
    return inv_sqrt[:, None] * A * inv_sqrt[None, :]


def propagate(W0, Aprime, cfg: PropagationConfig | None = None):
    """Iterate the diffusion to convergence; returns ``(W, iterations)``."""
    cfg = cfg or PropagationConfig()
    W0 = np.asarray(W0, dtype=np.float64)
    if W0.ndim != 1 or Aprime.shape != (W0.size, W0.size):
        raise InputError(f"weights of length {W0.size} do not match matrix {Aprime.shape}")
    # A' is symmetric, so W @ A' == A' @ W for a row vector W
    restart = (1.0 - cfg.alpha) * W0
    W = W0
    for it in range(1, cfg.max_iters + 1):
        W_next = cfg.alpha * (Aprime @ W) + restart
        if np.max(np.abs(W_next - W)) < cfg.tol:
            return W_next, it
        W = W_next
    raise NoConvergence(f"no convergence within {cfg.max_iters} iterations (alpha={cfg.alpha})")


def propagate_direct(W0, Aprime, alpha: float):
    """Closed-form fixed point ``(1 - alpha) W0 (I - alpha A')^-1`` by dense solve."""
    W0 = np.asarray(W0, dtype=np.float64)
    A = Aprime.toarray() if sp.issparse(Aprime) else np.asarray(Aprime, dtype=np.float64)
    M = np.eye(W0.size) - alpha * A
    try:
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > 1e12:
            raise np.linalg.LinAlgError("ill-conditioned")
        return np.linalg.solve(M.T, (1.0 - alpha) * W0)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"I - alpha*A' is singular for alpha={alpha}") from exc


def select_top_genes(weights, genes: Sequence[str], k: int = 20) -> list[str]:
    """The ``k`` highest-weighted genes; ties go to the lexicographically smaller symbol."""
    if k < 1:
        raise InputError("k must be >= 1")
    order = sorted(range(len(genes)), key=lambda i: (-weights[i], genes[i]))
    return [genes[i] for i in order[:k]]


def pool_panels(panels: Iterable[Iterable[str]]) -> list[str]:
    return sorted(set().union(*map(set, panels)))


class NetworkPropagation(TransformerMixin, BaseEstimator):
    """Fit on a :class:`PpiNetwork`; transform drug-target sets into diffused weights.

    ``transform`` returns an ``(n_drugs, n_nodes)`` weight matrix and
    ``select`` the pooled top-``k`` gene panel.
    """

    def __init__(self, alpha=0.7, tol=1e-6, max_iters=10000, k=20):
        self.alpha = alpha
        self.tol = tol
        self.max_iters = max_iters
        self.k = k

    def fit(self, X: PpiNetwork, y=None):
        self.config_ = PropagationConfig(self.alpha, self.tol, self.max_iters)
        self.network_ = X
        self.normalized_ = normalize_adjacency(X)
        return self

    def transform(self, X):
        check_is_fitted(self, "normalized_")
        out = np.zeros((len(X), len(self.network_)))
        self.missing_targets_ = []
        self.iterations_ = []
        for row, targets in enumerate(X):
            w0, missing = init_weights(targets, self.network_, self.config_)
            self.missing_targets_.append(missing)
            out[row], iters = propagate(w0, self.normalized_, self.config_)
            self.iterations_.append(iters)
        return out

    def select(self, X) -> list[str]:
        weights = self.transform(X)
        genes = self.network_.nodes
        return pool_panels(select_top_genes(w, genes, self.k) for w in weights)


def load_ppi(path) -> PpiNetwork:
    """Read ``gene_a<TAB>gene_b<TAB>confidence``; node order follows first appearance."""
    path = Path(path)
    nodes: dict[str, None] = {}
    edges = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header != ["gene_a", "gene_b", "confidence"]:
            raise MalformedCsv(f"{path}:1: expected header gene_a, gene_b, confidence")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise MalformedCsv(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            a, b, conf = row
            try:
                w = float(conf)
            except ValueError:
                raise MalformedCsv(f"{path}:{lineno}: confidence {conf!r} is not a number") from None
            if not 0.0 < w <= 1.0:
                raise MalformedCsv(f"{path}:{lineno}: confidence {w} outside (0, 1]")
            nodes.setdefault(a)
            nodes.setdefault(b)
            edges.append((a, b, w))
    try:
        return PpiNetwork(list(nodes), edges)
    except InputError as exc:
        raise MalformedCsv(f"{path}: {exc}") from None


def load_targets(path) -> dict[str, list[str]]:
    """Read ``drug_id,targets`` with semicolon-separated gene symbols."""
    path = Path(path)
    out: dict[str, list[str]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"drug_id", "targets"} <= set(reader.fieldnames):
            raise MalformedCsv(f"{path}:1: expected columns drug_id, targets")
        for lineno, row in enumerate(reader, start=2):
            drug = (row["drug_id"] or "").strip()
            if not drug:
                raise MalformedCsv(f"{path}:{lineno}: empty drug_id")
            if drug in out:
                raise MalformedCsv(f"{path}:{lineno}: duplicate drug_id {drug!r}")
            out[drug] = [t.strip() for t in (row["targets"] or "").split(";") if t.strip()]
    return out

from pathlib import Path

import numpy as np
import pytest

from paccmann.dataio import build_pairs
from paccmann.model import flatten_params
from paccmann.synthetic import make_synthetic, with_true_targets
from paccmann.tensor import Tensor, mse_loss, mul

DATA = Path(__file__).parent / "data"


def load_corpus():
    rows = []
    for line in (DATA / "drug_corpus.smi").read_text(encoding="utf-8").splitlines():
        if line.strip():
            rows.append(line.split("\t")[0])
    return rows


def substitute(tree, leaves):
    """Copy of a parameter tree with its Tensors replaced, in flatten order."""
    if isinstance(tree, Tensor):
        return next(leaves)
    if isinstance(tree, dict):
        return {k: substitute(v, leaves) for k, v in tree.items()}
    return [substitute(v, leaves) for v in tree]


def model_objective(model, feats, targets):
    """``f(list of Tensors) -> scalar`` over every model parameter, for grad_check.

    The embedding PAD row is a constant zero rather than a parameter, so the
    objective pins it to zero and both gradients agree it is inert.
    """
    original = model.modules_
    names = [name for name, _ in flatten_params(original)]

    def f(tensors):
        tensors = list(tensors)
        if "embedding" in names:
            k = names.index("embedding")
            keep = np.ones(tensors[k].shape)
            keep[0] = 0
            tensors[k] = mul(tensors[k], keep)
        model.modules_ = substitute(original, iter(tensors))
        try:
            pred, _ = model.forward(feats, training=True)
            return mse_loss(pred, targets)
        finally:
            model.modules_ = original

    point = [t.data for _, t in flatten_params(original)]
    return f, point


@pytest.fixture(scope="session")
def corpus():
    return load_corpus()


@pytest.fixture(scope="session")
def tiny_data():
    return make_synthetic(n_drugs=12, n_cells=10, seed=3)


@pytest.fixture(scope="session")
def tiny_pairs(tiny_data):
    records = with_true_targets(tiny_data)
    return build_pairs(records, tiny_data.drugs, tiny_data.expressions, tiny_data.panel, augment_n=2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

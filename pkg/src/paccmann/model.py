"""The end-to-end drug-sensitivity regressor.

A gene attention encoder and one compound encoder feed a dense head
(dense → batch norm → activation → dropout per layer) ending in a sigmoid,
so predictions are normalized IC50 values in (0, 1).
"""

from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from . import encoders as enc
from .errors import InvalidConfig, ShapeMismatch
from .metrics import rmse
from .smiles import TokenDictionary, build_dictionary, encode_tokens, tokenize
from .tensor import (
    Adam,
    BatchNormState,
    LrSchedule,
    Tensor,
    activation,
    batch_norm,
    concat,
    dense,
    dropout,
    glorot,
    mse_loss,
    ones,
    reshape,
    sigmoid,
    zeros,
)
from .validation import check_batch_size, check_gene_width, check_pairs, check_strict_split

logger = logging.getLogger(__name__)

ENCODER_KINDS = ("DNN_FP", "BRNN", "SCNN", "SA", "CA", "MCA")
TOKEN_ATTENTION_KINDS = ("SA", "CA", "MCA")
PREDICT_BATCH = 1024


def flatten_params(tree, prefix=""):
    """``(dotted_name, Tensor)`` pairs in deterministic insertion order."""
    if isinstance(tree, Tensor):
        return [(prefix, tree)]
    items = tree.items() if isinstance(tree, dict) else enumerate(tree)
    out = []
    for key, sub in items:
        out.extend(flatten_params(sub, f"{prefix}.{key}" if prefix else str(key)))
    return out


class PaccMann(RegressorMixin, BaseEstimator):
    """Multi-modal IC50 regressor over (compound, gene expression) pairs.

    ``X`` for ``fit``/``predict`` is a :class:`~paccmann.dataio.PairedDataset`
    (anything exposing ``drug_ids``, ``cell_ids``, ``smiles``,
    ``fingerprints``, ``genes`` and ``panel``). ``y`` defaults to
    ``X.targets``. Passing ``validation`` enables best-checkpoint selection
    and early stopping, and enforces that no drug or cell line is shared
    with the training pairs.
    """

    def __init__(
        self,
        encoder="SA",
        dense_layers=(512, 256, 128, 64, 32, 16),
        dropout=0.5,
        embedding_dim=16,
        attention_dim=256,
        conv_attention_dim=64,
        scnn_filters=(32, 32, 16, 16),
        scnn_kernels=(5, 5, 5, 3),
        mca_filters=16,
        mca_kernels=(5, 11),
        hidden_activation="relu",
        fingerprint_bits=512,
        max_len=None,
        batch_size=2048,
        max_steps=5000,
        learning_rate=1e-3,
        lr_decay=0.96,
        lr_decay_every=5000,
        eval_every=10,
        patience=None,
        dtype="float32",
        seed=0,
    ):
        self.encoder = encoder
        self.dense_layers = dense_layers
        self.dropout = dropout
        self.embedding_dim = embedding_dim
        self.attention_dim = attention_dim
        self.conv_attention_dim = conv_attention_dim
        self.scnn_filters = scnn_filters
        self.scnn_kernels = scnn_kernels
        self.mca_filters = mca_filters
        self.mca_kernels = mca_kernels
        self.hidden_activation = hidden_activation
        self.fingerprint_bits = fingerprint_bits
        self.max_len = max_len
        self.batch_size = batch_size
        self.max_steps = max_steps
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.lr_decay_every = lr_decay_every
        self.eval_every = eval_every
        self.patience = patience
        self.dtype = dtype
        self.seed = seed

    # construction

    def _check_config(self):
        if self.encoder not in ENCODER_KINDS:
            raise InvalidConfig(f"encoder must be one of {ENCODER_KINDS}, got {self.encoder!r}")
        layers = list(self.dense_layers)
        if not layers or any(u < 1 for u in layers) or any(a <= b for a, b in zip(layers, layers[1:])):
            raise InvalidConfig(f"dense_layers must be non-empty and strictly decreasing: {layers}")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidConfig("dropout must be in [0, 1)")
        if self.dtype not in ("float32", "float64"):
            raise InvalidConfig("dtype must be float32 or float64")
        if self.hidden_activation not in ("relu", "sigmoid", "tanh"):
            raise InvalidConfig(f"unknown hidden activation {self.hidden_activation!r}")
        for name in ("embedding_dim", "attention_dim", "conv_attention_dim", "mca_filters", "fingerprint_bits"):
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be positive")
        if self.max_steps < 0 or self.eval_every < 1:
            raise InvalidConfig("max_steps must be >= 0 and eval_every >= 1")

    def build(self, dictionary: TokenDictionary, panel, max_len: int):
        """Initialize all parameters for the given dictionary, gene panel and length."""
        self._check_config()
        dt = np.dtype(self.dtype)
        self.dictionary_ = dictionary
        self.gene_panel_ = list(panel)
        self.max_len_ = int(max_len)
        if not self.gene_panel_:
            raise InvalidConfig("empty gene panel")
        n_genes = len(self.gene_panel_)
        H = self.embedding_dim
        init_rng = np.random.default_rng(np.random.SeedSequence(self.seed).spawn(1)[0])
        modules = {"gae": enc.init_gene_attention(init_rng, n_genes, dt)}
        kind = self.encoder
        if kind != "DNN_FP":
            modules["embedding"] = enc.init_embedding(init_rng, len(dictionary), H, dt)
        if kind == "DNN_FP":
            width = self.fingerprint_bits
        elif kind == "SA":
            modules["compound"] = enc.init_attention(init_rng, H, self.attention_dim, None, dt)
            width = H
        elif kind == "CA":
            modules["compound"] = enc.init_attention(init_rng, H, self.attention_dim, n_genes, dt)
            width = H
        elif kind == "BRNN":
            modules["compound"] = enc.init_brnn(init_rng, H, H, dt)
            width = 4 * H
        elif kind == "SCNN":
            modules["compound"] = enc.init_scnn(init_rng, H, self.scnn_filters, self.scnn_kernels, dt)
            width = self.scnn_filters[-1]
        else:
            modules["compound"] = enc.init_mca(
                init_rng, H, n_genes, self.mca_filters, self.mca_kernels,
                self.conv_attention_dim, self.attention_dim, dt,
            )
            width = self.mca_filters * len(self.mca_kernels) + H
        self.compound_width_ = width
        head, states = [], []
        fan_in = width + n_genes
        for units in self.dense_layers:
            head.append({
                "W": glorot(init_rng, (fan_in, units), fan_in, units, dt),
                "gamma": ones((units,), dt),
                "beta": zeros((units,), dt),
            })
            states.append(BatchNormState.create(units, dt))
            fan_in = units
        modules["head"] = head
        modules["out"] = {"W": glorot(init_rng, (fan_in, 1), fan_in, 1, dt), "b": zeros((1,), dt)}
        self.modules_ = modules
        self.bn_states_ = states
        self.params_ = dict(flatten_params(modules))
        return self

    @property
    def input_width_(self):
        return self.compound_width_ + len(self.gene_panel_)

    # featurization

    def _featurize(self, X):
        genes, fps, _ = check_pairs(X)
        check_gene_width(genes, len(self.gene_panel_))
        dt = np.dtype(self.dtype)
        feats = {"genes": genes.astype(dt)}
        if self.encoder == "DNN_FP":
            if fps.shape[1] != self.fingerprint_bits:
                raise ShapeMismatch(f"fingerprints have {fps.shape[1]} bits, expected {self.fingerprint_bits}")
            feats["fps"] = fps.astype(dt)
        else:
            cache = {}
            idx = np.zeros((len(X.smiles), self.max_len_), dtype=np.int64)
            mask = np.zeros((len(X.smiles), self.max_len_), dtype=bool)
            for row, s in enumerate(X.smiles):
                if s not in cache:
                    cache[s] = encode_tokens(tokenize(s), self.dictionary_, self.max_len_)
                idx[row], mask[row] = cache[s]
            feats["idx"], feats["mask"] = idx, mask
        return feats

    @staticmethod
    def _take(feats, index):
        return {k: v[index] for k, v in feats.items()}

    # computation

    def forward(self, feats, training=False, rng=None):
        """Predictions (B,) as a Tensor plus attention reports for one featurized batch."""
        m = self.modules_
        genes = Tensor(feats["genes"])
        gae = enc.gene_attention_encode(genes, m["gae"])
        reports = {"genes": gae.attention, "tokens": None}
        kind = self.encoder
        if kind == "DNN_FP":
            compound = Tensor(feats["fps"])
        else:
            mask = feats["mask"]
            E = enc.embed(feats["idx"], mask, m["embedding"])
            if kind == "SA":
                out = enc.self_attention_encode(E, mask, m["compound"])
            elif kind == "CA":
                out = enc.contextual_attention_encode(E, genes, mask, m["compound"])
            elif kind == "BRNN":
                out = enc.brnn_encode(E, mask, m["compound"])
            elif kind == "SCNN":
                out = enc.scnn_encode(E, m["compound"])
            else:
                out, channels = enc.mca_encode(E, genes, mask, m["compound"])
                reports["channels"] = channels
            compound = out.encoding
            reports["tokens"] = out.attention
        h = concat([compound, gae.encoding], axis=-1)
        for layer, state in zip(m["head"], self.bn_states_):
            h = dense(h, layer["W"])
            h = batch_norm(h, layer["gamma"], layer["beta"], state, training)
            h = activation(self.hidden_activation, h)
            h = dropout(h, self.dropout, training, rng)
        out = sigmoid(dense(h, m["out"]["W"], m["out"]["b"]))
        return reshape(out, (out.shape[0],)), reports

    # training

    def fit(self, X, y=None, validation=None):
        self._check_config()
        _, _, targets = check_pairs(X, require_targets=y is None)
        y = np.asarray(targets if y is None else y, dtype=np.float64)
        if y.shape != (len(X.smiles),):
            raise ShapeMismatch(f"{y.shape[0]} targets for {len(X.smiles)} pairs")
        if validation is not None:
            check_pairs(validation, require_targets=True)
            check_strict_split(X, validation, names=("training", "validation"))
        if self.encoder == "DNN_FP":
            dictionary, max_len = TokenDictionary(), self.max_len or 1
        else:
            dictionary = build_dictionary(sorted(set(X.smiles)))
            if self.max_len is not None:
                max_len = self.max_len
            else:
                corpus = set(X.smiles) | (set(validation.smiles) if validation is not None else set())
                max_len = max(len(tokenize(s)) for s in corpus)
        self.build(dictionary, X.panel, max_len)
        self.ic50_bounds_ = getattr(X, "ic50_bounds", None)
        self._train(self._featurize(X), y, validation)
        return self

    def _train(self, feats, y, validation):
        dt = np.dtype(self.dtype)
        n = y.size
        self.log_ = []
        self.best_val_rmse_ = None
        self.n_steps_ = 0
        if self.max_steps == 0:
            return
        bs = check_batch_size(self.batch_size, n)
        _, batch_ss, drop_ss = np.random.SeedSequence(self.seed).spawn(3)
        batch_rng, drop_rng = np.random.default_rng(batch_ss), np.random.default_rng(drop_ss)
        schedule = LrSchedule(self.learning_rate, self.lr_decay, self.lr_decay_every)
        opt = Adam(list(self.params_.values()))
        val_feats = self._featurize(validation) if validation is not None else None
        val_y = np.asarray(validation.targets, dtype=np.float64) if validation is not None else None
        best, stale = math.inf, 0
        snapshot = None
        order, pos = batch_rng.permutation(n), 0
        for step in range(self.max_steps):
            if pos + bs > n:
                order, pos = batch_rng.permutation(n), 0
            index = order[pos:pos + bs]
            pos += bs
            lr = schedule(step)
            opt.zero_grad()
            pred, _ = self.forward(self._take(feats, index), training=True, rng=drop_rng)
            loss = mse_loss(pred, y[index].astype(dt))
            loss.backward()
            opt.step(lr)
            row = {"step": step + 1, "train_mse": float(loss.data), "val_rmse": None, "lr": lr}
            self.n_steps_ = step + 1
            last = step + 1 == self.max_steps
            if val_feats is not None and ((step + 1) % self.eval_every == 0 or last):
                score = rmse(self._predict_feats(val_feats), val_y)
                row["val_rmse"] = score
                if score < best:
                    best, stale = score, 0
                    snapshot = self.state_arrays()
                else:
                    stale += 1
            self.log_.append(row)
            if self.patience is not None and stale >= self.patience:
                logger.info("early stop at step %d (best validation RMSE %.5f)", step + 1, best)
                break
        if snapshot is not None:
            self.load_state_arrays(snapshot)
            self.best_val_rmse_ = best

    # inference

    def _predict_feats(self, feats):
        n = feats["genes"].shape[0]
        out = []
        for start in range(0, n, PREDICT_BATCH):
            index = slice(start, start + PREDICT_BATCH)
            pred, _ = self.forward(self._take(feats, index), training=False)
            out.append(pred.data)
        return np.concatenate(out) if out else np.zeros(0)

    def predict(self, X):
        check_is_fitted(self, "params_")
        return self._predict_feats(self._featurize(X))

    def attention(self, X):
        """Gene weights (N, |G|) and, for attention encoders, token weights (N, T)."""
        check_is_fitted(self, "params_")
        feats = self._featurize(X)
        _, reports = self.forward(feats, training=False)
        return reports

    # state

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Copies of every parameter and batch-norm statistic, by name."""
        out = {name: t.data.copy() for name, t in self.params_.items()}
        for i, st in enumerate(self.bn_states_):
            out[f"head.{i}.running_mean"] = st.running_mean.copy()
            out[f"head.{i}.running_var"] = st.running_var.copy()
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]):
        for name, t in self.params_.items():
            if arrays[name].shape != t.data.shape:
                raise ShapeMismatch(f"{name}: stored {arrays[name].shape} vs model {t.data.shape}")
            t.data[...] = arrays[name]
        for i, st in enumerate(self.bn_states_):
            st.running_mean = arrays[f"head.{i}.running_mean"].astype(st.running_mean.dtype)
            st.running_var = arrays[f"head.{i}.running_var"].astype(st.running_var.dtype)

    def save(self, path):
        from .checkpoint import save_checkpoint

        save_checkpoint(self, path)

    @classmethod
    def load(cls, path) -> "PaccMann":
        from .checkpoint import load_checkpoint

        return load_checkpoint(path)


def build_model(config: dict, dictionary: TokenDictionary, panel, max_len: int, seed: Optional[int] = None):
    """Construct and initialize a :class:`PaccMann` from a plain config dict."""
    params = dict(config)
    if seed is not None:
        params["seed"] = seed
    return PaccMann(**params).build(dictionary, panel, max_len)

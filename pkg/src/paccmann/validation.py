"""Input checks shared by the estimator and the command line."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array, check_consistent_length

from .errors import BatchTooSmall, InputError, LeakageDetected, ShapeMismatch


def check_pairs(X, require_targets=False):
    """Validate a paired dataset and return ``(genes, fingerprints, targets)`` arrays."""
    for attr in ("drug_ids", "cell_ids", "smiles", "genes", "fingerprints"):
        if not hasattr(X, attr):
            raise InputError(f"paired dataset lacks {attr!r}")
    if len(X.smiles) == 0:
        raise InputError("empty paired dataset")
    try:
        genes = check_array(X.genes, dtype=np.float64, ensure_all_finite=True)
        fps = check_array(X.fingerprints, dtype=np.float64)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    check_consistent_length(X.drug_ids, X.cell_ids, X.smiles, genes, fps)
    targets = getattr(X, "targets", None)
    if require_targets:
        if targets is None:
            raise InputError("targets are required")
        targets = np.asarray(targets, dtype=np.float64)
        check_consistent_length(genes, targets)
        if not np.all(np.isfinite(targets)):
            raise InputError("non-finite targets")
    return genes, fps, targets


def check_gene_width(genes, expected):
    if genes.shape[1] != expected:
        raise ShapeMismatch(f"gene context has {genes.shape[1]} genes, model expects {expected}")


def check_strict_split(*datasets, names=None):
    """Raise :class:`LeakageDetected` if any two datasets share a drug or a cell id."""
    names = names or [f"set{i}" for i in range(len(datasets))]
    for i in range(len(datasets)):
        for j in range(i + 1, len(datasets)):
            a, b = datasets[i], datasets[j]
            shared_d = set(a.drug_ids) & set(b.drug_ids)
            shared_c = set(a.cell_ids) & set(b.cell_ids)
            if shared_d or shared_c:
                detail = sorted(shared_d)[:3] + sorted(shared_c)[:3]
                raise LeakageDetected(
                    f"{names[i]} and {names[j]} share {len(shared_d)} drug(s) and "
                    f"{len(shared_c)} cell line(s), e.g. {', '.join(map(str, detail))}"
                )


def check_batch_size(batch_size, n_samples):
    size = min(batch_size, n_samples)
    if size < 2:
        raise BatchTooSmall(f"batch size {size} < 2 (batch normalization)")
    return size

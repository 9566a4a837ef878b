"""Tabular ingestion, IC50 normalization, strict drug/cell splits and pair building."""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateRange,
    DuplicateCellId,
    MalformedCsv,
    NonNumericValue,
    PanelGeneMissing,
    TooFewEntities,
    UnresolvedId,
    ValidationError,
)
from .smiles import augment, morgan_fingerprint, parse

logger = logging.getLogger(__name__)

N_FOLDS = 25
TEST_FRACTION = 0.10
FINGERPRINT_BITS = 512


@dataclass
class ExpressionProfile:
    cell_id: str
    values: dict[str, float]


@dataclass
class DrugRecord:
    drug_id: str
    smiles: str
    targets: list[str] = field(default_factory=list)


@dataclass
class SensitivityRecord:
    drug_id: str
    cell_id: str
    ic50_raw: float
    ic50_norm: Optional[float] = None


def _reader(path, delimiter=","):
    path = Path(path)
    fh = path.open(newline="", encoding="utf-8")
    return fh, csv.reader(fh, delimiter=delimiter)


def _float(text, path, lineno, what):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise NonNumericValue(f"{path}:{lineno}: {what} {text!r} is not a number") from None
    if not math.isfinite(value):
        raise NonNumericValue(f"{path}:{lineno}: {what} {text!r} is not finite")
    return value


def load_expression(path) -> list[ExpressionProfile]:
    """Wide matrix: header ``cell_id,<gene>,...``, one cell line per row."""
    fh, reader = _reader(path)
    with fh:
        header = next(reader, None)
        if not header or header[0] != "cell_id" or len(header) < 2:
            raise MalformedCsv(f"{path}:1: header must start with cell_id followed by genes")
        genes = header[1:]
        if len(set(genes)) != len(genes):
            raise MalformedCsv(f"{path}:1: duplicate gene columns")
        profiles, seen = [], set()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedCsv(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            cell = row[0].strip()
            if not cell:
                raise MalformedCsv(f"{path}:{lineno}: empty cell_id")
            if cell in seen:
                raise DuplicateCellId(f"{path}:{lineno}: duplicate cell_id {cell!r}")
            seen.add(cell)
            values = {g: _float(v, path, lineno, f"expression of {g}") for g, v in zip(genes, row[1:])}
            profiles.append(ExpressionProfile(cell, values))
    return profiles


def load_drugs(path) -> list[DrugRecord]:
    """``drug_id,smiles,targets`` with semicolon-separated targets; SMILES must parse."""
    fh, _ = _reader(path)
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"drug_id", "smiles"} <= set(reader.fieldnames):
            raise MalformedCsv(f"{path}:1: expected columns drug_id, smiles, targets")
        drugs, seen = [], set()
        for lineno, row in enumerate(reader, start=2):
            drug = (row["drug_id"] or "").strip()
            if not drug or drug in seen:
                raise MalformedCsv(f"{path}:{lineno}: empty or duplicate drug_id {drug!r}")
            seen.add(drug)
            smiles = (row["smiles"] or "").strip()
            try:
                parse(smiles)
            except Exception as exc:
                raise MalformedCsv(f"{path}:{lineno}: bad SMILES for {drug}: {exc}") from None
            targets = [t.strip() for t in (row.get("targets") or "").split(";") if t.strip()]
            drugs.append(DrugRecord(drug, smiles, targets))
    return drugs


def load_sensitivity(path) -> list[SensitivityRecord]:
    """``drug_id,cell_id,ic50`` rows."""
    fh, _ = _reader(path)
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"drug_id", "cell_id", "ic50"} <= set(reader.fieldnames):
            raise MalformedCsv(f"{path}:1: expected columns drug_id, cell_id, ic50")
        out = []
        for lineno, row in enumerate(reader, start=2):
            drug, cell = (row["drug_id"] or "").strip(), (row["cell_id"] or "").strip()
            if not drug or not cell:
                raise MalformedCsv(f"{path}:{lineno}: empty drug_id or cell_id")
            out.append(SensitivityRecord(drug, cell, _float(row["ic50"], path, lineno, "ic50")))
    return out


def normalize_ic50(records: Sequence[SensitivityRecord]):
    """Min-max scale raw IC50 over all records; returns ``(records, (min, max))``."""
    raws = np.array([r.ic50_raw for r in records], dtype=np.float64)
    if raws.size < 2 or raws.min() == raws.max():
        raise DegenerateRange("IC50 normalization needs at least two distinct values")
    lo, hi = float(raws.min()), float(raws.max())
    for r in records:
        r.ic50_norm = (r.ic50_raw - lo) / (hi - lo)
    return records, (lo, hi)


def apply_bounds(raw, bounds):
    """Normalize with stored bounds, clamping to [0, 1]."""
    lo, hi = bounds
    return np.clip((np.asarray(raw, dtype=np.float64) - lo) / (hi - lo), 0.0, 1.0)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass
class Fold:
    val_drugs: list[str]
    val_cells: list[str]


@dataclass
class SplitPlan:
    """Held-out test entities plus 25 validation blocks partitioning the rest."""

    test_drugs: list[str]
    test_cells: list[str]
    folds: list[Fold]
    seed: int
    drugs: list[str] = field(default_factory=list)
    cells: list[str] = field(default_factory=list)

    def pool(self):
        test_d, test_c = set(self.test_drugs), set(self.test_cells)
        return [d for d in self.drugs if d not in test_d], [c for c in self.cells if c not in test_c]

    def subsets(self, fold: int = 0) -> dict[str, tuple[set, set]]:
        """Drug and cell sets for ``train``, ``val`` and ``test`` under one fold."""
        f = self.folds[fold]
        pool_d, pool_c = self.pool()
        vd, vc = set(f.val_drugs), set(f.val_cells)
        return {
            "train": ({d for d in pool_d if d not in vd}, {c for c in pool_c if c not in vc}),
            "val": (vd, vc),
            "test": (set(self.test_drugs), set(self.test_cells)),
        }

    def validate(self):
        """Raise :class:`ValidationError` unless test and fold sets are strict."""
        for kind, everything, test, blocks in (
            ("drug", self.drugs, self.test_drugs, [f.val_drugs for f in self.folds]),
            ("cell", self.cells, self.test_cells, [f.val_cells for f in self.folds]),
        ):
            pool = set(everything) - set(test)
            if not set(test) <= set(everything):
                raise ValidationError(f"test {kind}s not in the entity list")
            union = set()
            for i, block in enumerate(blocks):
                b = set(block)
                if b & set(test):
                    raise ValidationError(f"fold {i} validation {kind}s overlap the test set")
                if b & union:
                    raise ValidationError(f"fold {i} validation {kind}s overlap another fold")
                union |= b
            if union != pool:
                raise ValidationError(f"fold validation {kind}s do not partition the pool")

    def to_json(self) -> str:
        return json.dumps({
            "seed": self.seed,
            "drugs": self.drugs,
            "cells": self.cells,
            "test_drugs": self.test_drugs,
            "test_cells": self.test_cells,
            "folds": [{"val_drugs": f.val_drugs, "val_cells": f.val_cells} for f in self.folds],
        }, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SplitPlan":
        doc = json.loads(text)
        folds = [Fold(list(f["val_drugs"]), list(f["val_cells"])) for f in doc["folds"]]
        return cls(list(doc["test_drugs"]), list(doc["test_cells"]), folds, int(doc["seed"]),
                   list(doc["drugs"]), list(doc["cells"]))


def make_split(drug_ids: Iterable[str], cell_ids: Iterable[str], seed=0,
               n_folds: int = N_FOLDS, test_fraction: float = TEST_FRACTION) -> SplitPlan:
    """Hold out 10% of drugs and of cells, then partition the rest into fold blocks.

    Counts are rounded half-up; fold blocks differ in size by at most one.
    """
    drugs, cells = sorted(set(drug_ids)), sorted(set(cell_ids))
    rng = np.random.default_rng(seed)
    picked = {}
    for kind, ids in (("drug", drugs), ("cell", cells)):
        n_test = _round_half_up(test_fraction * len(ids))
        if len(ids) - n_test < n_folds:
            raise TooFewEntities(
                f"{len(ids)} {kind}s leave {len(ids) - n_test} after the test hold-out; "
                f"need at least {n_folds} for non-empty folds"
            )
        order = [ids[i] for i in rng.permutation(len(ids))]
        test, pool = order[:n_test], order[n_test:]
        picked[kind] = (sorted(test), [sorted(b.tolist()) for b in np.array_split(np.array(pool, dtype=object), n_folds)])
    folds = [Fold(d, c) for d, c in zip(picked["drug"][1], picked["cell"][1])]
    return SplitPlan(picked["drug"][0], picked["cell"][0], folds, int(seed), drugs, cells)


@dataclass
class PairedDataset:
    """Materialized (SMILES variant, fingerprint, gene context, target) tuples."""

    drug_ids: np.ndarray
    cell_ids: np.ndarray
    smiles: list[str]
    fingerprints: np.ndarray
    genes: np.ndarray
    targets: np.ndarray
    panel: list[str]
    dropped: int = 0
    shortfall: int = 0
    ic50_bounds: Optional[tuple[float, float]] = None

    def __len__(self):
        return len(self.smiles)

    def subset(self, index) -> "PairedDataset":
        index = np.asarray(index)
        return PairedDataset(
            self.drug_ids[index], self.cell_ids[index], [self.smiles[i] for i in index],
            self.fingerprints[index], self.genes[index], self.targets[index], self.panel,
            ic50_bounds=self.ic50_bounds,
        )


@dataclass
class PairCount:
    tuples: int
    records: int
    dropped: int
    shortfall: int


def _selected(records, subset):
    drugs, cells = subset if subset is not None else (None, None)
    kept, dropped = [], 0
    for r in records:
        d_in = drugs is None or r.drug_id in drugs
        c_in = cells is None or r.cell_id in cells
        if d_in and c_in:
            kept.append(r)
        elif d_in or c_in:
            dropped += 1
    return kept, dropped


def _resolve(records, drugs_by_id, cells_by_id):
    missing = sorted({r.drug_id for r in records if r.drug_id not in drugs_by_id}
                     | {r.cell_id for r in records if r.cell_id not in cells_by_id})
    if missing:
        raise UnresolvedId(f"unknown drug/cell ids: {', '.join(missing[:10])}")


def _variants(drugs, augment_n, seed):
    return {d.drug_id: augment(d.smiles, augment_n, seed) for d in drugs}


def count_pairs(sensitivity, drugs, subset=None, augment_n: int = 32, seed=0,
                variants: Optional[dict] = None) -> PairCount:
    """Tuple count :func:`build_pairs` would produce, without materializing tuples."""
    drugs_by_id = {d.drug_id: d for d in drugs}
    kept, dropped = _selected(sensitivity, subset)
    missing = sorted({r.drug_id for r in kept if r.drug_id not in drugs_by_id})
    if missing:
        raise UnresolvedId(f"unknown drug ids: {', '.join(missing[:10])}")
    used = {r.drug_id for r in kept}
    if variants is None:
        variants = _variants([drugs_by_id[d] for d in sorted(used)], augment_n, seed)
    per_drug = {d: len(variants[d]) for d in used}
    counts = Counter(r.drug_id for r in kept)
    tuples = sum(per_drug[d] * n for d, n in counts.items())
    shortfall = len(kept) * augment_n - tuples
    return PairCount(tuples, len(kept), dropped, shortfall)


def build_pairs(sensitivity, drugs, expressions, panel: Sequence[str], subset=None,
                augment_n: int = 32, seed=0, ic50_bounds=None,
                variants: Optional[dict] = None) -> PairedDataset:
    """Expand every record whose drug and cell both lie in ``subset`` into augmented tuples.

    ``subset`` is a ``(drug_ids, cell_ids)`` pair of sets, or None for all
    records. Records with exactly one side in the subset are dropped and
    counted. Every record must carry a normalized IC50.
    """
    drugs_by_id = {d.drug_id: d for d in drugs}
    cells_by_id = {e.cell_id: e for e in expressions}
    kept, dropped = _selected(sensitivity, subset)
    _resolve(kept, drugs_by_id, cells_by_id)
    panel = list(panel)
    if expressions:
        absent = [g for g in panel if g not in expressions[0].values]
        if absent:
            raise PanelGeneMissing(f"panel genes missing from expression data: {', '.join(absent[:10])}")
    used = sorted({r.drug_id for r in kept})
    if variants is None:
        variants = _variants([drugs_by_id[d] for d in used], augment_n, seed)
    fps = {d: morgan_fingerprint(parse(drugs_by_id[d].smiles)) for d in used}
    contexts = {
        c: np.array([cells_by_id[c].values[g] for g in panel], dtype=np.float64)
        for c in sorted({r.cell_id for r in kept})
    }
    drug_col, cell_col, smiles, fp_rows, gene_rows, targets = [], [], [], [], [], []
    shortfall = 0
    for r in kept:
        if r.ic50_norm is None:
            raise ValueError("sensitivity records must be normalized before pairing")
        forms = variants[r.drug_id]
        shortfall += augment_n - len(forms)
        for s in forms:
            drug_col.append(r.drug_id)
            cell_col.append(r.cell_id)
            smiles.append(s)
            fp_rows.append(fps[r.drug_id])
            gene_rows.append(contexts[r.cell_id])
            targets.append(r.ic50_norm)
    if shortfall:
        logger.info("augmentation produced %d fewer tuples than requested", shortfall)
    n_genes = len(panel)
    return PairedDataset(
        np.array(drug_col, dtype=object),
        np.array(cell_col, dtype=object),
        smiles,
        np.array(fp_rows, dtype=np.uint8) if fp_rows else np.zeros((0, FINGERPRINT_BITS), np.uint8),
        np.array(gene_rows, dtype=np.float64).reshape(len(smiles), n_genes),
        np.array(targets, dtype=np.float64),
        panel,
        dropped=dropped,
        shortfall=shortfall,
        ic50_bounds=ic50_bounds,
    )

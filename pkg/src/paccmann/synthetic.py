"""Synthetic fixtures with a known sensitivity function.

Every drug is the same 12-atom tree with varying elements, so all SMILES
have 18 tokens and differ only in which atoms appear. Sensitivity is
``sigmoid(1.5 * n_chlorine - 2 * gene_3 + noise)``.

The three substituent sites have fixed, mutually distinct neighbors and
the varying chain atoms sit at least two bonds from any site. A chlorine
at a given site therefore always sets the same fingerprint bits, so the
chlorine count is recoverable from a binary fingerprint as well as from
the SMILES tokens.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import DrugRecord, ExpressionProfile, SensitivityRecord

CHAIN_ATOMS = ("C", "N", "O")
SUBSTITUENTS = ("C", "O")


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def drug_smiles(chain, subs) -> str:
    """``chain`` is the four variable atoms, ``subs`` the three site substituents."""
    v1, v2, v3, v4 = chain
    s1, s2, s3 = subs
    return f"{v1}{v2}OC({s1})CC({s2})CNC({s3})C{v3}{v4}"


def chlorine_count(smiles: str) -> int:
    return smiles.count("Cl")


@dataclass
class SyntheticData:
    drugs: list[DrugRecord]
    expressions: list[ExpressionProfile]
    sensitivity: list[SensitivityRecord]
    panel: list[str]
    ppi_edges: list[tuple[str, str, float]]

    @property
    def drug_ids(self):
        return [d.drug_id for d in self.drugs]

    @property
    def cell_ids(self):
        return [e.cell_id for e in self.expressions]

    def write(self, directory) -> dict[str, Path]:
        """Write the four input tables; returns their paths by role."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {
            "expression": directory / "expression.csv",
            "drugs": directory / "drugs.csv",
            "sensitivity": directory / "sensitivity.csv",
            "ppi": directory / "ppi.tsv",
        }
        genes = list(self.expressions[0].values)
        with paths["expression"].open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cell_id", *genes])
            for e in self.expressions:
                w.writerow([e.cell_id, *(repr(e.values[g]) for g in genes)])
        with paths["drugs"].open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["drug_id", "smiles", "targets"])
            for d in self.drugs:
                w.writerow([d.drug_id, d.smiles, ";".join(d.targets)])
        with paths["sensitivity"].open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["drug_id", "cell_id", "ic50"])
            for r in self.sensitivity:
                w.writerow([r.drug_id, r.cell_id, repr(r.ic50_raw)])
        with paths["ppi"].open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(["gene_a", "gene_b", "confidence"])
            for a, b, c in self.ppi_edges:
                w.writerow([a, b, repr(c)])
        return paths


def make_drugs(n_drugs: int, rng) -> list[DrugRecord]:
    """Distinct drugs with chlorine counts spread evenly over 0..3."""
    seen, out = set(), []
    while len(out) < n_drugs:
        n_cl = len(out) % 4
        chain = tuple(rng.choice(CHAIN_ATOMS, size=4))
        subs = ["Cl"] * n_cl + list(rng.choice(SUBSTITUENTS, size=3 - n_cl))
        subs = [subs[i] for i in rng.permutation(3)]
        s = drug_smiles(chain, subs)
        if s in seen:
            continue
        seen.add(s)
        out.append(DrugRecord(f"D{len(out):03d}", s, []))
    return out


def make_synthetic(n_drugs=40, n_cells=60, n_genes=8, n_extra_genes=4, noise=0.02, seed=0) -> SyntheticData:
    """The learnability fixture: every drug screened on every cell line."""
    rng = np.random.default_rng(seed)
    panel = [f"G{i}" for i in range(n_genes)]
    extra = [f"X{i}" for i in range(n_extra_genes)]
    drugs = make_drugs(n_drugs, rng)
    for d in drugs:
        d.targets = sorted(rng.choice(panel, size=2, replace=False).tolist())
    expr = rng.standard_normal((n_cells, n_genes + n_extra_genes))
    expressions = [
        ExpressionProfile(f"C{i:03d}", {g: float(v) for g, v in zip(panel + extra, expr[i])})
        for i in range(n_cells)
    ]
    sensitivity = []
    for d in drugs:
        n_cl = chlorine_count(d.smiles)
        for e in expressions:
            z = 1.5 * n_cl - 2.0 * e.values[panel[3]] + noise * rng.standard_normal()
            sensitivity.append(SensitivityRecord(d.drug_id, e.cell_id, float(_sigmoid(z))))
    genes = panel + extra
    edges = [(genes[i], genes[i + 1], 0.9) for i in range(len(genes) - 1)]
    edges += [(genes[0], genes[-1], 0.5), (genes[2], genes[7 % len(genes)], 0.7)]
    return SyntheticData(drugs, expressions, sensitivity, panel, edges)


def with_true_targets(data: SyntheticData) -> list[SensitivityRecord]:
    """Records whose normalized target is the generating sigmoid itself."""
    return [SensitivityRecord(r.drug_id, r.cell_id, r.ic50_raw, r.ic50_raw) for r in data.sensitivity]


def holdout_subsets(drug_ids, cell_ids, fraction=0.2, seed=0):
    """A strict train/validation partition: disjoint drugs and disjoint cell lines."""
    rng = np.random.default_rng(seed)
    drugs = np.array(sorted(drug_ids), dtype=object)[rng.permutation(len(drug_ids))]
    cells = np.array(sorted(cell_ids), dtype=object)[rng.permutation(len(cell_ids))]
    nd = max(1, round(fraction * len(drugs)))
    nc = max(1, round(fraction * len(cells)))
    return (
        (set(drugs[nd:]), set(cells[nc:])),
        (set(drugs[:nd]), set(cells[:nc])),
    )


def screen_scale_drugs(n_drugs=208, seed=0) -> list[DrugRecord]:
    """Drugs for the full-screen counting fixture; each has at least 32 distinct SMILES."""
    return make_drugs(n_drugs, np.random.default_rng(seed))


def full_screen(drug_ids, cell_ids) -> list[SensitivityRecord]:
    return [SensitivityRecord(d, c, 0.5, 0.5) for d in drug_ids for c in cell_ids]

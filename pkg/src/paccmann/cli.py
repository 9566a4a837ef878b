"""Command-line entry point: ``paccmann <command> --config run.json [flags]``.

Exit codes: 0 success, 2 input error, 3 leakage or validation error, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np
import scipy
import sklearn
from threadpoolctl import threadpool_limits

from . import __version__
from .checkpoint import load_checkpoint
from .dataio import (
    SplitPlan,
    SensitivityRecord,
    apply_bounds,
    build_pairs,
    load_drugs,
    load_expression,
    load_sensitivity,
    make_split,
    normalize_ic50,
)
from .errors import InputError, PaccMannError, ValidationError
from .metrics import evaluate
from .model import TOKEN_ATTENTION_KINDS, PaccMann
from .netprop import NetworkPropagation, load_ppi, pool_panels, select_top_genes
from .smiles import tokenize
from .validation import check_strict_split

logger = logging.getLogger("paccmann")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_VALIDATION = 0, 1, 2, 3
DEFAULTS = {
    "seed": 0,
    "fold": 0,
    "augment_n": 32,
    "alpha": 0.7,
    "top_k": 20,
    "model": {},
}
PATH_KEYS = ("expression", "drugs", "sensitivity", "ppi", "panel", "split")


class RunConfig(dict):
    """Merged JSON config plus flag overrides; relative paths resolve against the config file."""

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        cfg = json.loads(json.dumps(DEFAULTS))
        base = Path.cwd()
        if args.config:
            path = Path(args.config)
            try:
                doc = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(doc, dict):
                raise InputError(f"{path}: config must be a JSON object")
            cfg.update(doc)
            base = path.parent
        for key in PATH_KEYS:
            if cfg.get(key):
                cfg[key] = str((base / cfg[key]).resolve())
        if args.seed is not None:
            cfg["seed"] = args.seed
        cfg["model"] = dict(cfg.get("model") or {})
        if args.encoder is not None:
            cfg["model"]["encoder"] = args.encoder
        if args.steps is not None:
            cfg["model"]["max_steps"] = args.steps
        return cls(cfg)

    def require(self, *keys):
        for key in keys:
            if not self.get(key):
                raise InputError(f"config is missing {key!r}")
            if key in PATH_KEYS and not Path(self[key]).is_file():
                raise InputError(f"{self[key]}: no such file")
        return [self[k] for k in keys]

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self, sort_keys=True).encode("utf-8")).hexdigest()


def _write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def write_manifest(out: Path, cfg: RunConfig, command: str):
    doc = {
        "command": command,
        "config_sha256": cfg.digest(),
        "seed": cfg["seed"],
        "versions": {
            "paccmann": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "scikit-learn": sklearn.__version__,
        },
    }
    (out / "run_manifest.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def read_panel(path) -> list[str]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "gene" not in reader.fieldnames:
            raise InputError(f"{path}:1: expected a 'gene' column")
        genes = [row["gene"].strip() for row in reader if row["gene"].strip()]
    if not genes:
        raise InputError(f"{path}: empty gene panel")
    return genes


def read_split(path):
    """A fold plan from ``split``, or an explicit ``train/val/test`` set listing."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if "train_drugs" in doc:
        return {k: (set(doc[f"{k}_drugs"]), set(doc[f"{k}_cells"])) for k in ("train", "val", "test")}
    try:
        return SplitPlan.from_json(json.dumps(doc))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: malformed split plan ({exc})") from None


# commands

def cmd_propagate(cfg: RunConfig, out: Path):
    ppi_path, drugs_path = cfg.require("ppi", "drugs")
    network = load_ppi(ppi_path)
    drugs = load_drugs(drugs_path)
    prop = NetworkPropagation(alpha=cfg["alpha"], k=cfg["top_k"]).fit(network)
    weights = prop.transform([d.targets for d in drugs])
    for d, missing in zip(drugs, prop.missing_targets_):
        for gene in missing:
            print(f"warning: {d.drug_id}: target {gene} is not in the network", file=sys.stderr)
    panel = pool_panels(select_top_genes(w, network.nodes, cfg["top_k"]) for w in weights)
    if not panel:
        raise InputError(f"{drugs_path}: no drugs to propagate")
    _write_csv(out / "panel.csv", ["gene"], [[g] for g in panel])
    for d, w in zip(drugs, weights):
        _write_csv(out / "weights" / f"{d.drug_id}.csv", ["gene", "weight"],
                   [[g, repr(float(v))] for g, v in zip(network.nodes, w)])
    return panel


def cmd_split(cfg: RunConfig, out: Path):
    drugs_path, expr_path = cfg.require("drugs", "expression")
    plan = make_split([d.drug_id for d in load_drugs(drugs_path)],
                      [e.cell_id for e in load_expression(expr_path)], seed=cfg["seed"])
    plan.validate()
    (out / "split.json").write_text(plan.to_json() + "\n", encoding="utf-8")
    return plan


def _load_tables(cfg):
    expr_path, drugs_path, sens_path = cfg.require("expression", "drugs", "sensitivity")
    return load_expression(expr_path), load_drugs(drugs_path), load_sensitivity(sens_path)


def _panel(cfg, out):
    if cfg.get("panel"):
        cfg.require("panel")
        return read_panel(cfg["panel"])
    return cmd_propagate(cfg, out)


def _subsets(cfg, out, drugs, expressions):
    if cfg.get("split"):
        cfg.require("split")
        plan = read_split(cfg["split"])
    else:
        plan = make_split([d.drug_id for d in drugs], [e.cell_id for e in expressions], seed=cfg["seed"])
    if isinstance(plan, dict):
        (out / "split.json").write_text(json.dumps(
            {f"{k}_{kind}": sorted(v[i]) for k, v in plan.items() for i, kind in enumerate(("drugs", "cells"))},
            indent=1, sort_keys=True) + "\n", encoding="utf-8")
        return plan
    plan.validate()
    (out / "split.json").write_text(plan.to_json() + "\n", encoding="utf-8")
    if not 0 <= cfg["fold"] < len(plan.folds):
        raise InputError(f"fold {cfg['fold']} out of range")
    return plan.subsets(cfg["fold"])


class _Ids:
    def __init__(self, drugs, cells):
        self.drug_ids, self.cell_ids = sorted(drugs), sorted(cells)


def cmd_train(cfg: RunConfig, out: Path):
    expressions, drugs, sensitivity = _load_tables(cfg)
    panel = _panel(cfg, out)
    subsets = _subsets(cfg, out, drugs, expressions)
    names = ("train", "val", "test")
    check_strict_split(*(_Ids(*subsets[k]) for k in names), names=names)
    sensitivity, bounds = normalize_ic50(sensitivity)
    kw = dict(augment_n=cfg["augment_n"], seed=cfg["seed"], ic50_bounds=bounds)
    train = build_pairs(sensitivity, drugs, expressions, panel, subset=subsets["train"], **kw)
    val = build_pairs(sensitivity, drugs, expressions, panel, subset=subsets["val"], **kw)
    if len(train) == 0:
        raise InputError("no training pairs after the split")
    params = dict(cfg["model"])
    params["seed"] = cfg["seed"]
    model = PaccMann(**params)
    model.fit(train, validation=val if len(val) else None)
    model.save(out / "model.ckpt")
    _write_csv(out / "train_log.csv", ["step", "train_mse", "val_rmse", "lr"],
               [[r["step"], _fmt(r["train_mse"]), _fmt(r["val_rmse"]), _fmt(r["lr"])] for r in model.log_])
    return model


def read_pairs(path):
    """``drug_id,cell_id`` rows with an optional raw ``ic50`` column."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"drug_id", "cell_id"} <= set(reader.fieldnames):
            raise InputError(f"{path}:1: expected columns drug_id, cell_id")
        has_ic50 = "ic50" in reader.fieldnames
        pairs = []
        for lineno, row in enumerate(reader, start=2):
            raw = None
            if has_ic50 and (row["ic50"] or "").strip():
                try:
                    raw = float(row["ic50"])
                except ValueError:
                    raise InputError(f"{path}:{lineno}: ic50 {row['ic50']!r} is not a number") from None
            pairs.append((row["drug_id"].strip(), row["cell_id"].strip(), raw))
    if not pairs:
        raise InputError(f"{path}: no pairs")
    return pairs


def _resolve_pairs(cfg, out, pair_path=None, subset="test"):
    if pair_path:
        return read_pairs(pair_path)
    _, _, sens_path = cfg.require("expression", "drugs", "sensitivity")
    split_path = cfg["split"] if cfg.get("split") else out / "split.json"
    if not Path(split_path).is_file():
        raise InputError(f"{split_path}: no split plan; pass --pairs or run train first")
    plan = read_split(split_path)
    drug_set, cell_set = plan[subset] if isinstance(plan, dict) else plan.subsets(cfg["fold"])[subset]
    pairs = [(r.drug_id, r.cell_id, r.ic50_raw) for r in load_sensitivity(sens_path)
             if r.drug_id in drug_set and r.cell_id in cell_set]
    if not pairs:
        raise InputError(f"no sensitivity records in the {subset} subset")
    return pairs


def _pairs_dataset(cfg, model, pairs):
    expr_path, drugs_path = cfg.require("expression", "drugs")
    expressions, drugs = load_expression(expr_path), load_drugs(drugs_path)
    bounds = model.ic50_bounds_ or (0.0, 1.0)
    records = [
        SensitivityRecord(d, c, raw if raw is not None else np.nan,
                          float(apply_bounds(raw, bounds)) if raw is not None else np.nan)
        for d, c, raw in pairs
    ]
    # canonical SMILES only: one tuple per pair, in input order
    return build_pairs(records, drugs, expressions, model.gene_panel_, augment_n=1,
                       variants={d.drug_id: [d.smiles] for d in drugs})


def _load_model(args, out):
    path = Path(args.checkpoint) if args.checkpoint else out / "model.ckpt"
    if not path.is_file():
        raise InputError(f"{path}: no such checkpoint")
    return load_checkpoint(path)


def cmd_predict(cfg, out, args):
    model = _load_model(args, out)
    data = _pairs_dataset(cfg, model, _resolve_pairs(cfg, out, args.pairs))
    pred = model.predict(data)
    _write_csv(out / "predictions.csv", ["drug_id", "cell_id", "ic50_pred"],
               [[d, c, repr(float(p))] for d, c, p in zip(data.drug_ids, data.cell_ids, pred)])
    return pred


def cmd_evaluate(cfg, out, args):
    model = _load_model(args, out)
    data = _pairs_dataset(cfg, model, _resolve_pairs(cfg, out, args.pairs))
    if np.isnan(data.targets).any():
        raise InputError("evaluation pairs need an ic50 value on every row")
    pred = model.predict(data)
    metrics = evaluate(pred, data.targets)
    _write_csv(out / "predictions.csv", ["drug_id", "cell_id", "ic50_true", "ic50_pred"],
               [[d, c, repr(float(t)), repr(float(p))]
                for d, c, t, p in zip(data.drug_ids, data.cell_ids, data.targets, pred)])
    print(f"rmse={round(metrics.rmse, 6)} pearson={round(metrics.pearson, 6)} n={metrics.n}")
    return metrics


def cmd_attention(cfg, out, args):
    model = _load_model(args, out)
    has_tokens = model.encoder in TOKEN_ATTENTION_KINDS
    if args.tokens and not has_tokens:
        raise InputError(f"{model.encoder} models produce no token attention")
    if not args.drug or not args.cell:
        raise InputError("attention needs --drug and --cell")
    data = _pairs_dataset(cfg, model, [(args.drug, args.cell, None)])
    reports = model.attention(data)
    genes = reports["genes"][0]
    order = sorted(range(len(genes)), key=lambda i: (-genes[i], model.gene_panel_[i]))
    _write_csv(out / "gene_attention.csv", ["gene", "weight"],
               [[model.gene_panel_[i], repr(float(genes[i]))] for i in order])
    if has_tokens:
        tokens = tokenize(data.smiles[0])
        weights = reports["tokens"][0]
        _write_csv(out / "token_attention.csv", ["position", "token", "weight"],
                   [[i, tok, repr(float(weights[i]))] for i, tok in enumerate(tokens)])
    return reports


# entry point

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--encoder", help="override the model encoder kind")
    common.add_argument("--steps", type=int, help="override the training step budget")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="paccmann", description="Drug sensitivity prediction pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("propagate", parents=[common], help="gene panel from network propagation")
    sub.add_parser("split", parents=[common], help="strict test and cross-validation split")
    sub.add_parser("train", parents=[common], help="train a model on one fold")
    for name in ("predict", "evaluate"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--checkpoint")
        p.add_argument("--pairs", help="CSV of drug_id,cell_id[,ic50]; default is the test subset")
    p = sub.add_parser("attention", parents=[common], help="export attention weights for one pair")
    p.add_argument("--checkpoint")
    p.add_argument("--drug")
    p.add_argument("--cell")
    p.add_argument("--tokens", action="store_true", help="require token attention")
    return parser


def run(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = RunConfig.from_args(args)
    if args.command == "propagate":
        cmd_propagate(cfg, out)
    elif args.command == "split":
        cmd_split(cfg, out)
    elif args.command == "train":
        cmd_train(cfg, out)
    elif args.command == "predict":
        cmd_predict(cfg, out, args)
    elif args.command == "evaluate":
        cmd_evaluate(cfg, out, args)
    else:
        cmd_attention(cfg, out, args)
    write_manifest(out, cfg, args.command)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = os.environ.get("PACCMANN_THREADS")
    try:
        limit = threadpool_limits(limits=int(threads)) if threads else nullcontext()
    except ValueError:
        print(f"error: PACCMANN_THREADS={threads!r} is not an integer", file=sys.stderr)
        return EXIT_INPUT
    with limit:
        try:
            return run(args)
        except ValidationError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        except (PaccMannError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        except Exception as exc:  # noqa: BLE001
            logger.exception("internal error")
            print(f"internal error: {exc}", file=sys.stderr)
            return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

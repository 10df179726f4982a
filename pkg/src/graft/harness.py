"""Cross-validated experiment protocols and result tables.

Every (seed, fold) run trains on the training folds, fits the calibrator on
the same training scores, and scores the held-out fold. Tables report
``mean (fold_std, seed_std)``:

* fold_std: std across seeds of the fold-averaged metric
* seed_std: std across folds of the seed-averaged metric
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from graft.calibration import fit_cox_calibrator, fit_isotonic
from graft.data import NOISE_DISTS, SurvivalDataset, inject_noise, load_csv, stratified_kfold
from graft.errors import ConfigurationError
from graft.metrics import c_index, censoring_km, ibs, make_eval_grid
from graft.trainer import TrainConfig, predict_scores, train

log = logging.getLogger(__name__)

MODEL_LABELS = {
    "full": "GRAFT",
    "no_stg": "No STG",
    "linear_only": "Linear Only",
    "full+sigmoid": "Sigmoid",
    "full+reinforce": "REINFORCE",
}
CALIBRATIONS = ("cox", "isotonic")


@dataclass
class ExperimentConfig:
    data: str | None = None
    time_col: str = "time"
    event_col: str = "event"
    dataset_name: str | None = None
    folds: int = 3
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    train: dict = field(default_factory=dict)
    noise_multipliers: list[int] = field(default_factory=lambda: [0, 3, 5, 7, 10])
    noise_dist: str = "gaussian"
    variants: list[str] = field(default_factory=lambda: ["full", "no_stg", "linear_only"])
    gate_variants: list[str] = field(default_factory=lambda: ["stg"])
    calibrations: list[str] = field(default_factory=lambda: ["cox"])
    out: str | None = None

    def __post_init__(self):
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")
        if self.noise_dist not in NOISE_DISTS:
            raise ConfigurationError(f"noise_dist must be one of {NOISE_DISTS}")
        if any(k < 0 for k in self.noise_multipliers):
            raise ConfigurationError("noise multipliers must be non-negative")
        bad = set(self.calibrations) - set(CALIBRATIONS)
        if bad:
            raise ConfigurationError(f"unknown calibration methods {sorted(bad)}")
        TrainConfig.from_dict(self.train)  # validate overrides early

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown experiment options: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    def name(self) -> str:
        if self.dataset_name:
            return self.dataset_name
        return Path(self.data).stem if self.data else "dataset"


def derive_seed(*parts) -> int:
    """Stable 32-bit seed from the given parts (independent of PYTHONHASHSEED)."""
    key = "|".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:4], "little")


def model_key(variant: str, gate_variant: str = "stg") -> str:
    if variant == "full" and gate_variant != "stg":
        return f"full+{gate_variant}"
    return variant


@dataclass
class ResultsTable:
    cells: list[dict] = field(default_factory=list)

    def add(self, dataset, model, noise_k, seed, fold, metric, value) -> None:
        self.cells.append({
            "dataset": dataset, "model": model, "noise_k": int(noise_k),
            "seed": int(seed), "fold": int(fold), "metric": metric, "value": float(value),
        })

    def rows(self) -> list[dict]:
        groups: dict[tuple, dict] = {}
        for c in self.cells:
            key = (c["dataset"], c["model"], c["noise_k"], c["metric"])
            groups.setdefault(key, {})[(c["seed"], c["fold"])] = c["value"]
        out = []
        for (dataset, model, k, metric), vals in groups.items():
            seeds = sorted({s for s, _ in vals})
            folds = sorted({f for _, f in vals})
            V = np.array([[vals[(s, f)] for f in folds] for s in seeds])
            out.append({
                "dataset": dataset, "model": model, "noise_k": k, "metric": metric,
                "mean": float(V.mean()),
                "fold_std": float(V.mean(axis=1).std()),
                "seed_std": float(V.mean(axis=0).std()),
                "n_runs": int(V.size),
            })
        return out

    def lookup(self, model, noise_k, metric, dataset=None) -> dict:
        for r in self.rows():
            if r["model"] == model and r["noise_k"] == noise_k and r["metric"] == metric:
                if dataset is None or r["dataset"] == dataset:
                    return r
        raise KeyError((model, noise_k, metric))

    def to_csv(self, path) -> None:
        cols = ["dataset", "model", "noise_k", "metric", "mean", "fold_std", "seed_std", "n_runs"]
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r in self.rows():
                w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in cols])

    def to_json(self, path, config: dict | None = None) -> None:
        doc = {"config": config or {}, "rows": self.rows(), "cells": self.cells}
        Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")

    def render(self) -> str:
        lines = [f"{'dataset':<12} {'model':<12} {'noise':>5}  {'metric':<13} mean (fold-std, seed-std)"]
        for r in self.rows():
            label = MODEL_LABELS.get(r["model"], r["model"])
            lines.append(
                f"{r['dataset']:<12} {label:<12} {str(r['noise_k']) + 'x':>5}  {r['metric']:<13} "
                f"{r['mean']:.4f} ({r['fold_std']:.4f}, {r['seed_std']:.4f})"
            )
        return "\n".join(lines)

    def write(self, out, config: dict | None = None) -> tuple[Path, Path]:
        stem = Path(out)
        stem = stem.with_suffix("") if stem.suffix in (".csv", ".json") else stem
        csv_path, json_path = stem.with_suffix(".csv"), stem.with_suffix(".json")
        self.to_csv(csv_path)
        self.to_json(json_path, config)
        return csv_path, json_path


def evaluate_fold(train_ds: SurvivalDataset, test_ds: SurvivalDataset, cfg: TrainConfig,
                  calibrations=("cox",)) -> dict[str, float]:
    """Train, calibrate on the training scores, and score the test fold."""
    model = train(train_ds, cfg)
    s_train = predict_scores(model, train_ds.features)
    s_test = predict_scores(model, test_ds.features)
    out = {"c_index": c_index(s_test, test_ds.times, test_ds.events)}

    G = censoring_km(train_ds.times, train_ds.events)
    grid = make_eval_grid(test_ds.times, G).times
    for method in calibrations:
        if method == "cox":
            cal = fit_cox_calibrator(s_train, train_ds.times, train_ds.events)
            name = "ibs"
        else:
            cal = fit_isotonic(s_train, train_ds.times, train_ds.events,
                               time_range=(test_ds.times.min(), test_ds.times.max()))
            name = "ibs_isotonic"
        surv = cal.survival(s_test, grid)
        out[name] = ibs(surv, test_ds.times, test_ds.events, grid, train_ds.times, train_ds.events)
    return out


def _sweep(cfg: ExperimentConfig, ds: SurvivalDataset, models, multipliers, dist, table=None) -> ResultsTable:
    table = ResultsTable() if table is None else table
    name = cfg.name()
    for k in multipliers:
        for seed in cfg.seeds:
            data = ds if k == 0 else inject_noise(ds, k, dist, derive_seed("noise", seed, k, dist))
            split = stratified_kfold(data, cfg.folds, seed)
            for fold in range(cfg.folds):
                tr_idx, te_idx = split.train_test(fold)
                for variant, gate_variant in models:
                    key = model_key(variant, gate_variant)
                    overrides = {**cfg.train, "variant": variant, "gate_variant": gate_variant,
                                 "seed": derive_seed(seed, fold, key, k)}
                    tcfg = TrainConfig.from_dict(overrides)
                    log.info("%s k=%d seed=%d fold=%d model=%s", name, k, seed, fold, key)
                    res = evaluate_fold(data.subset(tr_idx), data.subset(te_idx), tcfg, cfg.calibrations)
                    for metric, value in res.items():
                        table.add(name, key, k, seed, fold, metric, value)
    return table


def load_dataset(cfg: ExperimentConfig) -> SurvivalDataset:
    if cfg.data is None:
        raise ConfigurationError("no dataset given (--data)")
    return load_csv(cfg.data, cfg.time_col, cfg.event_col)


def run_benchmark(cfg: ExperimentConfig, dataset: SurvivalDataset | None = None) -> ResultsTable:
    """Full GRAFT (STG gates), no injected noise."""
    ds = load_dataset(cfg) if dataset is None else dataset
    return _sweep(cfg, ds, [("full", "stg")], [0], cfg.noise_dist)


def run_ablation(cfg: ExperimentConfig, dataset: SurvivalDataset | None = None) -> ResultsTable:
    """Architecture variants crossed with Gaussian noise multipliers."""
    ds = load_dataset(cfg) if dataset is None else dataset
    return _sweep(cfg, ds, [(v, "stg") for v in cfg.variants], cfg.noise_multipliers, "gaussian")


def run_noise_sweep(cfg: ExperimentConfig, dataset: SurvivalDataset | None = None) -> ResultsTable:
    """Full GRAFT with each requested gate mechanism under Student-t (df=2) noise."""
    ds = load_dataset(cfg) if dataset is None else dataset
    return _sweep(cfg, ds, [("full", g) for g in cfg.gate_variants], cfg.noise_multipliers, "student_t_df2")

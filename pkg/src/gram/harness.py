"""One-class evaluation: splits, the reconstruction baseline, and experiments.

Protocol: one class is designated normal; a fraction of it forms the training
set, and the test set pairs the held-out normals with an equal number of
anomalous graphs. Methods are scored on the test set with AUC and average
precision, aggregated over seeds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError
from .graphs import Graph, GraphDataset
from .metrics import auc, average_precision
from .scorer import NoiseMode, gram_score
from .vgae import VgaeConfig, VgaeModel, decode, encode, reparameterize, train

METHODS = ("gram", "reconstruction_baseline")


@dataclass(frozen=True)
class SplitSpec:
    """How to carve a labeled dataset into train-normals and a balanced test set."""

    normal_class: int = 0
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DomainError(
                f"train_fraction must be in (0, 1), got {self.train_fraction}"
            )


@dataclass(eq=False)
class Split:
    """Training graphs (all normal) and the labeled test set."""

    train: tuple[Graph, ...]
    test: tuple[Graph, ...]
    test_labels: tuple[int, ...]
    sampled_with_replacement: bool


def build_split(ds: GraphDataset, spec: SplitSpec) -> Split:
    """Seeded shuffle of the normal class; held-out normals plus an equal
    count of anomalies form the test set (labels 0/1).

    When the anomaly pool is smaller than the held-out normal count, anomalies
    are drawn with replacement and the split is flagged. Train and test are
    disjoint by construction.
    """
    normals = [g for g in ds if g.label == spec.normal_class]
    anomalies = [g for g in ds if g.label != spec.normal_class]
    if len(normals) < 2:
        raise DomainError(
            f"normal class {spec.normal_class} has {len(normals)} graphs, need >= 2"
        )
    if not anomalies:
        raise DomainError("dataset has no anomalous graphs")
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(len(normals))
    n_train = int(round(spec.train_fraction * len(normals)))
    n_train = min(max(n_train, 1), len(normals) - 1)
    train_graphs = tuple(normals[i] for i in order[:n_train])
    held_out = [normals[i] for i in order[n_train:]]
    k = len(held_out)
    with_replacement = len(anomalies) < k
    picks = rng.choice(len(anomalies), size=k, replace=with_replacement)
    test = tuple(held_out) + tuple(anomalies[int(i)] for i in picks)
    labels = (0,) * k + (1,) * k
    return Split(
        train=train_graphs,
        test=test,
        test_labels=labels,
        sampled_with_replacement=with_replacement,
    )


def reconstruction_baseline_score(
    model: VgaeModel, g: Graph, beta: float | None = None
) -> float:
    """Deterministic weighted reconstruction error, the autoencoder-style
    comparator: beta ‖X − X̃‖²_F + (1 − beta) ‖A − Ã‖²_F with E = 0."""
    if beta is None:
        beta = model.config.beta
    if not 0.0 <= beta <= 1.0:
        raise DomainError(f"beta must be in [0, 1], got {beta}")
    enc = encode(model, g, trainable=False, train=False)
    z = reparameterize(enc.mu, enc.logsigma, np.zeros(enc.mu.value.shape), 0.0)
    x_rec, a_rec = decode(model, z, enc.s, params=enc.params, train=False)
    x_err = float(((g.node_features - x_rec.value) ** 2).sum())
    a_err = float(((g.adjacency() - a_rec.value) ** 2).sum())
    return beta * x_err + (1.0 - beta) * a_err


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: methods x seeds on each dataset under a model config."""

    methods: tuple[str, ...] = ("gram",)
    seeds: tuple[int, ...] = (0, 1, 2)
    split: SplitSpec = SplitSpec()
    model: VgaeConfig = VgaeConfig()
    score_activation: str = "relu"

    def __post_init__(self):
        if not self.methods:
            raise DomainError("experiment needs at least one method")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise DomainError(f"unknown methods {unknown}; expected subset of {METHODS}")
        if not self.seeds:
            raise DomainError("experiment needs at least one seed")


@dataclass(eq=False)
class CellResult:
    """One (dataset, method, seed) evaluation."""

    dataset: str
    method: str
    seed: int
    auc: float | None
    ap: float | None
    error: str | None = None
    scores: list[float] = field(default_factory=list)
    labels: list[int] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(eq=False)
class ResultsTable:
    """Per-(dataset, method) AUC/AP aggregates over seeds, plus raw cells."""

    cells: list[CellResult]

    def aggregates(self) -> list[dict]:
        keys = sorted({(c.dataset, c.method) for c in self.cells})
        rows = []
        for dataset, method in keys:
            group = [c for c in self.cells if c.dataset == dataset and c.method == method]
            ok = [c for c in group if not c.failed]
            row = {
                "dataset": dataset,
                "method": method,
                "seeds": len(group),
                "failed_seeds": len(group) - len(ok),
            }
            if ok:
                aucs = np.array([c.auc for c in ok])
                aps = np.array([c.ap for c in ok])
                row.update(
                    auc_mean=float(aucs.mean()),
                    auc_std=float(aucs.std()),
                    ap_mean=float(aps.mean()),
                    ap_std=float(aps.std()),
                )
            else:
                row.update(auc_mean=None, auc_std=None, ap_mean=None, ap_std=None)
            rows.append(row)
        return rows

    @property
    def all_failed(self) -> bool:
        return all(c.failed for c in self.cells)

    def to_json(self) -> str:
        doc = {
            "aggregates": self.aggregates(),
            "cells": [
                {
                    "dataset": c.dataset,
                    "method": c.method,
                    "seed": c.seed,
                    "auc": c.auc,
                    "ap": c.ap,
                    "error": c.error,
                    "scores": c.scores,
                    "labels": c.labels,
                }
                for c in self.cells
            ],
        }
        return json.dumps(doc, sort_keys=True, indent=2)

    def to_csv(self) -> str:
        lines = ["dataset,method,seeds,failed_seeds,auc_mean,auc_std,ap_mean,ap_std"]
        for row in self.aggregates():
            vals = [
                row["dataset"],
                row["method"],
                str(row["seeds"]),
                str(row["failed_seeds"]),
            ]
            for key in ("auc_mean", "auc_std", "ap_mean", "ap_std"):
                vals.append("" if row[key] is None else repr(row[key]))
            lines.append(",".join(vals))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        """Aligned table, metrics as percentages (mean ± std, two decimals)."""
        lines = [f"{'dataset':<16}{'method':<28}{'AUC %':<16}{'AP %':<16}"]
        for row in self.aggregates():
            if row["auc_mean"] is None:
                auc_s = ap_s = "failed"
            else:
                auc_s = f"{100 * row['auc_mean']:.2f} ±{100 * row['auc_std']:.2f}"
                ap_s = f"{100 * row['ap_mean']:.2f} ±{100 * row['ap_std']:.2f}"
            lines.append(f"{row['dataset']:<16}{row['method']:<28}{auc_s:<16}{ap_s:<16}")
        return "\n".join(lines) + "\n"


def _score_test_set(
    method: str,
    model: VgaeModel,
    split: Split,
    activation: str,
) -> list[float]:
    out = []
    for g in split.test:
        if method == "gram":
            out.append(
                gram_score(
                    model, g, noise_mode=NoiseMode.deterministic(), activation=activation
                ).graph_score
            )
        else:
            out.append(reconstruction_baseline_score(model, g))
    return out


def run_experiment(
    datasets: dict[str, GraphDataset], config: ExperimentConfig
) -> ResultsTable:
    """Evaluate every (dataset, method, seed) cell; a failing cell is recorded
    with its error message instead of aborting the run.

    The cell seed drives the split, the model initialization, and training, so
    a rerun with the same config reproduces every number exactly.
    """
    cells: list[CellResult] = []
    for ds_name in sorted(datasets):
        ds = datasets[ds_name]
        for seed in config.seeds:
            split = build_split(ds, replace(config.split, seed=seed))
            train_set = GraphDataset(split.train, name=f"{ds_name}-train")
            model = None
            train_error = None
            try:
                model, _ = train(train_set, replace(config.model, seed=seed))
            except Exception as err:  # cell failure must not kill the run
                train_error = f"{type(err).__name__}: {err}"
            for method in config.methods:
                if train_error is not None:
                    cells.append(
                        CellResult(ds_name, method, seed, None, None, error=train_error)
                    )
                    continue
                try:
                    scores = _score_test_set(method, model, split, config.score_activation)
                    labels = list(split.test_labels)
                    cells.append(
                        CellResult(
                            ds_name,
                            method,
                            seed,
                            auc=auc(scores, labels),
                            ap=average_precision(scores, labels),
                            scores=[float(v) for v in scores],
                            labels=labels,
                        )
                    )
                except Exception as err:
                    cells.append(
                        CellResult(
                            ds_name, method, seed, None, None,
                            error=f"{type(err).__name__}: {err}",
                        )
                    )
    cells.sort(key=lambda c: (c.dataset, c.method, c.seed))
    return ResultsTable(cells=cells)

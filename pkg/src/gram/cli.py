"""Command-line entry point.

Subcommands: synth, train, score, eval, oracle. Every run writes its fully
resolved configuration next to its outputs so it can be replayed exactly.
Exit codes: 0 success, 1 usage error, 2 runtime failure. Primary output files
contain no timestamps; reruns with the same seed are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import GramError
from .graphs import (
    FEATURE_POLICIES,
    GraphDataset,
    apply_feature_policy,
    make_synthetic_dataset,
)
from .harness import ExperimentConfig, SplitSpec, run_experiment
from .oracle import monte_carlo_score, reproduce_table1, canonical_graphs
from .scorer import NoiseMode, gram_score, sampled_mean_score
from .tudataset import parse_tudataset, write_tudataset
from .vgae import VgaeConfig, load_checkpoint, train


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the contract reserves 2 for runtime errors
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    if not os.path.isfile(path):
        raise UsageError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise UsageError("config file must hold a JSON object")
    return doc


class Resolver:
    """Merges flag values over config-file values over defaults, and records
    every resolved key for the run's config dump."""

    def __init__(self, file_cfg: dict):
        self.file_cfg = file_cfg
        self.resolved: dict = {}

    def get(self, key: str, flag_value, default):
        if flag_value is not None:
            value = flag_value
        elif key in self.file_cfg:
            value = self.file_cfg[key]
        else:
            value = default
        self.resolved[key] = value
        return value

    def dump(self, out_dir: str, command: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        doc = {"command": command, **{k: self.resolved[k] for k in sorted(self.resolved)}}
        path = os.path.join(out_dir, "resolved_config.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, indent=2)
            fh.write("\n")


def _write(out_dir: str, name: str, text: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path


def _load_dataset(data_dir: str, name: str, features: str | None) -> GraphDataset:
    if not os.path.isdir(data_dir):
        raise UsageError(f"dataset directory not found: {data_dir}")
    ds = parse_tudataset(data_dir, name)
    if features is not None:
        ds = apply_feature_policy(ds, features)
    elif ds.feature_dim() == 0:
        raise UsageError(
            "dataset has no node features; pass --features "
            f"(one of {FEATURE_POLICIES})"
        )
    return ds


def _model_config(res: Resolver, args, feature_dim: int | None) -> VgaeConfig:
    profile = res.get("model.profile", args.profile, "experiment")
    hidden = res.get("model.hidden_dim", args.hidden_dim, None)
    latent = res.get("model.latent_dim", args.latent_dim, None)
    if profile == "analysis":
        # analysis profile needs square layers; size to the input by default
        if hidden is None:
            hidden = feature_dim
        if latent is None:
            latent = feature_dim
    else:
        hidden = 64 if hidden is None else hidden
        latent = 32 if latent is None else latent
    res.resolved["model.hidden_dim"] = hidden
    res.resolved["model.latent_dim"] = latent
    return VgaeConfig(
        gcn_layers=res.get("model.gcn_layers", args.gcn_layers, 4),
        hidden_dim=hidden,
        latent_dim=latent,
        profile=profile,
        dropout_rate=res.get("model.dropout_rate", args.dropout_rate, 0.1),
        beta=res.get("model.beta", args.beta, 0.5),
        learning_rate=res.get("model.learning_rate", args.learning_rate, 1e-3),
        epochs=res.get("model.epochs", args.epochs, 200),
        seed=res.get("seed", args.seed, 0),
    )


def _add_model_flags(p: argparse.ArgumentParser):
    p.add_argument("--profile", choices=("analysis", "experiment"))
    p.add_argument("--gcn-layers", dest="gcn_layers", type=int)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--latent-dim", dest="latent_dim", type=int)
    p.add_argument("--dropout-rate", dest="dropout_rate", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--epochs", type=int)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--out", required=True, help="output directory")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    res = Resolver(_load_config_file(args.config))
    count = res.get("count", args.count, 100)
    lo = res.get("min_nodes", args.min_nodes, 7)
    hi = res.get("max_nodes", args.max_nodes, 15)
    seed = res.get("seed", args.seed, 0)
    canonical = res.get("canonical", args.canonical or None, False)
    name = res.get("name", args.name, "synthetic")
    if count < 1:
        raise UsageError(f"count must be >= 1, got {count}")
    rng = None if canonical else np.random.default_rng(seed)
    ds = make_synthetic_dataset(count, (lo, hi), rng=rng, name=name)
    # graphs are stored structurally; feature policies are applied at load time
    stripped = GraphDataset(
        tuple(g.with_features(np.zeros((g.num_nodes, 0))) for g in ds), name=name
    )
    out_dir = write_tudataset(stripped, args.out, name)
    res.dump(args.out, "synth")
    print(f"wrote {len(ds)} graphs to {out_dir}")
    return 0


def cmd_train(args) -> int:
    res = Resolver(_load_config_file(args.config))
    features = res.get("features", args.features, None)
    normal_class = res.get("normal_class", args.normal_class, 0)
    ds = _load_dataset(args.data, res.get("dataset", args.name, "synthetic"), features)
    normals = tuple(g for g in ds if g.label == normal_class)
    if not normals:
        raise UsageError(f"no graphs with normal class {normal_class}")
    train_set = GraphDataset(normals, name=ds.name + "-normal")
    config = _model_config(res, args, train_set.feature_dim())
    checkpoint = os.path.join(args.out, "checkpoint.json")
    res.dump(args.out, "train")
    model, report = train(train_set, config, checkpoint_path=checkpoint)
    _write(args.out, "train_report.json", report.to_json())
    _write(args.out, "train_losses.csv", report.to_csv())
    final = report.total_loss[-1] if report.total_loss else float("nan")
    print(
        f"trained on {len(train_set)} graphs for {config.epochs} epochs; "
        f"final mean loss {final:.6f}; checkpoint {checkpoint}",
        file=sys.stderr,
    )
    print(checkpoint)
    return 0


def cmd_score(args) -> int:
    res = Resolver(_load_config_file(args.config))
    if not os.path.isfile(args.checkpoint):
        raise UsageError(f"checkpoint not found: {args.checkpoint}")
    model = load_checkpoint(args.checkpoint)
    features = res.get("features", args.features, None)
    ds = _load_dataset(args.data, res.get("dataset", args.name, "synthetic"), features)
    activation = res.get("activation", args.activation, "relu")
    samples = res.get("noise_samples", args.noise_samples, 0)
    seed = res.get("seed", args.seed, 0)
    res.dump(args.out, "score")

    rows = ["graph_id,graph_score,label" + (",sampled_mean_score" if samples else "")]
    docs = []
    for gid, g in enumerate(ds):
        rep = gram_score(
            model, g, noise_mode=NoiseMode.deterministic(),
            activation=activation, graph_id=gid,
        )
        label = "" if g.label is None else g.label
        row = f"{gid},{rep.graph_score!r},{label}"
        doc = json.loads(rep.to_json(include_nodes=args.nodes))
        doc["label"] = g.label
        if samples:
            mean = sampled_mean_score(
                model, g, samples, base_seed=seed + gid * samples, activation=activation
            )
            row += f",{mean!r}"
            doc["sampled_mean_score"] = mean
        rows.append(row)
        docs.append(doc)
    _write(args.out, "scores.csv", "\n".join(rows) + "\n")
    _write(args.out, "scores.json", json.dumps(docs, sort_keys=True, indent=2) + "\n")
    print(os.path.join(args.out, "scores.csv"))
    return 0


def cmd_eval(args) -> int:
    res = Resolver(_load_config_file(args.config))
    methods_raw = res.get("methods", args.methods, "gram")
    methods = tuple(m for m in str(methods_raw).split(",") if m)
    if not methods:
        raise UsageError("method list is empty")
    seeds_raw = res.get("seeds", args.seeds, "0,1,2")
    try:
        seeds = tuple(int(s) for s in str(seeds_raw).split(",") if s)
    except ValueError:
        raise UsageError(f"bad seed list {seeds_raw!r}")
    if not seeds:
        raise UsageError("seed list is empty")
    features = res.get("features", args.features, None)
    name = res.get("dataset", args.name, "synthetic")
    ds = _load_dataset(args.data, name, features)
    split = SplitSpec(
        normal_class=res.get("normal_class", args.normal_class, 0),
        train_fraction=res.get("train_fraction", args.train_fraction, 0.8),
    )
    model_cfg = _model_config(res, args, ds.feature_dim())
    config = ExperimentConfig(
        methods=methods,
        seeds=seeds,
        split=split,
        model=model_cfg,
        score_activation=res.get("activation", args.activation, "relu"),
    )
    res.dump(args.out, "eval")
    table = run_experiment({name: ds}, config)
    _write(args.out, "results.json", table.to_json() + "\n")
    _write(args.out, "results.csv", table.to_csv())
    _write(args.out, "results.txt", table.to_text())
    print(table.to_text(), end="")
    if table.all_failed:
        print("every experiment cell failed", file=sys.stderr)
        return 2
    return 0


def cmd_oracle(args) -> int:
    res = Resolver(_load_config_file(args.config))
    epsilon = res.get("epsilon", args.epsilon, 0.1)
    trials = res.get("trials", args.trials, 0)
    tolerance = res.get("tolerance", args.tolerance, 0.01)
    seed = res.get("seed", args.seed, 0)
    res.dump(args.out, "oracle")
    report = reproduce_table1(epsilon=epsilon, tolerance=tolerance)
    text = report.to_text()
    if trials:
        rng = np.random.default_rng(seed)
        lines = [f"monte carlo ({trials} trials):"]
        for label, g in zip(("binary tree", "double ring"), canonical_graphs()):
            mc = monte_carlo_score(g, epsilon, trials, rng)
            lines.append(
                f"  {label}: graph mean {mc.graph_mean:.4f} std {mc.graph_std:.4f}"
            )
        text += "\n".join(lines) + "\n"
    _write(args.out, "oracle.txt", text)
    _write(args.out, "oracle.json", report.to_json() + "\n")
    print(text, end="")
    return 0 if report.all_pass else 2


# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="gram", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate the synthetic tree/double-ring corpus")
    p.add_argument("--count", type=int, help="graphs per class")
    p.add_argument("--min-nodes", dest="min_nodes", type=int)
    p.add_argument("--max-nodes", dest="max_nodes", type=int)
    p.add_argument("--canonical", action="store_true", help="deterministic shapes")
    p.add_argument("--name")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="fit the autoencoder on the normal class")
    p.add_argument("--data", required=True, help="dataset root directory")
    p.add_argument("--name", help="dataset name (default synthetic)")
    p.add_argument("--features", choices=FEATURE_POLICIES)
    p.add_argument("--normal-class", dest="normal_class", type=int)
    _add_model_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="gradient-attention scores from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--name")
    p.add_argument("--features", choices=FEATURE_POLICIES)
    p.add_argument("--activation", choices=("relu", "gelu", "identity"))
    p.add_argument("--noise-samples", dest="noise_samples", type=int)
    p.add_argument("--nodes", action="store_true", help="include node scores in JSON")
    _add_common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="one-class experiment with AUC/AP aggregation")
    p.add_argument("--data", required=True)
    p.add_argument("--name")
    p.add_argument("--features", choices=FEATURE_POLICIES)
    p.add_argument("--methods", help="comma-separated subset of gram,reconstruction_baseline")
    p.add_argument("--seeds", help="comma-separated seed list")
    p.add_argument("--normal-class", dest="normal_class", type=int)
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--activation", choices=("relu", "gelu", "identity"))
    _add_model_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle", help="closed-form reference distributions and checks")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--trials", type=int, help="Monte-Carlo trials (0 = skip)")
    p.add_argument("--tolerance", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (GramError, OSError, json.JSONDecodeError, ValueError) as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

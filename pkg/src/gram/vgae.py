"""Variational graph autoencoder: model assembly, loss, training, checkpoints.

The encoder cascades GCN layers into two affine heads producing the latent
mean and log standard deviation per node. The decoder mirrors that layout
twice: each branch runs an MLP then a GCN stack, one branch reconstructing
node features, the other producing node embeddings whose sigmoid Gram matrix
reconstructs the adjacency.

Two activation profiles are supported. "analysis" uses ReLU in the heads and
nothing between GCN layers, which together with identity_debug initialization
makes the network an exactly tractable linear map on nonnegative input.
"experiment" uses GELU between GCN layers and in the MLPs, plus dropout.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import Tape, Tensor
from .errors import DomainError, NumericError, ShapeError
from .graphs import Graph, GraphDataset, NormalizedAdjacency, normalized_adjacency
from .nn import AdamState, LayerSpec, adam_step, forward, init_params, put_params

PROFILES = ("analysis", "experiment")

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class VgaeConfig:
    """Architecture and training hyperparameters."""

    gcn_layers: int = 4
    hidden_dim: int = 64
    latent_dim: int = 32
    profile: str = "experiment"
    dropout_rate: float = 0.1
    beta: float = 0.5
    learning_rate: float = 1e-3
    epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.gcn_layers < 1:
            raise DomainError(f"gcn_layers must be >= 1, got {self.gcn_layers}")
        if self.hidden_dim < 1 or self.latent_dim < 1:
            raise DomainError("hidden_dim and latent_dim must be positive")
        if self.profile not in PROFILES:
            raise DomainError(f"profile must be one of {PROFILES}, got {self.profile!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise DomainError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if not 0.0 <= self.beta <= 1.0:
            raise DomainError(f"beta must be in [0, 1], got {self.beta}")
        if self.learning_rate < 0.0:
            raise DomainError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.epochs < 0:
            raise DomainError(f"epochs must be >= 0, got {self.epochs}")

    @staticmethod
    def analysis(num_nodes: int, gcn_layers: int = 4) -> "VgaeConfig":
        """Square all-dims-N config for the closed-form debugging regime."""
        return VgaeConfig(
            gcn_layers=gcn_layers,
            hidden_dim=num_nodes,
            latent_dim=num_nodes,
            profile="analysis",
            dropout_rate=0.0,
        )


def _act(profile: str) -> str:
    return "relu" if profile == "analysis" else "gelu"


def _gcn_stack(cfg: VgaeConfig, prefix: str, in_dim: int, out_dim: int) -> list[LayerSpec]:
    """GCN layers with the profile's inter-layer activation and dropout."""
    specs: list[LayerSpec] = []
    d = in_dim
    for layer in range(cfg.gcn_layers):
        last = layer == cfg.gcn_layers - 1
        d_out = out_dim if last else cfg.hidden_dim
        specs.append(LayerSpec("gcn", f"{prefix}_gcn{layer}", d, d_out))
        if not last and cfg.profile == "experiment":
            specs.append(LayerSpec("gelu"))
            if cfg.dropout_rate > 0.0:
                specs.append(LayerSpec("dropout", rate=cfg.dropout_rate))
        d = d_out
    return specs


def _mlp(cfg: VgaeConfig, prefix: str, in_dim: int, out_dim: int) -> list[LayerSpec]:
    """Two affine layers with the profile's activation between them."""
    return [
        LayerSpec("affine", f"{prefix}1", in_dim, cfg.hidden_dim),
        LayerSpec(_act(cfg.profile)),
        LayerSpec("affine", f"{prefix}2", cfg.hidden_dim, out_dim),
    ]


def encoder_specs(cfg: VgaeConfig, input_dim: int) -> list[LayerSpec]:
    return _gcn_stack(cfg, "enc", input_dim, cfg.hidden_dim)


def mean_head_specs(cfg: VgaeConfig) -> list[LayerSpec]:
    return _mlp(cfg, "mean", cfg.hidden_dim, cfg.latent_dim)


def logstd_head_specs(cfg: VgaeConfig) -> list[LayerSpec]:
    return _mlp(cfg, "logstd", cfg.hidden_dim, cfg.latent_dim)


def feature_decoder_specs(cfg: VgaeConfig, input_dim: int) -> list[LayerSpec]:
    return _mlp(cfg, "decx_mlp", cfg.latent_dim, cfg.hidden_dim) + _gcn_stack(
        cfg, "decx", cfg.hidden_dim, input_dim
    )


def adjacency_decoder_specs(cfg: VgaeConfig) -> list[LayerSpec]:
    return _mlp(cfg, "deca_mlp", cfg.latent_dim, cfg.hidden_dim) + _gcn_stack(
        cfg, "deca", cfg.hidden_dim, cfg.latent_dim
    )


def model_specs(cfg: VgaeConfig, input_dim: int) -> list[LayerSpec]:
    return (
        encoder_specs(cfg, input_dim)
        + mean_head_specs(cfg)
        + logstd_head_specs(cfg)
        + feature_decoder_specs(cfg, input_dim)
        + adjacency_decoder_specs(cfg)
    )


@dataclass(eq=False)
class VgaeModel:
    """A config, the input feature dimension, and the parameter dict."""

    config: VgaeConfig
    input_dim: int
    params: dict[str, np.ndarray]

    def __post_init__(self):
        if self.input_dim < 1:
            raise DomainError(f"input_dim must be positive, got {self.input_dim}")
        for key, value in self.params.items():
            if not np.isfinite(value).all():
                raise NumericError(f"parameter {key!r} contains non-finite values")
        specs = self.all_specs()
        expected = {s.name + ".weight" for s in specs if s.has_params}
        expected |= {s.name + ".bias" for s in specs if s.kind == "affine"}
        if set(self.params) != expected:
            missing = sorted(expected - set(self.params))
            extra = sorted(set(self.params) - expected)
            raise DomainError(
                f"parameters do not match architecture (missing {missing}, extra {extra})"
            )

    # layer lists are derived from the config so checkpoints only carry params

    def encoder_specs(self) -> list[LayerSpec]:
        return encoder_specs(self.config, self.input_dim)

    def mean_head_specs(self) -> list[LayerSpec]:
        return mean_head_specs(self.config)

    def logstd_head_specs(self) -> list[LayerSpec]:
        return logstd_head_specs(self.config)

    def feature_decoder_specs(self) -> list[LayerSpec]:
        return feature_decoder_specs(self.config, self.input_dim)

    def adjacency_decoder_specs(self) -> list[LayerSpec]:
        return adjacency_decoder_specs(self.config)

    def all_specs(self) -> list[LayerSpec]:
        return model_specs(self.config, self.input_dim)


def build_model(
    config: VgaeConfig,
    input_dim: int,
    rng: np.random.Generator | None = None,
    scheme: str | None = None,
) -> VgaeModel:
    """Initialize a model; scheme defaults to identity_debug for the analysis
    profile and glorot_uniform otherwise."""
    if scheme is None:
        scheme = "identity_debug" if config.profile == "analysis" else "glorot_uniform"
    params = init_params(model_specs(config, input_dim), rng, scheme)
    return VgaeModel(config, input_dim, params)


def analysis_model(g: Graph) -> VgaeModel:
    """Identity-weight analysis-profile model sized for one graph, which must
    carry adjacency features so every layer is square."""
    if g.feature_dim != g.num_nodes:
        raise DomainError(
            f"analysis model needs N x N features, got {g.num_nodes} x {g.feature_dim}"
        )
    return build_model(VgaeConfig.analysis(g.num_nodes), g.num_nodes)


# ---------------------------------------------------------------------------
# Taped forward passes
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class EncodeResult:
    """Encoder outputs plus the live tape and on-tape handles for reuse."""

    h: Tensor
    mu: Tensor
    logsigma: Tensor
    tape: Tape
    params: dict[str, Tensor]
    s: Tensor


def encode(
    model: VgaeModel,
    g: Graph,
    trainable: bool = False,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> EncodeResult:
    """Run the encoder on a fresh tape.

    The embedding H is watched under the name "H" so a later backward pass
    reports the gradient with respect to the node embeddings. With
    ``trainable`` the parameters are watched too (for training).
    """
    if g.feature_dim != model.input_dim:
        raise ShapeError(
            f"graph feature dim {g.feature_dim} != model input dim {model.input_dim}"
        )
    tape = Tape()
    s = tape.constant(normalized_adjacency(g).matrix)
    params = put_params(tape, model.params, trainable=trainable)
    x = tape.constant(g.node_features)
    h = forward(tape, model.encoder_specs(), params, x, s=s, train=train, rng=rng)
    h = tape.watch(h, "H")
    mu = forward(tape, model.mean_head_specs(), params, h, s=s, train=train, rng=rng)
    logsigma = forward(tape, model.logstd_head_specs(), params, h, s=s, train=train, rng=rng)
    return EncodeResult(h, mu, logsigma, tape, params, s)


def reparameterize(mu: Tensor, logsigma: Tensor, e: np.ndarray, noise_scale: float) -> Tensor:
    """Z = Mu + (noise_scale * E) ⊙ exp(LogSigma) on Mu's tape."""
    if noise_scale < 0.0:
        raise DomainError(f"noise_scale must be >= 0, got {noise_scale}")
    e = np.asarray(e, dtype=np.float64)
    if e.shape != mu.value.shape or mu.value.shape != logsigma.value.shape:
        raise ShapeError(
            f"reparameterize shapes mu {mu.value.shape}, logsigma "
            f"{logsigma.value.shape}, e {e.shape}"
        )
    tape = mu.tape
    noise = tape.constant(noise_scale * e)
    return tape.add(mu, tape.mul(noise, tape.exp(logsigma)))


def decode(
    model: VgaeModel,
    z: Tensor | np.ndarray,
    s: Tensor | NormalizedAdjacency,
    params: dict[str, Tensor] | None = None,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[Tensor, Tensor]:
    """Reconstruct (X_rec, A_rec) from latent node matrix Z.

    A_rec = sigmoid(U Uᵀ) over the adjacency branch's node embeddings U.
    Accepts a taped Z (continuing that tape, reusing ``params``) or a plain
    array (standalone evaluation on a fresh tape).
    """
    if isinstance(z, Tensor):
        tape = z.tape
        if params is None:
            raise DomainError("decoding a taped Z requires the on-tape params")
    else:
        tape = Tape()
        z = tape.constant(z)
        params = put_params(tape, model.params, trainable=False)
    if z.value.ndim != 2 or z.value.shape[1] != model.config.latent_dim:
        raise ShapeError(
            f"Z must be N x {model.config.latent_dim}, got {z.value.shape}"
        )
    s_t = s if isinstance(s, Tensor) else tape.constant(s.matrix)
    x_rec = forward(
        tape, model.feature_decoder_specs(), params, z, s=s_t, train=train, rng=rng
    )
    u = forward(
        tape, model.adjacency_decoder_specs(), params, z, s=s_t, train=train, rng=rng
    )
    a_rec = tape.sigmoid(tape.matmul(u, tape.transpose(u)))
    return x_rec, a_rec


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def kl_loss(mu: Tensor | np.ndarray, logsigma: Tensor | np.ndarray):
    """-(1/2N) Σ_{n,d} [1 + 2 LogSigma − Mu² − exp(2 LogSigma)].

    The sum runs over all nodes and all latent dimensions, divided by the
    node count only. Returns a scalar Tensor for taped inputs, float otherwise.
    """
    if isinstance(mu, Tensor) or isinstance(logsigma, Tensor):
        if not (isinstance(mu, Tensor) and isinstance(logsigma, Tensor)):
            raise ShapeError("kl_loss needs both inputs taped or both plain")
        if mu.value.shape != logsigma.value.shape:
            raise ShapeError(f"kl shapes {mu.value.shape} vs {logsigma.value.shape}")
        tape = mu.tape
        n = mu.value.shape[0]
        ones = tape.constant(np.ones_like(mu.value))
        term = tape.sub(
            tape.sub(tape.add(ones, tape.scale(logsigma, 2.0)), tape.mul(mu, mu)),
            tape.exp(tape.scale(logsigma, 2.0)),
        )
        return tape.scale(tape.sum_all(term), -0.5 / n)
    mu = np.asarray(mu, dtype=np.float64)
    logsigma = np.asarray(logsigma, dtype=np.float64)
    if mu.shape != logsigma.shape:
        raise ShapeError(f"kl shapes {mu.shape} vs {logsigma.shape}")
    n = mu.shape[0]
    term = 1.0 + 2.0 * logsigma - mu * mu - np.exp(2.0 * logsigma)
    return float(-0.5 / n * term.sum())


def _frobenius_sq(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    d = tape.sub(a, b)
    return tape.sum_all(tape.mul(d, d))


def vgae_loss(
    x: Tensor,
    a: Tensor,
    x_rec: Tensor,
    a_rec: Tensor,
    mu: Tensor,
    logsigma: Tensor,
    beta: float,
) -> tuple[Tensor, dict[str, float]]:
    """beta ‖X − X̃‖²_F + (1 − beta) ‖A − Ã‖²_F + KL, on the shared tape.

    Returns the scalar loss tensor plus a float breakdown of the three parts.
    """
    if not 0.0 <= beta <= 1.0:
        raise DomainError(f"beta must be in [0, 1], got {beta}")
    tape = x.tape
    x_part = _frobenius_sq(tape, x, x_rec)
    a_part = _frobenius_sq(tape, a, a_rec)
    kl = kl_loss(mu, logsigma)
    total = tape.add(
        tape.add(tape.scale(x_part, beta), tape.scale(a_part, 1.0 - beta)), kl
    )
    parts = {
        "x_recon": float(x_part.value),
        "a_recon": float(a_part.value),
        "kl": float(kl.value),
    }
    return total, parts


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class TrainReport:
    """Per-epoch mean losses over the dataset plus timing and artifact path."""

    total_loss: list[float] = field(default_factory=list)
    x_recon_loss: list[float] = field(default_factory=list)
    a_recon_loss: list[float] = field(default_factory=list)
    kl_loss: list[float] = field(default_factory=list)
    wall_clock_seconds: float = 0.0
    checkpoint_path: str | None = None

    def to_json(self, include_timing: bool = False) -> str:
        """Timing is excluded by default so rerun outputs stay byte-identical."""
        doc = {
            "total_loss": self.total_loss,
            "x_recon_loss": self.x_recon_loss,
            "a_recon_loss": self.a_recon_loss,
            "kl_loss": self.kl_loss,
            "checkpoint_path": self.checkpoint_path,
        }
        if include_timing:
            doc["wall_clock_seconds"] = self.wall_clock_seconds
        return json.dumps(doc, sort_keys=True, indent=2)

    def to_csv(self) -> str:
        lines = ["epoch,total_loss,x_recon_loss,a_recon_loss,kl_loss"]
        for k in range(len(self.total_loss)):
            lines.append(
                f"{k + 1},{self.total_loss[k]!r},{self.x_recon_loss[k]!r},"
                f"{self.a_recon_loss[k]!r},{self.kl_loss[k]!r}"
            )
        return "\n".join(lines) + "\n"


def _graph_loss_step(
    model: VgaeModel,
    g: Graph,
    rng: np.random.Generator,
    train_mode: bool,
) -> tuple[float, dict[str, float], dict[str, np.ndarray]]:
    """One forward/backward pass on one graph; returns loss, parts, grads."""
    enc = encode(model, g, trainable=True, train=train_mode, rng=rng)
    e = rng.standard_normal(enc.mu.value.shape)
    z = reparameterize(enc.mu, enc.logsigma, e, noise_scale=1.0)
    x_rec, a_rec = decode(model, z, enc.s, params=enc.params, train=train_mode, rng=rng)
    x = enc.tape.constant(g.node_features)
    a = enc.tape.constant(g.adjacency())
    total, parts = vgae_loss(x, a, x_rec, a_rec, enc.mu, enc.logsigma, model.config.beta)
    grads = enc.tape.backward(total)
    grads.pop("H", None)
    return float(total.value), parts, grads


def train(
    dataset: GraphDataset,
    config: VgaeConfig,
    checkpoint_path: str | None = None,
) -> tuple[VgaeModel, TrainReport]:
    """Fit a fresh model on the dataset (normal graphs only by convention).

    One Adam step per graph, dataset order reshuffled each epoch; everything
    (init, shuffles, noise, dropout) is drawn from a single generator seeded
    by ``config.seed``, so identical inputs give identical checkpoints.
    Aborts with a numeric error naming the epoch if the loss goes non-finite.
    """
    rng = np.random.default_rng(config.seed)
    model = build_model(config, dataset.feature_dim(), rng=rng)
    adam = AdamState(learning_rate=config.learning_rate)
    report = TrainReport()
    started = time.perf_counter()
    for epoch in range(config.epochs):
        order = rng.permutation(len(dataset))
        sums = {"total": 0.0, "x_recon": 0.0, "a_recon": 0.0, "kl": 0.0}
        for idx in order:
            try:
                loss, parts, grads = _graph_loss_step(model, dataset[int(idx)], rng, True)
            except NumericError as err:
                raise NumericError(f"training aborted: {err}", epoch=epoch + 1) from err
            if not np.isfinite(loss):
                raise NumericError("training loss went non-finite", epoch=epoch + 1)
            model.params = adam_step(model.params, grads, adam)
            sums["total"] += loss
            sums["x_recon"] += parts["x_recon"]
            sums["a_recon"] += parts["a_recon"]
            sums["kl"] += parts["kl"]
        count = len(dataset)
        report.total_loss.append(sums["total"] / count)
        report.x_recon_loss.append(sums["x_recon"] / count)
        report.a_recon_loss.append(sums["a_recon"] / count)
        report.kl_loss.append(sums["kl"] / count)
    report.wall_clock_seconds = time.perf_counter() - started
    if checkpoint_path is not None:
        save_checkpoint(model, checkpoint_path)
        report.checkpoint_path = checkpoint_path
    return model, report


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(model: VgaeModel, path: str) -> None:
    """JSON checkpoint: format version, config, input dim, named parameters."""
    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "model": "vgae",
        "config": {
            "gcn_layers": model.config.gcn_layers,
            "hidden_dim": model.config.hidden_dim,
            "latent_dim": model.config.latent_dim,
            "profile": model.config.profile,
            "dropout_rate": model.config.dropout_rate,
            "beta": model.config.beta,
            "learning_rate": model.config.learning_rate,
            "epochs": model.config.epochs,
            "seed": model.config.seed,
        },
        "input_dim": model.input_dim,
        "params": {
            key: {"shape": list(value.shape), "data": value.ravel().tolist()}
            for key, value in sorted(model.params.items())
        },
    }
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_checkpoint(path: str) -> VgaeModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise DomainError(
            f"unsupported checkpoint format version {version!r} "
            f"(expected {CHECKPOINT_FORMAT_VERSION})"
        )
    config = VgaeConfig(**doc["config"])
    params = {
        key: np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        for key, entry in doc["params"].items()
    }
    return VgaeModel(config, int(doc["input_dim"]), params)

"""Graph-level anomaly detection from gradient attention maps.

Train a variational graph autoencoder on normal graphs only, then score a
graph by how the gradients of its pooled latent vector distribute attention
over node embeddings. Includes the exactly solvable identity-weight regime
with closed-form Gaussian score distributions, a Monte-Carlo checker, and a
one-class evaluation harness.
"""

from .errors import (
    DomainError,
    FormatError,
    GramError,
    IntegrityError,
    NumericError,
    ParseError,
    ShapeError,
    TapeStateError,
)
from .graphs import (
    Graph,
    GraphDataset,
    NormalizedAdjacency,
    apply_feature_policy,
    default_node_features,
    gen_binary_tree,
    gen_double_ring,
    make_synthetic_dataset,
    normalized_adjacency,
)
from .autodiff import Tape, Tensor
from .nn import AdamState, LayerSpec, adam_step, forward, init_params, put_params
from .vgae import (
    EncodeResult,
    TrainReport,
    VgaeConfig,
    VgaeModel,
    adjacency_decoder_specs,
    analysis_model,
    build_model,
    decode,
    encode,
    encoder_specs,
    feature_decoder_specs,
    kl_loss,
    load_checkpoint,
    logstd_head_specs,
    mean_head_specs,
    model_specs,
    reparameterize,
    save_checkpoint,
    train,
    vgae_loss,
)
from .scorer import (
    AttentionMap,
    NoiseMode,
    ScoreReport,
    attention_coefficients,
    gram_score,
    latent_vector,
    sampled_mean_score,
    score_csv_rows,
    score_graph,
    threshold_at_quantile,
)
from .oracle import (
    GaussianScore,
    McReport,
    OracleReport,
    canonical_graphs,
    monte_carlo_score,
    propagate_brute_force,
    propagate_identity,
    reproduce_table1,
    sample_attention_law,
    score_distribution,
)
from .metrics import auc, average_precision
from .harness import (
    ExperimentConfig,
    ResultsTable,
    Split,
    SplitSpec,
    build_split,
    reconstruction_baseline_score,
    run_experiment,
)
from .tudataset import parse_tudataset, write_tudataset

__version__ = "0.1.0"

__all__ = [
    "AdamState", "AttentionMap", "DomainError", "EncodeResult", "ExperimentConfig",
    "FormatError", "GaussianScore", "GramError", "Graph", "GraphDataset",
    "IntegrityError", "LayerSpec", "McReport", "NoiseMode", "NormalizedAdjacency",
    "NumericError", "OracleReport", "ParseError", "ResultsTable", "ScoreReport",
    "ShapeError", "Split", "SplitSpec", "Tape", "TapeStateError", "Tensor",
    "TrainReport", "VgaeConfig", "VgaeModel", "adam_step", "analysis_model",
    "apply_feature_policy", "attention_coefficients", "auc", "average_precision",
    "adjacency_decoder_specs", "build_model", "build_split", "canonical_graphs",
    "decode", "default_node_features", "encode", "encoder_specs",
    "feature_decoder_specs", "forward", "gen_binary_tree",
    "gen_double_ring", "gram_score", "init_params", "kl_loss", "latent_vector",
    "load_checkpoint", "logstd_head_specs", "make_synthetic_dataset",
    "mean_head_specs", "model_specs", "monte_carlo_score",
    "normalized_adjacency", "parse_tudataset", "propagate_brute_force",
    "propagate_identity", "put_params", "reconstruction_baseline_score",
    "reparameterize", "reproduce_table1", "run_experiment", "sample_attention_law",
    "sampled_mean_score", "save_checkpoint", "score_csv_rows",
    "score_distribution", "score_graph",
    "threshold_at_quantile", "train", "vgae_loss", "write_tudataset",
]

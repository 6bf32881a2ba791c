"""Layer specifications, the tape-level forward runner, initializers, and Adam.

A model is a flat list of ``LayerSpec`` values executed in order. Parameters
live in a plain dict keyed ``"<layer name>.weight"`` / ``"<layer name>.bias"``
so checkpoints are trivially serializable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape, Tensor
from .errors import DomainError, NumericError, ShapeError

ACTIVATIONS = ("relu", "gelu")
LAYER_KINDS = ("gcn", "affine") + ACTIVATIONS + ("dropout", "global_add_pool")


@dataclass(frozen=True)
class LayerSpec:
    """One layer: graph convolution, dense affine, pointwise activation,
    dropout, or global add pooling.

    ``gcn`` computes S @ H @ W (no bias); ``affine`` computes H @ W + b;
    ``global_add_pool`` sums node rows into a single-row matrix. Activation,
    dropout, and pooling specs carry no parameters.
    """

    kind: str
    name: str = ""
    in_dim: int = 0
    out_dim: int = 0
    rate: float = 0.0

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise DomainError(f"unknown layer kind {self.kind!r}; expected one of {LAYER_KINDS}")
        if self.kind in ("gcn", "affine"):
            if not self.name:
                raise DomainError(f"{self.kind} layer needs a name for its parameters")
            if self.in_dim < 1 or self.out_dim < 1:
                raise DomainError(
                    f"{self.kind} layer {self.name!r} needs positive dims, "
                    f"got {self.in_dim} -> {self.out_dim}"
                )
        if self.kind == "dropout" and not 0.0 <= self.rate < 1.0:
            raise DomainError(f"dropout rate must be in [0, 1), got {self.rate}")

    @property
    def has_params(self) -> bool:
        return self.kind in ("gcn", "affine")


def init_params(
    specs: list[LayerSpec], rng: np.random.Generator | None, scheme: str = "glorot_uniform"
) -> dict[str, np.ndarray]:
    """Fresh parameters for every parameterized layer in ``specs``.

    ``glorot_uniform`` draws weights from U(-a, a) with a = sqrt(6 / (fan_in +
    fan_out)) and zeros the biases. ``identity_debug`` sets every weight to
    the identity (layers must be square) and every bias to zero, which makes
    the whole network an exactly analyzable linear map.
    """
    params: dict[str, np.ndarray] = {}
    for spec in specs:
        if not spec.has_params:
            continue
        key = spec.name + ".weight"
        if key in params:
            raise DomainError(f"duplicate layer name {spec.name!r}")
        if scheme == "glorot_uniform":
            if rng is None:
                raise DomainError("glorot_uniform initialization needs an rng")
            a = np.sqrt(6.0 / (spec.in_dim + spec.out_dim))
            params[key] = rng.uniform(-a, a, size=(spec.in_dim, spec.out_dim))
        elif scheme == "identity_debug":
            if spec.in_dim != spec.out_dim:
                raise DomainError(
                    f"identity_debug needs square layers, {spec.name!r} is "
                    f"{spec.in_dim} -> {spec.out_dim}"
                )
            params[key] = np.eye(spec.in_dim)
        else:
            raise DomainError(f"unknown init scheme {scheme!r}")
        if spec.kind == "affine":
            params[spec.name + ".bias"] = np.zeros(spec.out_dim)
    return params


def put_params(
    tape: Tape, params: dict[str, np.ndarray], trainable: bool = True
) -> dict[str, Tensor]:
    """Load a parameter dict onto a tape, watched when ``trainable``."""
    if trainable:
        return {k: tape.variable(k, v) for k, v in params.items()}
    return {k: tape.constant(v) for k, v in params.items()}


def forward(
    tape: Tape,
    specs: list[LayerSpec],
    params: dict[str, Tensor],
    x: Tensor,
    s: Tensor | None = None,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Run ``x`` through the layer list on ``tape``; empty list is the identity.

    ``s`` is the normalized adjacency, required iff any layer is a gcn.
    Raises NumericError naming the first layer whose output goes non-finite.
    """
    h = x
    for idx, spec in enumerate(specs):
        if spec.kind == "gcn":
            if s is None:
                raise ShapeError("gcn layer requires the normalized adjacency")
            h = tape.matmul(tape.matmul(s, h), params[spec.name + ".weight"])
        elif spec.kind == "affine":
            h = tape.add(
                tape.matmul(h, params[spec.name + ".weight"]), params[spec.name + ".bias"]
            )
        elif spec.kind == "relu":
            h = tape.relu(h)
        elif spec.kind == "gelu":
            h = tape.gelu(h)
        elif spec.kind == "dropout":
            if train and spec.rate > 0.0 and rng is None:
                raise DomainError("dropout in training mode needs an rng")
            h = tape.dropout(h, spec.rate, rng, train)
        elif spec.kind == "global_add_pool":
            # ones-row matmul keeps the result 2-D and sends the seed gradient
            # to every node row unchanged
            ones = tape.constant(np.ones((1, h.value.shape[0])))
            h = tape.matmul(ones, h)
        if not np.isfinite(h.value).all():
            label = spec.name or spec.kind
            raise NumericError(f"non-finite output from {label!r}", layer=idx)
    return h


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class AdamState:
    """Adam hyperparameters plus the per-parameter moment accumulators."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    def __post_init__(self):
        if self.learning_rate < 0.0:
            raise DomainError(f"learning rate must be >= 0, got {self.learning_rate}")
        for label, beta in (("beta1", self.beta1), ("beta2", self.beta2)):
            if not 0.0 <= beta < 1.0:
                raise DomainError(f"{label} must be in [0, 1), got {beta}")
        if self.eps <= 0.0:
            raise DomainError(f"eps must be > 0, got {self.eps}")


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
) -> dict[str, np.ndarray]:
    """One bias-corrected Adam update; mutates ``state``, returns new params."""
    state.t += 1
    t = state.t
    out: dict[str, np.ndarray] = {}
    for key, p in params.items():
        g = grads.get(key)
        if g is None:
            out[key] = p
            continue
        if g.shape != p.shape:
            raise ShapeError(f"gradient shape {g.shape} != param shape {p.shape} for {key!r}")
        m = state.m.get(key, np.zeros_like(p))
        v = state.v.get(key, np.zeros_like(p))
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.m[key] = m
        state.v[key] = v
        mhat = m / (1.0 - state.beta1**t)
        vhat = v / (1.0 - state.beta2**t)
        out[key] = p - state.learning_rate * mhat / (np.sqrt(vhat) + state.eps)
    return out

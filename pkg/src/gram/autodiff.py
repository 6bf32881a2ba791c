"""Minimal tape-based reverse-mode differentiation over numpy arrays.

A ``Tape`` records operations as they execute on ``Tensor`` handles and
replays vector-Jacobian products in reverse on ``backward``. Tapes are single
use: after one backward pass the tape refuses further recording or a second
backward (``TapeStateError``). Gradients are returned keyed by the names
given to ``variable``/``watch``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import erf

from .errors import DomainError, ShapeError, TapeStateError

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(eq=False)
class Tensor:
    """A value produced on a tape; ``grad`` is filled by the backward pass."""

    value: np.ndarray
    tape: "Tape | None"
    grad: np.ndarray | None = None
    name: str | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape


@dataclass(eq=False)
class Tape:
    """Operation recorder; one forward build, one backward sweep."""

    _records: list[tuple[Tensor, tuple[Tensor, ...], Callable[[np.ndarray], tuple]]] = field(
        default_factory=list
    )
    _watched: dict[str, Tensor] = field(default_factory=dict)
    _consumed: bool = False

    # -- construction -------------------------------------------------------

    def _check_open(self):
        if self._consumed:
            raise TapeStateError("tape already consumed by backward; build a new tape")

    def constant(self, value) -> Tensor:
        """Wrap a value that needs no gradient."""
        self._check_open()
        return Tensor(np.asarray(value, dtype=np.float64), self)

    def variable(self, name: str, value) -> Tensor:
        """Wrap a value whose gradient is reported under ``name``."""
        self._check_open()
        if name in self._watched:
            raise TapeStateError(f"variable name {name!r} already on tape")
        t = Tensor(np.asarray(value, dtype=np.float64), self, name=name)
        self._watched[name] = t
        return t

    def watch(self, t: Tensor, name: str) -> Tensor:
        """Start reporting the gradient of an existing tensor under ``name``."""
        self._check_open()
        if name in self._watched:
            raise TapeStateError(f"variable name {name!r} already on tape")
        t.name = name
        self._watched[name] = t
        return t

    def _record(self, out: Tensor, parents: tuple[Tensor, ...], vjp) -> Tensor:
        self._records.append((out, parents, vjp))
        return out

    def _emit(self, value: np.ndarray, parents: tuple[Tensor, ...], vjp) -> Tensor:
        self._check_open()
        return self._record(Tensor(value, self), parents, vjp)

    # -- operations ---------------------------------------------------------

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[0]:
            raise ShapeError(f"matmul shapes {a.value.shape} @ {b.value.shape}")
        av, bv = a.value, b.value
        return self._emit(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        """Elementwise sum; ``b`` may be a 1-D bias broadcast over rows."""
        if a.value.shape == b.value.shape:
            return self._emit(a.value + b.value, (a, b), lambda g: (g, g))
        if b.value.ndim == 1 and a.value.ndim == 2 and a.value.shape[1] == b.value.shape[0]:
            return self._emit(a.value + b.value, (a, b), lambda g: (g, g.sum(axis=0)))
        raise ShapeError(f"add shapes {a.value.shape} + {b.value.shape}")

    def sub(self, a: Tensor, b: Tensor) -> Tensor:
        if a.value.shape != b.value.shape:
            raise ShapeError(f"sub shapes {a.value.shape} - {b.value.shape}")
        return self._emit(a.value - b.value, (a, b), lambda g: (g, -g))

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.value.shape != b.value.shape:
            raise ShapeError(f"mul shapes {a.value.shape} * {b.value.shape}")
        av, bv = a.value, b.value
        return self._emit(av * bv, (a, b), lambda g: (g * bv, g * av))

    def scale(self, a: Tensor, c: float) -> Tensor:
        c = float(c)
        return self._emit(a.value * c, (a,), lambda g: (g * c,))

    def exp(self, a: Tensor) -> Tensor:
        out = np.exp(a.value)
        return self._emit(out, (a,), lambda g: (g * out,))

    def relu(self, a: Tensor) -> Tensor:
        # subgradient at 0 is taken as 1 so identity-style debug paths, whose
        # preactivations sit exactly at 0, stay exactly linear
        mask = (a.value >= 0.0).astype(np.float64)
        return self._emit(a.value * mask, (a,), lambda g: (g * mask,))

    def gelu(self, a: Tensor) -> Tensor:
        x = a.value
        cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
        pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
        return self._emit(x * cdf, (a,), lambda g: (g * (cdf + x * pdf),))

    def sigmoid(self, a: Tensor) -> Tensor:
        out = 1.0 / (1.0 + np.exp(-a.value))
        return self._emit(out, (a,), lambda g: (g * out * (1.0 - out),))

    def transpose(self, a: Tensor) -> Tensor:
        return self._emit(a.value.T.copy(), (a,), lambda g: (g.T,))

    def dropout(self, a: Tensor, rate: float, rng: np.random.Generator, train: bool) -> Tensor:
        """Inverted dropout; identity when ``train`` is false or rate is 0."""
        if not 0.0 <= rate < 1.0:
            raise DomainError(f"dropout rate must be in [0, 1), got {rate}")
        if not train or rate == 0.0:
            return self._emit(a.value.copy(), (a,), lambda g: (g,))
        keep = 1.0 - rate
        mask = (rng.random(a.value.shape) < keep).astype(np.float64) / keep
        return self._emit(a.value * mask, (a,), lambda g: (g * mask,))

    def sum_rows(self, a: Tensor) -> Tensor:
        """Column-wise sum over rows: (N, D) -> (D,). Pools node vectors."""
        if a.value.ndim != 2:
            raise ShapeError(f"sum_rows expects a matrix, got shape {a.value.shape}")
        n = a.value.shape[0]
        return self._emit(
            a.value.sum(axis=0), (a,), lambda g: (np.broadcast_to(g, (n, g.shape[0])).copy(),)
        )

    def sum_all(self, a: Tensor) -> Tensor:
        shape = a.value.shape
        return self._emit(
            np.asarray(a.value.sum()), (a,), lambda g: (np.broadcast_to(g, shape).copy(),)
        )

    # -- backward ------------------------------------------------------------

    def backward(self, root: Tensor, seed: np.ndarray | None = None) -> dict[str, np.ndarray]:
        """Accumulate d(root)/d(variable) for every watched variable.

        ``seed`` defaults to ones of the root's shape (for a scalar root this
        is the plain gradient). Consumes the tape.
        """
        self._check_open()
        if root.tape is not self:
            raise TapeStateError("root tensor does not belong to this tape")
        self._consumed = True
        if seed is None:
            seed = np.ones_like(root.value)
        else:
            seed = np.asarray(seed, dtype=np.float64)
            if seed.shape != root.value.shape:
                raise ShapeError(f"seed shape {seed.shape} != root shape {root.value.shape}")
        root.grad = seed
        for out, parents, vjp in reversed(self._records):
            if out.grad is None:
                continue
            for parent, contribution in zip(parents, vjp(out.grad)):
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.value)
                parent.grad = parent.grad + contribution
        return {
            name: (np.zeros_like(t.value) if t.grad is None else t.grad)
            for name, t in self._watched.items()
        }

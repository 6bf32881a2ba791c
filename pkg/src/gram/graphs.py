"""Graph containers, synthetic generators, featurization, and adjacency normalization.

Node indices are 0-based everywhere inside the package; dataset files on disk
use 1-based indices and are converted at the I/O boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import DomainError

Edge = tuple[int, int]


def _canonical_edges(edges: Sequence[Edge]) -> tuple[Edge, ...]:
    return tuple(sorted((min(i, j), max(i, j)) for i, j in edges))


@dataclass(frozen=True, eq=False)
class Graph:
    """One undirected graph: edge list plus a dense node-feature matrix.

    Invariants (checked at construction): no self-loops, endpoints in range,
    no duplicate undirected pair, feature matrix has one row per node.
    Instances are immutable and safe to share across workers.
    """

    num_nodes: int
    edges: tuple[Edge, ...]
    node_features: np.ndarray
    label: int | None = None

    def __post_init__(self):
        if self.num_nodes < 1:
            raise DomainError(f"graph needs at least one node, got {self.num_nodes}")
        canon = _canonical_edges(self.edges)
        object.__setattr__(self, "edges", canon)
        seen = set()
        for i, j in canon:
            if i == j:
                raise DomainError(f"self-loop at node {i}")
            if not (0 <= i < self.num_nodes and 0 <= j < self.num_nodes):
                raise DomainError(f"edge ({i}, {j}) out of range for {self.num_nodes} nodes")
            if (i, j) in seen:
                raise DomainError(f"duplicate undirected edge ({i}, {j})")
            seen.add((i, j))
        feats = np.asarray(self.node_features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != self.num_nodes:
            raise DomainError(
                f"node_features must be {self.num_nodes}xM, got shape {feats.shape}"
            )
        feats = np.ascontiguousarray(feats)
        feats.setflags(write=False)
        object.__setattr__(self, "node_features", feats)

    @property
    def feature_dim(self) -> int:
        return self.node_features.shape[1]

    def adjacency(self) -> np.ndarray:
        """Dense symmetric 0/1 adjacency matrix (no self-loops)."""
        a = np.zeros((self.num_nodes, self.num_nodes))
        for i, j in self.edges:
            a[i, j] = 1.0
            a[j, i] = 1.0
        return a

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.num_nodes, dtype=np.int64)
        for i, j in self.edges:
            d[i] += 1
            d[j] += 1
        return d

    def with_features(self, feats: np.ndarray) -> "Graph":
        return Graph(self.num_nodes, self.edges, feats, self.label)

    def with_label(self, label: int | None) -> "Graph":
        return Graph(self.num_nodes, self.edges, self.node_features, label)


@dataclass(frozen=True, eq=False)
class GraphDataset:
    """An ordered collection of graphs under one name."""

    graphs: tuple[Graph, ...]
    name: str = "dataset"

    def __post_init__(self):
        if not self.graphs:
            raise DomainError("dataset must contain at least one graph")
        object.__setattr__(self, "graphs", tuple(self.graphs))

    def __len__(self) -> int:
        return len(self.graphs)

    def __iter__(self) -> Iterator[Graph]:
        return iter(self.graphs)

    def __getitem__(self, idx: int) -> Graph:
        return self.graphs[idx]

    @property
    def class_ids(self) -> tuple[int, ...]:
        return tuple(sorted({g.label for g in self.graphs if g.label is not None}))

    def feature_dim(self) -> int:
        """Common feature dimension; raises if graphs disagree."""
        dims = {g.feature_dim for g in self.graphs}
        if len(dims) != 1:
            raise DomainError(f"graphs have inconsistent feature dims {sorted(dims)}")
        return dims.pop()


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    """Symmetrically normalized adjacency with self-loops inserted.

    matrix[n, j] = (A + I)[n, j] / sqrt(dhat_n * dhat_j) with dhat = 1 + degree.
    Symmetric by construction (bit-exact); diagonal entry n equals 1/dhat_n.
    """

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def num_nodes(self) -> int:
        return self.matrix.shape[0]


def normalized_adjacency(g: Graph) -> NormalizedAdjacency:
    """Insert self-loops and normalize symmetrically by the augmented degrees."""
    ahat = g.adjacency()
    ahat[np.diag_indices_from(ahat)] = 1.0
    dinv = 1.0 / np.sqrt(ahat.sum(axis=1))
    # outer product first keeps the result bit-exactly symmetric
    return NormalizedAdjacency(ahat * (dinv[:, None] * dinv[None, :]))


# ---------------------------------------------------------------------------
# Synthetic generators: binary trees (normal class) and double rings (anomalies)
# ---------------------------------------------------------------------------

def _adjacency_features(num_nodes: int, edges: Sequence[Edge]) -> np.ndarray:
    a = np.zeros((num_nodes, num_nodes))
    for i, j in edges:
        a[i, j] = 1.0
        a[j, i] = 1.0
    return a


def gen_binary_tree(num_nodes: int, rng: np.random.Generator | None = None) -> Graph:
    """A tree in which every node has at most two children.

    Without an rng the canonical heap-shaped tree is returned: node k hangs
    from node (k - 1) // 2. With an rng each node picks a uniformly random
    parent among earlier nodes that still have spare child capacity.
    Node features are the graph's own dense adjacency matrix.
    """
    if num_nodes < 1:
        raise DomainError(f"binary tree needs at least 1 node, got {num_nodes}")
    edges: list[Edge] = []
    if rng is None:
        edges = [((k - 1) // 2, k) for k in range(1, num_nodes)]
    else:
        child_count = [0] * num_nodes
        for k in range(1, num_nodes):
            open_slots = [p for p in range(k) if child_count[p] < 2]
            parent = int(open_slots[rng.integers(len(open_slots))])
            child_count[parent] += 1
            edges.append((parent, k))
    feats = _adjacency_features(num_nodes, edges)
    return Graph(num_nodes, tuple(edges), feats, label=0)


def _double_ring_edges(num_nodes: int, first_ring: int) -> list[Edge]:
    # first ring over nodes 0..first_ring-1, second ring over first_ring-1..n-1;
    # they share node first_ring-1
    shared = first_ring - 1
    ring1 = [(k, (k + 1) % first_ring) for k in range(first_ring)]
    second = [shared] + list(range(first_ring, num_nodes))
    ring2 = [(second[k], second[(k + 1) % len(second)]) for k in range(len(second))]
    return ring1 + ring2


def gen_double_ring(num_nodes: int, rng: np.random.Generator | None = None) -> Graph:
    """Two simple cycles sharing exactly one node.

    Needs num_nodes >= 5 (two length-3 rings sharing a node). Canonical mode
    splits the nodes as evenly as possible, e.g. rings (0,1,2,3) and (3,4,5,6)
    for seven nodes; random mode draws the split uniformly. Node features are
    the dense adjacency matrix.
    """
    if num_nodes < 5:
        raise DomainError(f"double ring needs at least 5 nodes, got {num_nodes}")
    # ring lengths a and b satisfy a + b - 1 = num_nodes, both >= 3
    if rng is None:
        first = (num_nodes + 2) // 2
    else:
        first = int(rng.integers(3, num_nodes - 1))  # leaves b = n + 1 - a >= 3
    edges = _double_ring_edges(num_nodes, first)
    feats = _adjacency_features(num_nodes, edges)
    return Graph(num_nodes, tuple(edges), feats, label=1)


def make_synthetic_dataset(
    count_per_class: int,
    node_count_range: tuple[int, int],
    rng: np.random.Generator | None = None,
    name: str = "synthetic",
) -> GraphDataset:
    """Trees (label 0, normal) plus double rings (label 1, anomalous).

    Node counts are drawn uniformly from the inclusive range. Passing no rng
    produces canonical graphs of the range's lower bound; with an rng both the
    sizes and the individual graph shapes are randomized but fully determined
    by the generator state.
    """
    lo, hi = node_count_range
    if count_per_class < 1:
        raise DomainError(f"count_per_class must be positive, got {count_per_class}")
    if lo < 5 or hi < lo:
        raise DomainError(f"node count range must satisfy 5 <= lo <= hi, got [{lo}, {hi}]")
    graphs: list[Graph] = []
    for _ in range(count_per_class):
        n = lo if rng is None else int(rng.integers(lo, hi + 1))
        graphs.append(gen_binary_tree(n, rng))
    for _ in range(count_per_class):
        n = lo if rng is None else int(rng.integers(lo, hi + 1))
        graphs.append(gen_double_ring(n, rng))
    return GraphDataset(tuple(graphs), name=name)


# ---------------------------------------------------------------------------
# Featurization policies
# ---------------------------------------------------------------------------

FEATURE_POLICIES = ("adjacency", "degree_onehot", "constant_one")


def default_node_features(g: Graph, policy: str, cap: int = 10) -> Graph:
    """Replace a graph's features according to a named policy.

    "adjacency" uses the dense adjacency matrix (feature dim equals the node
    count, so mixed-size datasets become dimensionally inconsistent; meant for
    the analytical pipeline). "degree_onehot" one-hot encodes min(degree, cap)
    into cap + 1 slots. "constant_one" emits a single all-ones column.
    """
    if policy == "adjacency":
        return g.with_features(g.adjacency())
    if policy == "degree_onehot":
        feats = np.zeros((g.num_nodes, cap + 1))
        feats[np.arange(g.num_nodes), np.minimum(g.degrees(), cap)] = 1.0
        return g.with_features(feats)
    if policy == "constant_one":
        return g.with_features(np.ones((g.num_nodes, 1)))
    raise DomainError(f"unknown feature policy {policy!r}; expected one of {FEATURE_POLICIES}")


def apply_feature_policy(ds: GraphDataset, policy: str, cap: int = 10) -> GraphDataset:
    """Apply ``default_node_features`` to every graph in a dataset."""
    return GraphDataset(
        tuple(default_node_features(g, policy, cap) for g in ds.graphs), name=ds.name
    )

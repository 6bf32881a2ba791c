"""Reader and writer for the plain-text benchmark graph format.

A dataset named ``NAME`` inside directory ``root`` consists of:

  NAME_A.txt                one directed edge "i, j" per line, 1-based node ids;
                            undirected graphs list both directions
  NAME_graph_indicator.txt  line k holds the 1-based graph id of node k
  NAME_graph_labels.txt     one integer class label per graph
  NAME_node_labels.txt      optional, one integer label per node (one-hot encoded)
  NAME_node_attributes.txt  optional, comma-separated floats per node

Node ids are global across the whole file and contiguous per graph.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import FormatError, IntegrityError, ParseError
from .graphs import Graph, GraphDataset


def _read_lines(path: str) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read().splitlines()


def _parse_int(text: str, path: str, line_no: int) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ParseError(f"expected integer, got {text.strip()!r}", path=path, line=line_no)


def _parse_int_pair(text: str, path: str, line_no: int) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ParseError(
            f"expected 'i, j', got {text.strip()!r}", path=path, line=line_no
        )
    return (
        _parse_int(parts[0], path, line_no),
        _parse_int(parts[1], path, line_no),
    )


def _parse_floats(text: str, path: str, line_no: int) -> list[float]:
    out = []
    for part in text.split(","):
        try:
            out.append(float(part.strip()))
        except ValueError:
            raise ParseError(
                f"expected float, got {part.strip()!r}", path=path, line=line_no
            )
    return out


def parse_tudataset(root: str, name: str) -> GraphDataset:
    """Load ``name`` from ``root``. Raises FormatError and subclasses on bad input.

    Node labels, when present, are one-hot encoded over the label values seen
    in the file (sorted ascending); node attributes are appended after the
    one-hot block. With neither file present, graphs get an N x 0 feature
    matrix so callers must choose a feature policy explicitly.
    """
    prefix = os.path.join(root, name, name + "_")
    if not os.path.isfile(prefix + "A.txt"):
        # also accept the flat layout root/NAME_A.txt
        prefix = os.path.join(root, name + "_")
    for required in ("A.txt", "graph_indicator.txt", "graph_labels.txt"):
        if not os.path.isfile(prefix + required):
            raise FormatError(f"missing required file {prefix + required}")

    ind_path = prefix + "graph_indicator.txt"
    indicator = [
        _parse_int(text, ind_path, k + 1) for k, text in enumerate(_read_lines(ind_path))
    ]
    num_nodes_total = len(indicator)
    if num_nodes_total == 0:
        raise IntegrityError(f"{ind_path} is empty")
    num_graphs = max(indicator)
    if sorted(set(indicator)) != list(range(1, num_graphs + 1)):
        raise IntegrityError(f"{ind_path} graph ids are not contiguous from 1")
    if indicator != sorted(indicator):
        raise IntegrityError(f"{ind_path} node blocks are not contiguous per graph")

    lab_path = prefix + "graph_labels.txt"
    labels = [
        _parse_int(text, lab_path, k + 1) for k, text in enumerate(_read_lines(lab_path))
    ]
    if len(labels) != num_graphs:
        raise IntegrityError(
            f"{lab_path} has {len(labels)} labels but indicator names {num_graphs} graphs"
        )

    # global node id -> (graph index, local node id)
    first_node = [0] * (num_graphs + 1)
    for gid in indicator:
        first_node[gid] += 1
    sizes = first_node[1:]
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    edge_path = prefix + "A.txt"
    edge_sets: list[set[tuple[int, int]]] = [set() for _ in range(num_graphs)]
    for k, text in enumerate(_read_lines(edge_path)):
        if not text.strip():
            continue
        i, j = _parse_int_pair(text, edge_path, k + 1)
        if not (1 <= i <= num_nodes_total and 1 <= j <= num_nodes_total):
            raise IntegrityError(
                f"{edge_path}:{k + 1}: node id out of range (have {num_nodes_total} nodes)"
            )
        gi, gj = indicator[i - 1], indicator[j - 1]
        if gi != gj:
            raise IntegrityError(
                f"{edge_path}:{k + 1}: edge ({i}, {j}) crosses graphs {gi} and {gj}"
            )
        li = i - 1 - offsets[gi - 1]
        lj = j - 1 - offsets[gi - 1]
        if li == lj:
            raise IntegrityError(f"{edge_path}:{k + 1}: self-loop at node {i}")
        edge_sets[gi - 1].add((min(li, lj), max(li, lj)))

    # optional node feature files
    onehot = None
    nl_path = prefix + "node_labels.txt"
    if os.path.isfile(nl_path):
        node_labels = [
            _parse_int(text, nl_path, k + 1) for k, text in enumerate(_read_lines(nl_path))
        ]
        if len(node_labels) != num_nodes_total:
            raise IntegrityError(
                f"{nl_path} has {len(node_labels)} labels for {num_nodes_total} nodes"
            )
        values = sorted(set(node_labels))
        index = {v: c for c, v in enumerate(values)}
        onehot = np.zeros((num_nodes_total, len(values)))
        for n, v in enumerate(node_labels):
            onehot[n, index[v]] = 1.0

    attrs = None
    na_path = prefix + "node_attributes.txt"
    if os.path.isfile(na_path):
        rows = [
            _parse_floats(text, na_path, k + 1)
            for k, text in enumerate(_read_lines(na_path))
        ]
        if len(rows) != num_nodes_total:
            raise IntegrityError(
                f"{na_path} has {len(rows)} rows for {num_nodes_total} nodes"
            )
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise IntegrityError(f"{na_path} rows have inconsistent widths {sorted(widths)}")
        attrs = np.asarray(rows, dtype=np.float64)

    if onehot is not None and attrs is not None:
        features = np.concatenate([onehot, attrs], axis=1)
    elif onehot is not None:
        features = onehot
    elif attrs is not None:
        features = attrs
    else:
        features = np.zeros((num_nodes_total, 0))

    graphs = []
    for g in range(num_graphs):
        lo, hi = int(offsets[g]), int(offsets[g + 1])
        graphs.append(
            Graph(
                num_nodes=hi - lo,
                edges=tuple(sorted(edge_sets[g])),
                node_features=features[lo:hi],
                label=labels[g],
            )
        )
    return GraphDataset(tuple(graphs), name=name)


def write_tudataset(ds: GraphDataset, root: str, name: str) -> str:
    """Write a dataset in the same text format; returns the dataset directory.

    Edges are emitted as both directed pairs in ascending order so a
    write/parse round trip reproduces the edge lists exactly. Features are
    written as node attributes when any graph has a nonzero feature dim.
    """
    out_dir = os.path.join(root, name)
    os.makedirs(out_dir, exist_ok=True)
    prefix = os.path.join(out_dir, name + "_")

    offsets = [0]
    for g in ds.graphs:
        offsets.append(offsets[-1] + g.num_nodes)

    directed: list[tuple[int, int]] = []
    for gi, g in enumerate(ds.graphs):
        base = offsets[gi] + 1  # 1-based global ids
        for i, j in g.edges:
            directed.append((base + i, base + j))
            directed.append((base + j, base + i))
    directed.sort()

    with open(prefix + "A.txt", "w", encoding="utf-8") as fh:
        for i, j in directed:
            fh.write(f"{i}, {j}\n")
    with open(prefix + "graph_indicator.txt", "w", encoding="utf-8") as fh:
        for gi, g in enumerate(ds.graphs):
            fh.write(f"{gi + 1}\n" * g.num_nodes)
    with open(prefix + "graph_labels.txt", "w", encoding="utf-8") as fh:
        for g in ds.graphs:
            fh.write(f"{0 if g.label is None else g.label}\n")

    if any(g.feature_dim > 0 for g in ds.graphs):
        dims = {g.feature_dim for g in ds.graphs}
        if len(dims) != 1:
            raise FormatError(
                f"cannot write node attributes with mixed feature dims {sorted(dims)}"
            )
        with open(prefix + "node_attributes.txt", "w", encoding="utf-8") as fh:
            for g in ds.graphs:
                for row in np.asarray(g.node_features):
                    fh.write(", ".join(repr(float(v)) for v in row) + "\n")
    return out_dir

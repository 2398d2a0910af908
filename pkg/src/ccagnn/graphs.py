"""Neighborhood construction for frame graphs.

Two modes exist: feature-space k-nearest-neighbors (undirected, binary,
self-looped) and the prior-frame positional encoding, where every node is
connected to its k temporal predecessors inside its own sequence with
linearly decaying weights. Both feed ``normalize_propagation`` to obtain
the matrix used by the graph convolutions.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sparse

from .numeric import Array


class SelfWeightMode(Enum):
    """Self-loop weighting for prior-frame graphs.

    SEQUENTIAL gives each node a self-loop of weight k+1 (distance zero);
    SEQUENTIAL_STAR down-weights it to 1, boosting the neighborhood's
    influence relative to the node itself.
    """

    SEQUENTIAL = "sequential"
    SEQUENTIAL_STAR = "sequential-star"


@dataclass(frozen=True, eq=False)
class Graph:
    """Node features plus a non-negative weighted adjacency.

    ``sequence_bounds`` lists (start, length) spans of independent
    sequences; prior-frame adjacencies never cross those boundaries.
    """

    features: Array
    adjacency: sparse.csr_matrix
    directed: bool
    sequence_bounds: tuple[tuple[int, int], ...] | None = None

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]


def build_knn_graph(features: Array, k: int) -> Graph:
    """Euclidean kNN graph: union-symmetrized, unit weights, unit self-loops.

    Each node links to its k nearest neighbors (self excluded); ties are
    broken by lowest node index. The edge set is symmetrized by union.
    """
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {feats.shape}")
    if not np.isfinite(feats).all():
        raise ValueError("features must be finite")
    n = feats.shape[0]
    if k < 1 or k >= n:
        raise ValueError(f"k must satisfy 1 <= k < n_nodes, got k={k}, n_nodes={n}")

    sq = (feats * feats).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (feats @ feats.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, np.inf)
    # stable sort keeps the lowest index first among equal distances
    neighbors = np.argsort(d2, axis=1, kind="stable")[:, :k]

    rows = np.repeat(np.arange(n), k)
    cols = neighbors.ravel()
    adj = sparse.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    adj = adj.maximum(adj.T)
    adj = (adj + sparse.identity(n, format="csr")).tocsr()
    adj.data[:] = 1.0
    return Graph(features=feats, adjacency=adj, directed=False)


def build_prior_frame_graph(
    sequence_bounds,
    k: int,
    mode: SelfWeightMode = SelfWeightMode.SEQUENTIAL,
) -> sparse.csr_matrix:
    """Weighted directed adjacency connecting each node to its prior frames.

    Node i gets an incoming edge from each of its min(k, position) prior
    frames j with weight k+1 - d, where d is the frame distance, plus a
    self-loop of weight k+1 (SEQUENTIAL) or 1 (SEQUENTIAL_STAR). Row i
    holds the in-neighborhood of node i. Edges never cross a sequence
    boundary; nodes near a sequence start keep truncated neighborhoods.
    """
    bounds = list(sequence_bounds)
    if not bounds:
        raise ValueError("sequence_bounds must not be empty")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    self_weight = float(k + 1) if mode is SelfWeightMode.SEQUENTIAL else 1.0

    expected_start = 0
    rows, cols, weights = [], [], []
    for start, length in bounds:
        if length < 1:
            raise ValueError(f"sequence lengths must be >= 1, got {length}")
        if start != expected_start:
            raise ValueError(f"sequence bounds must tile 0..N contiguously, got start {start}, expected {expected_start}")
        expected_start = start + length
        for pos in range(length):
            i = start + pos
            rows.append(i)
            cols.append(i)
            weights.append(self_weight)
            for d in range(1, min(k, pos) + 1):
                rows.append(i)
                cols.append(i - d)
                weights.append(float(k + 1 - d))
    n = expected_start
    return sparse.csr_matrix((weights, (rows, cols)), shape=(n, n))


def normalize_propagation(graph: Graph) -> sparse.csr_matrix:
    """Normalized propagation matrix for left-multiplying node features.

    Undirected (kNN) graphs get symmetric normalization D^{-1/2} A D^{-1/2};
    directed (prior-frame) graphs get row-stochastic normalization
    D_in^{-1} W, which preserves the direction of temporal flow and makes
    every row sum to one.
    """
    adj = graph.adjacency.tocsr()
    degree = np.asarray(adj.sum(axis=1)).ravel()
    if (degree <= 0).any():
        bad = int(np.argmax(degree <= 0))
        raise ValueError(f"zero-degree node {bad}: every node needs at least a self-loop")
    if graph.directed:
        prop = sparse.diags(1.0 / degree) @ adj
    else:
        d_inv_sqrt = sparse.diags(1.0 / np.sqrt(degree))
        prop = d_inv_sqrt @ adj @ d_inv_sqrt
    return prop.tocsr()

"""Random graph views: edge dropping plus feature-column masking.

A fresh pair of views is sampled every epoch. Self-loops are never
dropped, so augmented graphs always renormalize cleanly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sparse

from .graphs import Graph
from .numeric import Array


@dataclass(frozen=True)
class AugmentConfig:
    edge_drop_rate: float = 0.5
    feature_mask_rate: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("edge_drop_rate", "feature_mask_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {rate}")


def mask_feature_columns(features: Array, rate: float, rng: np.random.Generator) -> Array:
    """Zero a random subset of feature columns, shared across all nodes."""
    masked = np.array(features, dtype=np.float64, copy=True)
    drop = rng.random(masked.shape[1]) < rate
    masked[:, drop] = 0.0
    return masked


def augment(graph: Graph, config: AugmentConfig, rng: np.random.Generator | None = None) -> Graph:
    """Sample one random view of a graph; the input graph is untouched.

    Each non-self-loop edge is dropped independently with probability
    ``edge_drop_rate`` (once per undirected edge on undirected graphs, so
    views stay symmetric), then a column mask of expected fraction
    ``feature_mask_rate`` is applied to the features. Edge decisions are
    drawn before the column mask, so a fixed generator state reproduces a
    view exactly.
    """
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    adj = graph.adjacency.tocoo()
    is_self = adj.row == adj.col

    if graph.directed:
        row, col, data = adj.row[~is_self], adj.col[~is_self], adj.data[~is_self]
        keep = rng.random(row.size) >= config.edge_drop_rate
        row, col, data = row[keep], col[keep], data[keep]
    else:
        # one decision per undirected edge, mirrored to both triangles
        upper = ~is_self & (adj.row < adj.col)
        row_u, col_u, data_u = adj.row[upper], adj.col[upper], adj.data[upper]
        keep = rng.random(row_u.size) >= config.edge_drop_rate
        row_u, col_u, data_u = row_u[keep], col_u[keep], data_u[keep]
        row = np.concatenate([row_u, col_u])
        col = np.concatenate([col_u, row_u])
        data = np.concatenate([data_u, data_u])

    row = np.concatenate([row, adj.row[is_self]])
    col = np.concatenate([col, adj.col[is_self]])
    data = np.concatenate([data, adj.data[is_self]])
    view_adj = sparse.csr_matrix((data, (row, col)), shape=adj.shape)

    view_features = mask_feature_columns(graph.features, config.feature_mask_rate, rng)
    return replace(graph, features=view_features, adjacency=view_adj)

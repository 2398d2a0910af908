"""The canonical-correlation objective and its multimodal combination.

The unimodal loss for two standardized views is

    ||Z_A - Z_B||_F^2 + lam * (||Z_A^T Z_A - I||_F^2 + ||Z_B^T Z_B - I||_F^2)

where the first (invariance) term penalizes disagreement between views and
the second (decorrelation) term pushes distinct feature dimensions apart.
Because standardization scales each column to unit squared sum, the
decorrelation term equals the sum of squared pairwise Pearson correlations
of the embedding columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numeric import Array, Tensor, as_tensor, frobenius_sq, standardize_columns


@dataclass(frozen=True)
class LossConfig:
    """Trade-off weight of the decorrelation term plus channel weights.

    ``alpha`` scales the audio pair loss, ``beta`` the visual pair loss,
    ``gamma`` each of the four cross-channel pair losses. ``lam`` is shared
    by all six pairwise losses.
    """

    lam: float = 0.0001
    alpha: float = 0.5
    beta: float = 0.25
    gamma: float = 0.0625

    def __post_init__(self):
        for name in ("lam", "alpha", "beta", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")


@dataclass
class EmbeddingView:
    """Column-standardized embeddings plus a mask of degenerate columns.

    Columns with zero variance (common with dead ReLU units) are zeroed
    rather than divided by zero; ``degenerate_columns`` flags them.
    """

    values: Tensor
    degenerate_columns: Array

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape


def standardize_embeddings(embeddings) -> EmbeddingView:
    """Standardize columns so each has zero mean and unit squared sum."""
    z, degenerate = standardize_columns(as_tensor(embeddings))
    return EmbeddingView(values=z, degenerate_columns=degenerate)


def _decorrelation(view: EmbeddingView) -> Tensor:
    z = view.values
    return frobenius_sq(z.T @ z - Tensor(np.eye(z.shape[1])))


def _invariance(view_a: EmbeddingView, view_b: EmbeddingView) -> Tensor:
    return frobenius_sq(view_a.values - view_b.values)


def cca_loss(view_a: EmbeddingView, view_b: EmbeddingView, lam: float) -> Tensor:
    """Invariance plus lam-weighted decorrelation for a pair of views."""
    if view_a.shape != view_b.shape:
        raise ValueError(f"view shapes differ: {view_a.shape} vs {view_b.shape}")
    if lam < 0:
        raise ValueError(f"lam must be non-negative, got {lam}")
    return _invariance(view_a, view_b) + lam * (_decorrelation(view_a) + _decorrelation(view_b))


def multimodal_loss(
    z1: EmbeddingView,
    z2: EmbeddingView,
    z3: EmbeddingView,
    z4: EmbeddingView,
    config: LossConfig,
) -> Tensor:
    """Weighted sum of the six pairwise losses across two channels.

    z1/z2 are the audio views, z3/z4 the visual views. The total is
    alpha*L(z1,z2) + beta*L(z3,z4) + gamma*(the four cross-channel pairs),
    every L being the pairwise loss above with the shared lam. Each view's
    decorrelation term is computed once and reused across the pairs that
    contain it.
    """
    if z1.shape != z2.shape:
        raise ValueError(f"audio view shapes differ: {z1.shape} vs {z2.shape}")
    if z3.shape != z4.shape:
        raise ValueError(f"visual view shapes differ: {z3.shape} vs {z4.shape}")
    if z1.shape[1] != z3.shape[1]:
        raise ValueError(
            f"audio and visual embedding widths must match, got {z1.shape[1]} and {z3.shape[1]}"
        )
    lam, a, b, g = config.lam, config.alpha, config.beta, config.gamma
    d1, d2, d3, d4 = (_decorrelation(z) for z in (z1, z2, z3, z4))
    audio = _invariance(z1, z2) + lam * (d1 + d2)
    visual = _invariance(z3, z4) + lam * (d3 + d4)
    cross = (
        _invariance(z1, z3) + lam * (d1 + d3)
        + _invariance(z1, z4) + lam * (d1 + d4)
        + _invariance(z2, z3) + lam * (d2 + d3)
        + _invariance(z2, z4) + lam * (d2 + d4)
    )
    return a * audio + b * visual + g * cross

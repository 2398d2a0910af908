"""Two-stage training: self-supervised pretraining, then a supervised
reconstruction head on frozen features.

Pretraining samples two augmented views of the graph per epoch, pushes
both through the shared encoder, and takes one Adam step on the
canonical-correlation objective. The multimodal variant runs one encoder
per channel and combines six pairwise losses. Labels (clean audio) never
enter pretraining; they are only seen by the reconstruction head.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .augment import AugmentConfig, augment, mask_feature_columns
from .data import AVDataset
from .graphs import Graph, SelfWeightMode, build_knn_graph, build_prior_frame_graph, normalize_propagation
from .loss import EmbeddingView, LossConfig, cca_loss, multimodal_loss, standardize_embeddings
from .metrics import mse
from .model import (
    ActivationStats,
    EncoderParams,
    ReconParams,
    gcn_forward,
    init_encoder_params,
    init_recon_params,
    mlp_forward,
    new_activation_stats,
    recon_forward,
)
from .numeric import Array, adam_step, frobenius_sq, gradients, init_adam_state

# rng sub-stream ids, combined with the config seed as (seed, stream)
_STREAM_AUDIO_INIT = 0
_STREAM_AUDIO_AUGMENT = 1
_STREAM_VISUAL_INIT = 3
_STREAM_VISUAL_AUGMENT = 4
_STREAM_RECON_INIT = 6


class TrainingDivergence(RuntimeError):
    """Raised when a training loss stops being finite."""


@dataclass(frozen=True)
class NeighborhoodConfig:
    """Graph construction choice: "knn", "prior", or "mlp" (no graph)."""

    mode: str = "prior"
    k: int = 30
    self_weight: SelfWeightMode = SelfWeightMode.SEQUENTIAL

    def __post_init__(self):
        if self.mode not in ("knn", "prior", "mlp"):
            raise ValueError(f"mode must be 'knn', 'prior', or 'mlp', got {self.mode!r}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class TrainConfig:
    hidden: int = 512
    pretrain_epochs: int = 5000
    pretrain_lr: float = 0.001
    recon_epochs: int = 600
    recon_lr: float = 0.005
    recon_weight_decay: float = 0.0004
    loss: LossConfig = field(default_factory=LossConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    neighborhood: NeighborhoodConfig = field(default_factory=NeighborhoodConfig)
    seed: int = 0

    def __post_init__(self):
        if self.hidden < 1:
            raise ValueError("hidden must be >= 1")
        if self.pretrain_epochs < 0 or self.recon_epochs < 0:
            raise ValueError("epoch counts must be >= 0")
        if self.pretrain_lr <= 0 or self.recon_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.recon_weight_decay < 0:
            raise ValueError("recon_weight_decay must be >= 0")


def desk_train_config(**overrides) -> TrainConfig:
    """Small-scale defaults: 200 pretraining epochs, 5 prior frames."""
    base = dict(pretrain_epochs=200, neighborhood=NeighborhoodConfig(mode="prior", k=5))
    base.update(overrides)
    return TrainConfig(**base)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


def build_modal_graph(features: Array, bounds, nbr: NeighborhoodConfig) -> Graph | None:
    """Graph for one channel; None in MLP mode (no neighborhood)."""
    if nbr.mode == "mlp":
        return None
    if nbr.mode == "knn":
        return build_knn_graph(features, nbr.k)
    adjacency = build_prior_frame_graph(bounds, nbr.k, nbr.self_weight)
    return Graph(
        features=np.asarray(features, dtype=np.float64),
        adjacency=adjacency,
        directed=True,
        sequence_bounds=tuple(bounds),
    )


def _forward_view(
    graph: Graph | None,
    features: Array,
    params: EncoderParams,
    config: TrainConfig,
    rng: np.random.Generator,
    stats: ActivationStats | None,
):
    """One augmented view through the encoder.

    MLP mode has no edges to drop, so only the feature-column mask
    applies. Graph views are renormalized after edge dropping so the
    propagation matrix keeps its row-sum/symmetry invariants.
    """
    if graph is None:
        masked = mask_feature_columns(features, config.augment.feature_mask_rate, rng)
        return mlp_forward(masked, params, stats)
    view = augment(graph, config.augment, rng)
    prop = normalize_propagation(view)
    return gcn_forward(prop, view.features, params, stats)


def _check_finite(value: float, epoch: int) -> None:
    if not np.isfinite(value):
        raise TrainingDivergence(f"non-finite pretraining loss at epoch {epoch}")


def _apply_step(params_tensors, loss_tensor, state, lr, weight_decay=0.0):
    grads = gradients(loss_tensor, params_tensors)
    new_data, state = adam_step([t.data for t in params_tensors], grads, state, lr, weight_decay)
    for tensor, data in zip(params_tensors, new_data):
        tensor.data = data
    return state


def pretrain_unimodal(dataset: AVDataset, config: TrainConfig):
    """Self-supervised pretraining on the noisy-audio channel.

    Returns (encoder params, activation stats, per-epoch loss curve).
    """
    if dataset.n_frames == 0:
        raise ValueError("dataset is empty")
    features = dataset.noisy_audio
    graph = build_modal_graph(features, dataset.sequence_bounds, config.neighborhood)
    params = init_encoder_params(features.shape[1], config.hidden, _rng(config.seed, _STREAM_AUDIO_INIT))
    stats = new_activation_stats(config.hidden)
    state = init_adam_state([t.data for t in params.tensors()])
    rng_aug = _rng(config.seed, _STREAM_AUDIO_AUGMENT)
    curve: list[float] = []
    for epoch in range(config.pretrain_epochs):
        view_a = _forward_view(graph, features, params, config, rng_aug, stats)
        view_b = _forward_view(graph, features, params, config, rng_aug, stats)
        loss = cca_loss(standardize_embeddings(view_a), standardize_embeddings(view_b), config.loss.lam)
        value = float(loss.data)
        _check_finite(value, epoch)
        state = _apply_step(params.tensors(), loss, state, config.pretrain_lr)
        curve.append(value)
    return params, stats, curve


def pretrain_multimodal(dataset: AVDataset, config: TrainConfig):
    """Joint pretraining of one encoder per channel with the combined loss.

    Returns (audio params, visual params, (audio stats, visual stats),
    per-epoch loss curve). The four views are sampled independently, one
    rng stream per channel.
    """
    if dataset.n_frames == 0:
        raise ValueError("dataset is empty")
    audio = dataset.noisy_audio
    visual = dataset.visual
    graph_a = build_modal_graph(audio, dataset.sequence_bounds, config.neighborhood)
    graph_v = build_modal_graph(visual, dataset.sequence_bounds, config.neighborhood)
    params_a = init_encoder_params(audio.shape[1], config.hidden, _rng(config.seed, _STREAM_AUDIO_INIT))
    params_v = init_encoder_params(visual.shape[1], config.hidden, _rng(config.seed, _STREAM_VISUAL_INIT))
    stats_a = new_activation_stats(config.hidden)
    stats_v = new_activation_stats(config.hidden)
    all_tensors = params_a.tensors() + params_v.tensors()
    state = init_adam_state([t.data for t in all_tensors])
    rng_a = _rng(config.seed, _STREAM_AUDIO_AUGMENT)
    rng_v = _rng(config.seed, _STREAM_VISUAL_AUGMENT)
    curve: list[float] = []
    for epoch in range(config.pretrain_epochs):
        z1 = standardize_embeddings(_forward_view(graph_a, audio, params_a, config, rng_a, stats_a))
        z2 = standardize_embeddings(_forward_view(graph_a, audio, params_a, config, rng_a, stats_a))
        z3 = standardize_embeddings(_forward_view(graph_v, visual, params_v, config, rng_v, stats_v))
        z4 = standardize_embeddings(_forward_view(graph_v, visual, params_v, config, rng_v, stats_v))
        loss = multimodal_loss(z1, z2, z3, z4, config.loss)
        value = float(loss.data)
        _check_finite(value, epoch)
        state = _apply_step(all_tensors, loss, state, config.pretrain_lr)
        curve.append(value)
    return params_a, params_v, (stats_a, stats_v), curve


def encode(features: Array, bounds, params: EncoderParams, nbr: NeighborhoodConfig) -> Array:
    """Embeddings of the un-augmented graph (or raw features in MLP mode)."""
    graph = build_modal_graph(features, bounds, nbr)
    if graph is None:
        return mlp_forward(features, params).data
    return gcn_forward(normalize_propagation(graph), graph.features, params).data


def train_reconstruction(
    embeddings: Array,
    clean: Array,
    config: TrainConfig,
    val_embeddings: Array | None = None,
    val_clean: Array | None = None,
):
    """Fit the dense reconstruction head on frozen embeddings.

    Minimizes the mean squared reconstruction error with Adam and the
    configured weight decay. Returns (head params, curves) where curves
    maps "train" (and "val", when a validation pair is given) to
    per-epoch MSE values.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    clean = np.asarray(clean, dtype=np.float64)
    if embeddings.shape[0] != clean.shape[0]:
        raise ValueError(f"row counts differ: {embeddings.shape[0]} vs {clean.shape[0]}")
    if (val_embeddings is None) != (val_clean is None):
        raise ValueError("validation embeddings and targets must be given together")
    params = init_recon_params(embeddings.shape[1], clean.shape[1], _rng(config.seed, _STREAM_RECON_INIT))
    state = init_adam_state([t.data for t in params.tensors()])
    curves: dict[str, list[float]] = {"train": []}
    if val_embeddings is not None:
        curves["val"] = []
    scale = 1.0 / clean.size
    for epoch in range(config.recon_epochs):
        pred = recon_forward(embeddings, params)
        loss = frobenius_sq(pred - clean) * scale
        value = float(loss.data)
        if not np.isfinite(value):
            raise TrainingDivergence(f"non-finite reconstruction loss at epoch {epoch}")
        curves["train"].append(value)
        if val_embeddings is not None:
            curves["val"].append(mse(val_clean, recon_forward(val_embeddings, params).data))
        state = _apply_step(params.tensors(), loss, state, config.recon_lr, config.recon_weight_decay)
    return params, curves


@dataclass
class RunReport:
    """Everything one training run produced, reproducible from its config."""

    config: dict[str, str]
    pretrain_loss: list[float]
    recon_train: list[float]
    recon_val: list[float]
    test_mse: float
    activation_rates: dict[str, Array]  # channel -> rates sorted descending
    activation_auc: dict[str, float]


def save_run_report(report: RunReport, directory) -> None:
    """Write curve files plus a flat key=value summary into a directory."""
    import os

    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "pretrain_loss.csv"), "w") as fh:
        fh.write("epoch,loss\n")
        for e, v in enumerate(report.pretrain_loss):
            fh.write(f"{e},{v!r}\n")
    with open(os.path.join(directory, "recon_mse.csv"), "w") as fh:
        fh.write("epoch,train_mse,val_mse\n")
        for e, (t, v) in enumerate(zip(report.recon_train, report.recon_val)):
            fh.write(f"{e},{t!r},{v!r}\n")
    for channel, rates in report.activation_rates.items():
        with open(os.path.join(directory, f"activation_{channel}.csv"), "w") as fh:
            fh.write("rank,rate\n")
            for r, v in enumerate(rates):
                fh.write(f"{r},{v!r}\n")
    with open(os.path.join(directory, "summary.txt"), "w") as fh:
        for key, value in report.config.items():
            fh.write(f"config.{key}={value}\n")
        fh.write(f"test_mse={report.test_mse!r}\n")
        for channel, auc in report.activation_auc.items():
            fh.write(f"activation_auc.{channel}={auc!r}\n")

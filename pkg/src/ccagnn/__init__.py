"""Self-supervised canonical-correlation graph networks for audio-visual
speech enhancement: graph construction, training, metrics, and a
Wiener-filter enhancement stage, plus a batch experiment CLI."""

from .augment import AugmentConfig, augment
from .data import (
    AVDataset,
    LogFBConfig,
    SynthConfig,
    extract_logfb,
    load_dataset,
    save_dataset,
    split_folds,
    synthesize_av_dataset,
)
from .enhance import FilterbankOperator, enhance_waveform, inverse_filterbank, make_filterbank_operator, wiener_gain
from .graphs import Graph, SelfWeightMode, build_knn_graph, build_prior_frame_graph, normalize_propagation
from .loss import EmbeddingView, LossConfig, cca_loss, multimodal_loss, standardize_embeddings
from .metrics import area_under_curve, activation_rate_curve, mse, segmental_snr, wilcoxon_signed_rank
from .model import (
    ActivationStats,
    EncoderParams,
    ReconParams,
    gcn_forward,
    init_encoder_params,
    init_recon_params,
    mlp_forward,
    recon_forward,
)
from .numeric import AdamState, Tensor, adam_step, finite_difference_gradient, gradients, init_adam_state
from .train import (
    NeighborhoodConfig,
    RunReport,
    TrainConfig,
    TrainingDivergence,
    desk_train_config,
    encode,
    pretrain_multimodal,
    pretrain_unimodal,
    train_reconstruction,
)

__version__ = "0.1.0"

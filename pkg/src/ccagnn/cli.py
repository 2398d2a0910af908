"""Batch experiment runner and command-line entry points.

Verbs: ``synth`` (generate a dataset), ``train`` (run a configured
experiment over folds), ``compare`` (Wilcoxon tests across finished
runs), ``enhance`` (Wiener-filter a waveform with a trained model), and
``features`` (log-FB extraction). Experiments are configured through an
INI-style file with nested sections; unknown sections or keys are hard
errors so hyperparameter typos cannot pass silently.
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import (
    AVDataset,
    LogFBConfig,
    SynthConfig,
    extract_logfb,
    load_dataset,
    read_waveform,
    save_dataset,
    split_folds,
    synthesize_av_dataset,
    write_waveform,
)
from .augment import AugmentConfig
from .enhance import enhance_waveform
from .graphs import SelfWeightMode
from .loss import LossConfig
from .metrics import activation_rate_curve, area_under_curve, mse, segmental_snr, wilcoxon_signed_rank
from .model import EncoderParams, ReconParams, load_checkpoint, recon_forward, save_checkpoint
from .numeric import Tensor
from .train import (
    NeighborhoodConfig,
    RunReport,
    TrainConfig,
    TrainingDivergence,
    encode,
    pretrain_multimodal,
    pretrain_unimodal,
    save_run_report,
    train_reconstruction,
)

VARIANTS = ("mlp", "gnn-knn", "gnn-prior")
_VARIANT_MODE = {"mlp": "mlp", "gnn-knn": "knn", "gnn-prior": "prior"}
_SELF_WEIGHTS = {m.value: m for m in SelfWeightMode}

PROFILES = {
    "desk": dict(folds=2, sequences_per_fold=5, pretrain_epochs=200, k=5),
    "paper": dict(folds=15, sequences_per_fold=50, pretrain_epochs=5000, k=30),
}

_SCHEMA = {
    "experiment": {"variant", "multimodal", "folds", "sequences_per_fold", "seed", "workers", "out"},
    "dataset": {"path"},
    "synth": {
        "latent_dim",
        "temporal_coefficient",
        "audio_noise",
        "visual_noise",
        "interference_snr_db",
        "frames_per_sequence",
    },
    "train": {"hidden", "pretrain_epochs", "pretrain_lr", "recon_epochs", "recon_lr", "recon_weight_decay"},
    "loss": {"lambda", "alpha", "beta", "gamma"},
    "augment": {"edge_drop_rate", "feature_mask_rate"},
    "neighborhood": {"k", "self_weight"},
    "metrics": {"activation", "enhancement"},
}

ENHANCEMENT_SNRS_DB = (-6.0, 0.0, 6.0)


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the field."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved settings for one experiment run."""

    variant: str = "gnn-prior"
    multimodal: bool = True
    folds: int = 2
    sequences_per_fold: int = 5
    seed: int = 0
    workers: int = 1
    out_dir: str = "runs/experiment"
    dataset_path: str | None = None
    synth: SynthConfig = field(default_factory=SynthConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    report_activation: bool = True
    report_enhancement: bool = False


def _read_raw_config(path) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file: {exc}") from None
    raw: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
        raw[section] = dict(parser[section])
    return raw


def _get(raw, section, key, parse, default):
    value = raw.get(section, {}).get(key)
    if value is None:
        return default
    try:
        return parse(value)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {value!r}") from None


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(value)


def load_experiment_config(
    path=None,
    profile: str = "desk",
    seed: int | None = None,
    out: str | None = None,
    workers: int | None = None,
) -> ExperimentConfig:
    """Resolve profile defaults, the config file, and CLI overrides."""
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}, expected one of {sorted(PROFILES)}")
    prof = PROFILES[profile]
    raw = _read_raw_config(path) if path is not None else {}

    variant = _get(raw, "experiment", "variant", str, "gnn-prior")
    if variant not in VARIANTS:
        raise ConfigError(f"[experiment] variant: expected one of {VARIANTS}, got {variant!r}")
    self_weight_name = _get(raw, "neighborhood", "self_weight", str, SelfWeightMode.SEQUENTIAL.value)
    if self_weight_name not in _SELF_WEIGHTS:
        raise ConfigError(
            f"[neighborhood] self_weight: expected one of {sorted(_SELF_WEIGHTS)}, got {self_weight_name!r}"
        )

    resolved_seed = seed if seed is not None else _get(raw, "experiment", "seed", int, 0)
    resolved_out = out if out is not None else _get(raw, "experiment", "out", str, f"runs/{profile}")
    resolved_workers = workers if workers is not None else _get(raw, "experiment", "workers", int, 1)
    folds = _get(raw, "experiment", "folds", int, prof["folds"])
    seq_per_fold = _get(raw, "experiment", "sequences_per_fold", int, prof["sequences_per_fold"])

    try:
        loss_cfg = LossConfig(
            lam=_get(raw, "loss", "lambda", float, 0.0001),
            alpha=_get(raw, "loss", "alpha", float, 0.5),
            beta=_get(raw, "loss", "beta", float, 0.25),
            gamma=_get(raw, "loss", "gamma", float, 0.0625),
        )
        augment_cfg = AugmentConfig(
            edge_drop_rate=_get(raw, "augment", "edge_drop_rate", float, 0.5),
            feature_mask_rate=_get(raw, "augment", "feature_mask_rate", float, 0.5),
        )
        neighborhood = NeighborhoodConfig(
            mode=_VARIANT_MODE[variant],
            k=_get(raw, "neighborhood", "k", int, prof["k"]),
            self_weight=_SELF_WEIGHTS[self_weight_name],
        )
        train_cfg = TrainConfig(
            hidden=_get(raw, "train", "hidden", int, 512),
            pretrain_epochs=_get(raw, "train", "pretrain_epochs", int, prof["pretrain_epochs"]),
            pretrain_lr=_get(raw, "train", "pretrain_lr", float, 0.001),
            recon_epochs=_get(raw, "train", "recon_epochs", int, 600),
            recon_lr=_get(raw, "train", "recon_lr", float, 0.005),
            recon_weight_decay=_get(raw, "train", "recon_weight_decay", float, 0.0004),
            loss=loss_cfg,
            augment=augment_cfg,
            neighborhood=neighborhood,
            seed=resolved_seed,
        )
        synth_cfg = SynthConfig(
            n_sequences=folds * seq_per_fold,
            frames_per_sequence=_get(raw, "synth", "frames_per_sequence", int, 48),
            latent_dim=_get(raw, "synth", "latent_dim", int, 8),
            temporal_coefficient=_get(raw, "synth", "temporal_coefficient", float, 0.9),
            audio_noise=_get(raw, "synth", "audio_noise", float, 0.1),
            visual_noise=_get(raw, "synth", "visual_noise", float, 0.1),
            interference_snr_db=_get(raw, "synth", "interference_snr_db", float, 0.0),
            rng_seed=resolved_seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    dataset_path = _get(raw, "dataset", "path", str, None)
    if dataset_path is not None and not os.path.exists(dataset_path):
        raise ConfigError(f"[dataset] path: no such file {dataset_path!r}")

    return ExperimentConfig(
        variant=variant,
        multimodal=_get(raw, "experiment", "multimodal", _parse_bool, True),
        folds=folds,
        sequences_per_fold=seq_per_fold,
        seed=resolved_seed,
        workers=resolved_workers,
        out_dir=resolved_out,
        dataset_path=dataset_path,
        synth=synth_cfg,
        train=train_cfg,
        report_activation=_get(raw, "metrics", "activation", _parse_bool, True),
        report_enhancement=_get(raw, "metrics", "enhancement", _parse_bool, False),
    )


def config_echo(cfg: ExperimentConfig) -> dict[str, str]:
    """Flat view of every resolved setting, embedded in run summaries.

    The output directory is deliberately excluded so reruns to different
    locations stay byte-identical.
    """
    echo = {
        "experiment.variant": cfg.variant,
        "experiment.multimodal": str(cfg.multimodal).lower(),
        "experiment.folds": str(cfg.folds),
        "experiment.sequences_per_fold": str(cfg.sequences_per_fold),
        "experiment.seed": str(cfg.seed),
        "dataset.path": cfg.dataset_path or "(synthetic)",
        "train.hidden": str(cfg.train.hidden),
        "train.pretrain_epochs": str(cfg.train.pretrain_epochs),
        "train.pretrain_lr": repr(cfg.train.pretrain_lr),
        "train.recon_epochs": str(cfg.train.recon_epochs),
        "train.recon_lr": repr(cfg.train.recon_lr),
        "train.recon_weight_decay": repr(cfg.train.recon_weight_decay),
        "loss.lambda": repr(cfg.train.loss.lam),
        "loss.alpha": repr(cfg.train.loss.alpha),
        "loss.beta": repr(cfg.train.loss.beta),
        "loss.gamma": repr(cfg.train.loss.gamma),
        "augment.edge_drop_rate": repr(cfg.train.augment.edge_drop_rate),
        "augment.feature_mask_rate": repr(cfg.train.augment.feature_mask_rate),
        "neighborhood.mode": cfg.train.neighborhood.mode,
        "neighborhood.k": str(cfg.train.neighborhood.k),
        "neighborhood.self_weight": cfg.train.neighborhood.self_weight.value,
        "metrics.activation": str(cfg.report_activation).lower(),
        "metrics.enhancement": str(cfg.report_enhancement).lower(),
    }
    if cfg.dataset_path is None:
        echo.update(
            {
                "synth.frames_per_sequence": str(cfg.synth.frames_per_sequence),
                "synth.latent_dim": str(cfg.synth.latent_dim),
                "synth.temporal_coefficient": repr(cfg.synth.temporal_coefficient),
                "synth.audio_noise": repr(cfg.synth.audio_noise),
                "synth.visual_noise": repr(cfg.synth.visual_noise),
                "synth.interference_snr_db": repr(cfg.synth.interference_snr_db),
            }
        )
    return echo


def _fold_seed(seed: int, fold: int) -> int:
    return seed * 100003 + fold


def _checkpoint_payload(cfg, params_audio, params_visual, recon):
    tensors = {}
    for prefix, enc in (("audio", params_audio), ("visual", params_visual)):
        if enc is None:
            continue
        tensors[f"{prefix}.layer1_weights"] = enc.layer1_weights.data
        tensors[f"{prefix}.layer1_bias"] = enc.layer1_bias.data
        tensors[f"{prefix}.layer2_weights"] = enc.layer2_weights.data
        tensors[f"{prefix}.layer2_bias"] = enc.layer2_bias.data
    tensors["recon.weights"] = recon.weights.data
    tensors["recon.bias"] = recon.bias.data
    meta = {
        "multimodal": str(params_visual is not None).lower(),
        "mode": cfg.train.neighborhood.mode,
        "k": str(cfg.train.neighborhood.k),
        "self_weight": cfg.train.neighborhood.self_weight.value,
        "hidden": str(cfg.train.hidden),
    }
    return tensors, meta


def _encoder_from_checkpoint(tensors, prefix: str) -> EncoderParams:
    return EncoderParams(
        layer1_weights=Tensor(tensors[f"{prefix}.layer1_weights"]),
        layer1_bias=Tensor(tensors[f"{prefix}.layer1_bias"]),
        layer2_weights=Tensor(tensors[f"{prefix}.layer2_weights"]),
        layer2_bias=Tensor(tensors[f"{prefix}.layer2_bias"]),
    )


def run_fold(fold_idx: int, fold_dataset: AVDataset, n_train_seq: int, n_val_seq: int, cfg: ExperimentConfig) -> dict:
    """Train one fold and write its report directory; returns summary numbers.

    The fold's sequences arrive ordered train, validation, test. The
    encoder is pretrained self-supervised on the whole fold graph, then
    the reconstruction head is fit on the train rows only.
    """
    bounds = fold_dataset.sequence_bounds
    train_frames = sum(length for _, length in bounds[:n_train_seq])
    val_frames = sum(length for _, length in bounds[n_train_seq : n_train_seq + n_val_seq])
    train_rows = np.arange(train_frames)
    val_rows = np.arange(train_frames, train_frames + val_frames)
    test_rows = np.arange(train_frames + val_frames, fold_dataset.n_frames)

    tcfg = replace(cfg.train, seed=_fold_seed(cfg.seed, fold_idx))
    nbr = tcfg.neighborhood
    if cfg.multimodal:
        params_a, params_v, (stats_a, stats_v), curve = pretrain_multimodal(fold_dataset, tcfg)
        emb = np.hstack(
            [
                encode(fold_dataset.noisy_audio, bounds, params_a, nbr),
                encode(fold_dataset.visual, bounds, params_v, nbr),
            ]
        )
        stats_by_channel = {"audio": stats_a, "visual": stats_v}
    else:
        params_a, stats_a, curve = pretrain_unimodal(fold_dataset, tcfg)
        params_v = None
        emb = encode(fold_dataset.noisy_audio, bounds, params_a, nbr)
        stats_by_channel = {"audio": stats_a}

    encoder_before = [t.data.copy() for t in params_a.tensors()]
    recon, recon_curves = train_reconstruction(
        emb[train_rows],
        fold_dataset.clean_audio[train_rows],
        tcfg,
        val_embeddings=emb[val_rows] if val_rows.size else None,
        val_clean=fold_dataset.clean_audio[val_rows] if val_rows.size else None,
    )
    for before, tensor in zip(encoder_before, params_a.tensors()):
        if not np.array_equal(before, tensor.data):
            raise RuntimeError("encoder parameters changed during reconstruction training")

    test_mse = mse(
        fold_dataset.clean_audio[test_rows],
        recon_forward(emb[test_rows], recon).data,
    )

    rates = {}
    aucs = {}
    if cfg.report_activation and tcfg.pretrain_epochs > 0:
        for channel, stats in stats_by_channel.items():
            curve_ch = activation_rate_curve(stats)
            rates[channel] = curve_ch
            aucs[channel] = area_under_curve(curve_ch)

    echo = dict(config_echo(cfg))
    echo["fold"] = str(fold_idx)
    echo["fold_seed"] = str(tcfg.seed)
    report = RunReport(
        config=echo,
        pretrain_loss=curve,
        recon_train=recon_curves["train"],
        recon_val=recon_curves.get("val", [float("nan")] * len(recon_curves["train"])),
        test_mse=test_mse,
        activation_rates=rates,
        activation_auc=aucs,
    )
    fold_dir = os.path.join(cfg.out_dir, f"fold_{fold_idx:02d}")
    save_run_report(report, fold_dir)
    tensors, meta = _checkpoint_payload(cfg, params_a, params_v, recon)
    save_checkpoint(os.path.join(fold_dir, "model.ckpt"), tensors, meta)
    return {"fold": fold_idx, "test_mse": test_mse, "activation_auc": aucs}


def _run_fold_job(args):
    return run_fold(*args)


def _enhancement_table(seed: int) -> list[dict]:
    """Oracle-feature Wiener enhancement on tone-plus-noise test signals.

    The synthetic dataset has no waveforms, so this table exercises the
    enhancement stage with the clean signal's own features at a few
    interference levels.
    """
    cfg = LogFBConfig()
    duration = cfg.sample_rate  # one second
    t = np.arange(duration) / cfg.sample_rate
    rows = []
    for idx, snr_db in enumerate(ENHANCEMENT_SNRS_DB):
        rng = np.random.default_rng([seed, 300 + idx])
        clean = 0.6 * np.sin(2 * math.pi * 440.0 * t) + 0.3 * np.sin(2 * math.pi * 1330.0 * t)
        noise = rng.normal(size=duration)
        noise *= math.sqrt(float((clean**2).mean()) / (float((noise**2).mean()) * 10.0 ** (snr_db / 10.0)))
        noisy = clean + noise
        features = extract_logfb(clean, cfg)
        usable = cfg.hop * (features.shape[0] - 1) + cfg.frame_length
        enhanced = enhance_waveform(noisy, features, cfg)
        before = segmental_snr(clean[:usable], noisy[:usable], cfg.frame_length)
        after = segmental_snr(clean[:usable], enhanced[:usable], cfg.frame_length)
        rows.append(
            {"snr_db": snr_db, "input_segsnr": before, "enhanced_segsnr": after, "improvement": after - before}
        )
    return rows


def _write_aggregate(cfg: ExperimentConfig, fold_results: list[dict]) -> None:
    out = cfg.out_dir
    mses = [r["test_mse"] for r in fold_results]
    with open(os.path.join(out, "fold_mses.csv"), "w") as fh:
        fh.write("fold,test_mse\n")
        for r in fold_results:
            fh.write(f"{r['fold']},{r['test_mse']!r}\n")

    channels = sorted({ch for r in fold_results for ch in r["activation_auc"]})
    with open(os.path.join(out, "mse_table.csv"), "w") as fh:
        fh.write("variant,multimodal,neighbors,mse_mean,mse_std\n")
        fh.write(
            f"{cfg.variant},{str(cfg.multimodal).lower()},{cfg.train.neighborhood.k},"
            f"{np.mean(mses)!r},{np.std(mses)!r}\n"
        )
    if channels:
        with open(os.path.join(out, "auc_table.csv"), "w") as fh:
            fh.write("channel,auc_mean,auc_std\n")
            for ch in channels:
                vals = [r["activation_auc"][ch] for r in fold_results]
                fh.write(f"{ch},{np.mean(vals)!r},{np.std(vals)!r}\n")

    enhancement_rows = _enhancement_table(cfg.seed) if cfg.report_enhancement else []
    if enhancement_rows:
        with open(os.path.join(out, "enhancement.csv"), "w") as fh:
            fh.write("snr_db,input_segsnr,enhanced_segsnr,improvement\n")
            for row in enhancement_rows:
                fh.write(
                    f"{row['snr_db']!r},{row['input_segsnr']!r},{row['enhanced_segsnr']!r},{row['improvement']!r}\n"
                )

    with open(os.path.join(out, "summary.txt"), "w") as fh:
        for key, value in config_echo(cfg).items():
            fh.write(f"config.{key}={value}\n")
        for r in fold_results:
            fh.write(f"fold_test_mse.{r['fold']}={r['test_mse']!r}\n")
        fh.write(f"test_mse_mean={np.mean(mses)!r}\n")
        fh.write(f"test_mse_std={np.std(mses)!r}\n")
        for ch in channels:
            vals = [r["activation_auc"][ch] for r in fold_results]
            fh.write(f"activation_auc_mean.{ch}={np.mean(vals)!r}\n")
        for row in enhancement_rows:
            fh.write(f"enhancement.segsnr_improvement_at_{row['snr_db']:g}dB={row['improvement']!r}\n")
        fh.write("note=pairwise Wilcoxon decisions come from 'ccagnn compare' across run directories\n")


def run_experiment(
    config_path=None,
    profile: str = "desk",
    seed: int | None = None,
    out: str | None = None,
    workers: int | None = None,
) -> int:
    """Run the configured experiment end to end; returns a process exit code."""
    try:
        cfg = load_experiment_config(config_path, profile=profile, seed=seed, out=out, workers=workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    os.makedirs(cfg.out_dir, exist_ok=True)
    try:
        if cfg.dataset_path is not None:
            dataset = load_dataset(cfg.dataset_path)
        else:
            dataset = synthesize(cfg)
        splits = split_folds(
            dataset,
            n_folds=cfg.folds,
            seq_per_fold=cfg.sequences_per_fold,
            rng=np.random.default_rng([cfg.seed, 101]),
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    jobs = []
    for fold_idx, split in enumerate(splits):
        fold_dataset = dataset.subset(split.all_sequences)
        jobs.append((fold_idx, fold_dataset, len(split.train), len(split.validation), cfg))

    try:
        if cfg.workers > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                fold_results = list(pool.map(_run_fold_job, jobs))
        else:
            fold_results = [_run_fold_job(job) for job in jobs]
    except TrainingDivergence as exc:
        with open(os.path.join(cfg.out_dir, "FAILED"), "w") as fh:
            fh.write(f"{exc}\n")
        print(f"training diverged: {exc}", file=sys.stderr)
        return 1

    _write_aggregate(cfg, fold_results)
    return 0


def synthesize(cfg: ExperimentConfig) -> AVDataset:
    return synthesize_av_dataset(cfg.synth, np.random.default_rng([cfg.seed, 100]))


def _load_fold_mses(run_dir) -> list[float]:
    path = os.path.join(run_dir, "fold_mses.csv")
    if not os.path.exists(path):
        raise ValueError(f"{run_dir}: missing fold_mses.csv (not a finished run directory?)")
    with open(path) as fh:
        lines = fh.read().splitlines()[1:]
    return [float(line.split(",")[1]) for line in lines]


def compare_runs(report_paths, alpha: float = 0.05) -> str:
    """Pairwise Wilcoxon signed-rank comparison of per-fold test MSEs.

    Runs must have matching fold counts. Significantly better runs (lower
    MSE at the given level) are marked as winners in the returned table.
    """
    if len(report_paths) < 2:
        raise ValueError("need at least two runs to compare")
    runs = [(str(p), _load_fold_mses(p)) for p in report_paths]
    n_folds = len(runs[0][1])
    for name, mses in runs:
        if len(mses) != n_folds:
            raise ValueError(f"{name}: fold count {len(mses)} does not match {n_folds}")

    lines = [f"pairwise Wilcoxon signed-rank on per-fold test MSE, alpha={alpha:g}", ""]
    for name, mses in runs:
        lines.append(f"run {name}: mean={np.mean(mses):.6g} std={np.std(mses):.6g} folds={len(mses)}")
    lines.append("")
    lines.append(f"{'run A':<30} {'run B':<30} {'W+':>8} {'p':>12} decision")
    for i in range(len(runs)):
        for j in range(i + 1, len(runs)):
            (name_a, mses_a), (name_b, mses_b) = runs[i], runs[j]
            try:
                stat, p, reject = wilcoxon_signed_rank(mses_a, mses_b, alpha=alpha)
            except ValueError as exc:
                if "degenerate" in str(exc):
                    lines.append(f"{name_a:<30} {name_b:<30} {'-':>8} {'-':>12} no difference")
                    continue
                raise
            if reject:
                winner = name_a if np.mean(mses_a) < np.mean(mses_b) else name_b
                decision = f"winner: {winner}"
            else:
                decision = "not significant"
            lines.append(f"{name_a:<30} {name_b:<30} {stat:>8.1f} {p:>12.6g} {decision}")
    return "\n".join(lines) + "\n"


def _cmd_train(args) -> int:
    return run_experiment(
        args.config,
        profile=args.profile,
        seed=args.seed,
        out=args.out,
        workers=args.workers,
    )


def _cmd_synth(args) -> int:
    try:
        cfg = load_experiment_config(args.config, profile=args.profile, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    synth = cfg.synth
    if args.sequences is not None:
        synth = replace(synth, n_sequences=args.sequences)
    if args.frames is not None:
        synth = replace(synth, frames_per_sequence=args.frames)
    dataset = synthesize_av_dataset(synth, np.random.default_rng([cfg.seed, 100]))
    save_dataset(dataset, args.out)
    print(f"wrote {dataset.n_sequences} sequences ({dataset.n_frames} frames) to {args.out}")
    return 0


def _cmd_features(args) -> int:
    samples, rate = read_waveform(args.input)
    cfg = LogFBConfig(sample_rate=rate) if rate is not None else LogFBConfig()
    features = extract_logfb(samples, cfg)
    with open(args.output, "w") as fh:
        fh.write(",".join(f"band_{i:02d}" for i in range(features.shape[1])) + "\n")
        for row in features:
            fh.write(",".join(repr(v) for v in row) + "\n")
    print(f"wrote {features.shape[0]} frames x {features.shape[1]} bands to {args.output}")
    return 0


def _cmd_enhance(args) -> int:
    tensors, meta = load_checkpoint(args.model)
    if meta.get("multimodal") == "true":
        print(
            "error: enhancement from a waveform needs an audio-only model; "
            "multimodal checkpoints require visual features that a waveform does not carry",
            file=sys.stderr,
        )
        return 2
    samples, rate = read_waveform(args.input)
    cfg = LogFBConfig(sample_rate=rate) if rate is not None else LogFBConfig()
    features = extract_logfb(samples, cfg)
    encoder = _encoder_from_checkpoint(tensors, "audio")
    recon = ReconParams(weights=Tensor(tensors["recon.weights"]), bias=Tensor(tensors["recon.bias"]))
    nbr = NeighborhoodConfig(
        mode=meta["mode"],
        k=int(meta["k"]),
        self_weight=_SELF_WEIGHTS[meta["self_weight"]],
    )
    embeddings = encode(features, [(0, features.shape[0])], encoder, nbr)
    estimated = recon_forward(embeddings, recon).data
    enhanced = enhance_waveform(samples, estimated, cfg)
    write_waveform(args.output, enhanced, rate if rate is not None else cfg.sample_rate)
    print(f"wrote enhanced waveform to {args.output}")
    return 0


def _cmd_compare(args) -> int:
    try:
        table = compare_runs(args.runs, alpha=args.alpha)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(table)
    print(table, end="")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ccagnn",
        description="Self-supervised canonical-correlation graph networks for AV speech enhancement",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a batch experiment from a config file")
    p_train.add_argument("--config", default=None, help="INI experiment config (optional)")
    p_train.add_argument("--profile", default="desk", choices=sorted(PROFILES))
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--out", default=None, help="output directory")
    p_train.add_argument("--workers", type=int, default=None, help="parallel fold workers")
    p_train.set_defaults(func=_cmd_train)

    p_synth = sub.add_parser("synth", help="generate a synthetic AV dataset file")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--config", default=None)
    p_synth.add_argument("--profile", default="desk", choices=sorted(PROFILES))
    p_synth.add_argument("--seed", type=int, default=None)
    p_synth.add_argument("--sequences", type=int, default=None)
    p_synth.add_argument("--frames", type=int, default=None)
    p_synth.set_defaults(func=_cmd_synth)

    p_feat = sub.add_parser("features", help="extract log-FB features from a waveform")
    p_feat.add_argument("--input", required=True, help=".wav (16-bit mono PCM) or text sample list")
    p_feat.add_argument("--output", required=True, help="CSV of per-frame band energies")
    p_feat.set_defaults(func=_cmd_features)

    p_enh = sub.add_parser("enhance", help="Wiener-filter a waveform with a trained model")
    p_enh.add_argument("--model", required=True, help="checkpoint from a training run")
    p_enh.add_argument("--input", required=True)
    p_enh.add_argument("--output", required=True)
    p_enh.set_defaults(func=_cmd_enhance)

    p_cmp = sub.add_parser("compare", help="Wilcoxon comparison across finished runs")
    p_cmp.add_argument("runs", nargs="+", help="two or more run directories")
    p_cmp.add_argument("--alpha", type=float, default=0.05)
    p_cmp.add_argument("--out", default=None, help="also write the table to this file")
    p_cmp.set_defaults(func=_cmd_compare)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

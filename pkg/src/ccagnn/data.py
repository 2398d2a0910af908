"""Audio feature extraction, synthetic AV data, persistence, fold splits.

The synthetic generator stands in for a real audio-visual corpus: a
shared latent AR(1) process drives both the clean audio features and the
visual features, and the noisy audio adds white interference scaled to a
target SNR. Frames are grouped into fixed-length sequences and all three
modalities stay row-aligned.
"""

from __future__ import annotations

import math
import wave
from dataclasses import dataclass

import numpy as np

from .numeric import Array

AUDIO_DIM = 22
VISUAL_DIM = 50


class DatasetFormatError(ValueError):
    """Malformed dataset file; message names the offending line."""


@dataclass(frozen=True, eq=False)
class AVDataset:
    """Frame-aligned noisy audio (T x 22), clean audio (T x 22), visual (T x 50)."""

    noisy_audio: Array
    clean_audio: Array
    visual: Array
    sequence_bounds: tuple[tuple[int, int], ...]

    def __post_init__(self):
        t = self.noisy_audio.shape[0]
        if self.clean_audio.shape[0] != t or self.visual.shape[0] != t:
            raise ValueError("modalities must share the frame count")
        if self.noisy_audio.shape[1] != AUDIO_DIM or self.clean_audio.shape[1] != AUDIO_DIM:
            raise ValueError(f"audio features must be {AUDIO_DIM}-dimensional")
        if self.visual.shape[1] != VISUAL_DIM:
            raise ValueError(f"visual features must be {VISUAL_DIM}-dimensional")
        if sum(length for _, length in self.sequence_bounds) != t:
            raise ValueError("sequence bounds must cover every frame exactly once")

    @property
    def n_frames(self) -> int:
        return self.noisy_audio.shape[0]

    @property
    def n_sequences(self) -> int:
        return len(self.sequence_bounds)

    def subset(self, sequence_indices) -> "AVDataset":
        """New dataset holding the given sequences, in the given order."""
        rows = []
        bounds = []
        offset = 0
        for idx in sequence_indices:
            start, length = self.sequence_bounds[idx]
            rows.append(np.arange(start, start + length))
            bounds.append((offset, length))
            offset += length
        sel = np.concatenate(rows) if rows else np.zeros(0, dtype=int)
        return AVDataset(
            noisy_audio=self.noisy_audio[sel],
            clean_audio=self.clean_audio[sel],
            visual=self.visual[sel],
            sequence_bounds=tuple(bounds),
        )


@dataclass(frozen=True)
class LogFBConfig:
    """Framing and filterbank constants for log-FB extraction.

    16 ms frames of 800 samples at 22050 Hz, hop 500 samples (62.5 % of
    the frame), Hamming window, 2048-point FFT, 22 mel-spaced triangular
    filters, additive log floor.
    """

    sample_rate: int = 22050
    frame_length: int = 800
    hop: int = 500
    fft_size: int = 2048
    n_filters: int = AUDIO_DIM
    floor: float = 1e-10

    def __post_init__(self):
        if self.hop > self.frame_length:
            raise ValueError("hop must not exceed frame_length")
        if self.n_filters > self.fft_size // 2:
            raise ValueError("n_filters must be at most fft_size / 2")
        if self.floor <= 0:
            raise ValueError("floor must be positive")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def frame_count(self, n_samples: int) -> int:
        return (n_samples - self.frame_length) // self.hop + 1


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_filters: int, fft_size: int, sample_rate: float) -> Array:
    """Triangular mel filters (n_filters x bins), peak weight 1, 0..Nyquist."""
    bins = fft_size // 2 + 1
    freqs = np.arange(bins) * sample_rate / fft_size
    edges = _mel_to_hz(np.linspace(0.0, _hz_to_mel(sample_rate / 2.0), n_filters + 2))
    weights = np.zeros((n_filters, bins))
    for i in range(n_filters):
        lo, mid, hi = edges[i], edges[i + 1], edges[i + 2]
        rising = (freqs - lo) / (mid - lo)
        falling = (hi - freqs) / (hi - mid)
        weights[i] = np.clip(np.minimum(rising, falling), 0.0, None)
    return weights


def extract_logfb(waveform, config: LogFBConfig = LogFBConfig()) -> Array:
    """Log filterbank energies, one row of n_filters values per frame.

    Frames are cut with a Hamming window at the configured hop, a
    power spectrum is taken with the configured FFT size, the mel
    filterbank integrates it into bands, and a natural log with additive
    floor compresses the result.
    """
    samples = np.asarray(waveform, dtype=np.float64).ravel()
    if samples.size < config.frame_length:
        raise ValueError(
            f"waveform has {samples.size} samples, need at least one frame of {config.frame_length}"
        )
    n_frames = config.frame_count(samples.size)
    window = np.hamming(config.frame_length)
    starts = np.arange(n_frames) * config.hop
    frames = samples[starts[:, None] + np.arange(config.frame_length)] * window
    power = np.abs(np.fft.rfft(frames, n=config.fft_size, axis=1)) ** 2
    filters = mel_filterbank(config.n_filters, config.fft_size, config.sample_rate)
    return np.log(power @ filters.T + config.floor)


@dataclass(frozen=True, eq=False)
class SynthConfig:
    """Controls for the synthetic AV generator.

    A latent AR(1) process with coefficient ``temporal_coefficient`` is
    mixed into clean audio and visual observations; interference is white
    Gaussian in the feature domain, scaled per sequence to
    ``interference_snr_db`` (use ``math.inf`` for no interference).
    Mixing matrices may be supplied; otherwise they are drawn from the
    seeded generator.
    """

    n_sequences: int = 10
    frames_per_sequence: int = 48
    latent_dim: int = 8
    temporal_coefficient: float = 0.9
    audio_mixing: Array | None = None
    visual_mixing: Array | None = None
    audio_noise: float = 0.1
    visual_noise: float = 0.1
    interference_snr_db: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.temporal_coefficient < 1.0:
            raise ValueError("temporal_coefficient must be in [0, 1)")
        if self.n_sequences < 1 or self.frames_per_sequence < 1 or self.latent_dim < 1:
            raise ValueError("n_sequences, frames_per_sequence, latent_dim must be >= 1")
        if self.audio_noise < 0 or self.visual_noise < 0:
            raise ValueError("observation noise levels must be non-negative")
        if math.isnan(self.interference_snr_db):
            raise ValueError("interference_snr_db must not be NaN")


def synthesize_av_dataset(config: SynthConfig, rng: np.random.Generator | None = None) -> AVDataset:
    """Draw a synthetic dataset; deterministic for a fixed generator state.

    Draw order per sequence: latent innovations, audio observation noise,
    visual observation noise, interference.
    """
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    phi = config.temporal_coefficient
    stationary_std = 1.0 / math.sqrt(1.0 - phi * phi)

    mix_a = config.audio_mixing
    if mix_a is None:
        mix_a = rng.normal(size=(AUDIO_DIM, config.latent_dim)) / math.sqrt(config.latent_dim)
    mix_v = config.visual_mixing
    if mix_v is None:
        mix_v = rng.normal(size=(VISUAL_DIM, config.latent_dim)) / math.sqrt(config.latent_dim)
    if mix_a.shape != (AUDIO_DIM, config.latent_dim) or mix_v.shape != (VISUAL_DIM, config.latent_dim):
        raise ValueError("mixing matrices must be (22 x latent_dim) and (50 x latent_dim)")

    clean_parts, visual_parts, noisy_parts, bounds = [], [], [], []
    offset = 0
    for _ in range(config.n_sequences):
        t = config.frames_per_sequence
        innovations = rng.normal(size=(t, config.latent_dim))
        latent = np.empty((t, config.latent_dim))
        latent[0] = innovations[0] * stationary_std
        for step in range(1, t):
            latent[step] = phi * latent[step - 1] + innovations[step]
        clean = latent @ mix_a.T + config.audio_noise * rng.normal(size=(t, AUDIO_DIM))
        visual = latent @ mix_v.T + config.visual_noise * rng.normal(size=(t, VISUAL_DIM))
        interference = rng.normal(size=(t, AUDIO_DIM))
        if math.isinf(config.interference_snr_db):
            scale = 0.0
        else:
            p_clean = float((clean * clean).mean())
            p_noise = float((interference * interference).mean())
            scale = math.sqrt(p_clean / (p_noise * 10.0 ** (config.interference_snr_db / 10.0)))
        noisy = clean + scale * interference
        clean_parts.append(clean)
        visual_parts.append(visual)
        noisy_parts.append(noisy)
        bounds.append((offset, t))
        offset += t
    return AVDataset(
        noisy_audio=np.vstack(noisy_parts),
        clean_audio=np.vstack(clean_parts),
        visual=np.vstack(visual_parts),
        sequence_bounds=tuple(bounds),
    )


def _dataset_header() -> list[str]:
    names = ["frame", "sequence", "frame_in_sequence"]
    names += [f"noisy_{i:02d}" for i in range(AUDIO_DIM)]
    names += [f"clean_{i:02d}" for i in range(AUDIO_DIM)]
    names += [f"visual_{i:02d}" for i in range(VISUAL_DIM)]
    return names


DATASET_COLUMNS = len(_dataset_header())  # 97: 3 index columns + 94 feature columns


def save_dataset(dataset: AVDataset, path) -> None:
    """Comma-separated text, one header row then one 97-column row per frame.

    Columns: global frame index, sequence id, frame index within the
    sequence, 22 noisy, 22 clean, 50 visual. Floats are written as full
    precision reprs, so a save/load round trip is exact.
    """
    with open(path, "w") as fh:
        fh.write(",".join(_dataset_header()) + "\n")
        frame = 0
        for seq_id, (start, length) in enumerate(dataset.sequence_bounds):
            for pos in range(length):
                row = dataset.noisy_audio[start + pos], dataset.clean_audio[start + pos], dataset.visual[start + pos]
                values = [str(frame), str(seq_id), str(pos)]
                for block in row:
                    values.extend(repr(v) for v in block)
                fh.write(",".join(values) + "\n")
                frame += 1


def load_dataset(path) -> AVDataset:
    """Parse a dataset file; malformed input raises with the line number."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetFormatError(f"{path}: line 1: missing header row")
    if lines[0].split(",") != _dataset_header():
        raise DatasetFormatError(f"{path}: line 1: unexpected header")

    noisy, clean, visual = [], [], []
    bounds: list[tuple[int, int]] = []
    seen_sequences: set[int] = set()
    current_seq = None
    current_pos = -1
    for line_no, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != DATASET_COLUMNS:
            raise DatasetFormatError(
                f"{path}: line {line_no}: expected {DATASET_COLUMNS} columns, got {len(fields)}"
            )
        try:
            frame = int(fields[0])
            seq = int(fields[1])
            pos = int(fields[2])
            values = [float(v) for v in fields[3:]]
        except ValueError as exc:
            raise DatasetFormatError(f"{path}: line {line_no}: non-numeric field ({exc})") from None
        if frame != line_no - 2:
            raise DatasetFormatError(f"{path}: line {line_no}: non-monotone frame index {frame}")
        if seq != current_seq:
            if seq in seen_sequences:
                raise DatasetFormatError(f"{path}: line {line_no}: sequence {seq} reappears out of order")
            if current_seq is not None:
                bounds.append((bounds[-1][0] + bounds[-1][1] if bounds else 0, current_pos + 1))
            seen_sequences.add(seq)
            current_seq = seq
            current_pos = -1
        if pos != current_pos + 1:
            raise DatasetFormatError(
                f"{path}: line {line_no}: non-monotone frame index {pos} within sequence {seq}"
            )
        current_pos = pos
        noisy.append(values[:AUDIO_DIM])
        clean.append(values[AUDIO_DIM : 2 * AUDIO_DIM])
        visual.append(values[2 * AUDIO_DIM :])
    if current_seq is None:
        raise DatasetFormatError(f"{path}: line 2: no data rows")
    bounds.append((bounds[-1][0] + bounds[-1][1] if bounds else 0, current_pos + 1))
    return AVDataset(
        noisy_audio=np.array(noisy),
        clean_audio=np.array(clean),
        visual=np.array(visual),
        sequence_bounds=tuple(bounds),
    )


@dataclass(frozen=True)
class FoldSplit:
    """Sequence indices of one fold's train/validation/test portions."""

    train: tuple[int, ...]
    validation: tuple[int, ...]
    test: tuple[int, ...]

    @property
    def all_sequences(self) -> tuple[int, ...]:
        return self.train + self.validation + self.test


def split_folds(
    dataset: AVDataset,
    n_folds: int = 15,
    seq_per_fold: int = 50,
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2),
    rng: np.random.Generator | None = None,
) -> list[FoldSplit]:
    """Assign whole sequences to disjoint folds, split 60/20/20 by default."""
    if rng is None:
        rng = np.random.default_rng(0)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative values summing to 1, got {ratios}")
    needed = n_folds * seq_per_fold
    if dataset.n_sequences < needed:
        raise ValueError(
            f"dataset has {dataset.n_sequences} sequences, need {needed} for {n_folds} folds of {seq_per_fold}"
        )
    order = rng.permutation(dataset.n_sequences)[:needed]
    n_train = int(ratios[0] * seq_per_fold)
    n_val = int(ratios[1] * seq_per_fold)
    folds = []
    for f in range(n_folds):
        chunk = [int(i) for i in order[f * seq_per_fold : (f + 1) * seq_per_fold]]
        folds.append(
            FoldSplit(
                train=tuple(chunk[:n_train]),
                validation=tuple(chunk[n_train : n_train + n_val]),
                test=tuple(chunk[n_train + n_val :]),
            )
        )
    return folds


def read_waveform(path) -> tuple[Array, int | None]:
    """Load a mono waveform from 16-bit PCM .wav or a plain-text sample list.

    Returns (samples, sample_rate); the rate is None for text input.
    """
    path = str(path)
    if path.endswith(".wav"):
        with wave.open(path, "rb") as fh:
            if fh.getnchannels() != 1:
                raise ValueError(f"{path}: expected mono audio, got {fh.getnchannels()} channels")
            if fh.getsampwidth() != 2:
                raise ValueError(f"{path}: expected 16-bit PCM, got {8 * fh.getsampwidth()}-bit")
            raw = fh.readframes(fh.getnframes())
            rate = fh.getframerate()
        samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
        return samples, rate
    samples = np.array([float(v) for v in open(path).read().split()])
    return samples, None


def write_waveform(path, samples: Array, sample_rate: int = 22050) -> None:
    """Write mono audio as 16-bit PCM .wav or as a plain-text sample list."""
    path = str(path)
    samples = np.asarray(samples, dtype=np.float64).ravel()
    if path.endswith(".wav"):
        pcm = np.clip(np.round(samples * 32767.0), -32768, 32767).astype("<i2")
        with wave.open(path, "wb") as fh:
            fh.setnchannels(1)
            fh.setsampwidth(2)
            fh.setframerate(sample_rate)
            fh.writeframes(pcm.tobytes())
    else:
        with open(path, "w") as fh:
            for v in samples:
                fh.write(repr(v) + "\n")

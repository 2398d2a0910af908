"""Wiener-filter enhancement driven by estimated clean log-FB features.

Estimated clean features per frame are expanded back into a full power
spectrum through the filterbank's pseudo-inverse, a per-bin Wiener gain is
computed against the noisy frame's power spectrum, the gain is applied to
the noisy spectrum (phase kept), and frames are resynthesized by
overlap-add with window compensation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LogFBConfig, mel_filterbank
from .numeric import Array

SPECTRAL_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class FilterbankOperator:
    """Forward band-integration weights and their expansion pseudo-inverse.

    ``expansion`` is the column-normalized transpose of ``forward``: each
    band's energy is distributed over its bins proportionally to the
    filter weights, so expansion preserves the band total and stays
    non-negative.
    """

    forward: Array  # (n_filters x bins)
    expansion: Array  # (bins x n_filters)


def make_filterbank_operator(config: LogFBConfig = LogFBConfig()) -> FilterbankOperator:
    forward = mel_filterbank(config.n_filters, config.fft_size, config.sample_rate)
    totals = forward.sum(axis=1)
    if (totals <= 0).any():
        raise ValueError("every filter needs non-empty support")
    return FilterbankOperator(forward=forward, expansion=(forward / totals[:, None]).T)


def inverse_filterbank(logfb_frame, op: FilterbankOperator) -> Array:
    """Expand one log-FB frame into a non-negative power spectrum."""
    v = np.asarray(logfb_frame, dtype=np.float64).ravel()
    if v.size != op.forward.shape[0]:
        raise ValueError(f"expected {op.forward.shape[0]} band values, got {v.size}")
    return op.expansion @ np.exp(v)


def wiener_gain(clean_ps: Array, noisy_ps: Array) -> Array:
    """Per-bin gain clean/noisy, floored denominator, clamped to [0, 1]."""
    clean_ps = np.asarray(clean_ps, dtype=np.float64)
    noisy_ps = np.asarray(noisy_ps, dtype=np.float64)
    return np.clip(clean_ps / np.maximum(noisy_ps, SPECTRAL_FLOOR), 0.0, 1.0)


def resynthesize(waveform, gains: Array, config: LogFBConfig = LogFBConfig()) -> Array:
    """Apply per-frame spectral gains to a waveform and overlap-add back.

    ``gains`` is (frames x bins) for the rfft bins of the configured FFT
    size. Each frame is windowed, filtered in the spectral domain with the
    noisy phase kept, inverted, and summed; the window overlap is
    compensated by dividing by the accumulated window. Samples past the
    last frame are not covered and come out as zeros.
    """
    samples = np.asarray(waveform, dtype=np.float64).ravel()
    n_frames = config.frame_count(samples.size)
    if gains.shape != (n_frames, config.n_bins):
        raise ValueError(
            f"gain array shape {gains.shape} does not match {n_frames} frames x {config.n_bins} bins"
        )
    window = np.hamming(config.frame_length)
    out = np.zeros_like(samples)
    window_sum = np.zeros_like(samples)
    for m in range(n_frames):
        start = m * config.hop
        segment = samples[start : start + config.frame_length] * window
        spectrum = np.fft.rfft(segment, n=config.fft_size)
        filtered = np.fft.irfft(gains[m] * spectrum, n=config.fft_size)[: config.frame_length]
        out[start : start + config.frame_length] += filtered
        window_sum[start : start + config.frame_length] += window
    covered = window_sum > 1e-8
    out[covered] /= window_sum[covered]
    out[~covered] = 0.0
    return out


def enhance_waveform(
    noisy,
    estimated_clean_logfb: Array,
    config: LogFBConfig = LogFBConfig(),
) -> Array:
    """Wiener-filter a noisy waveform given estimated clean log-FB frames.

    The feature rows must match the framing of the waveform under
    ``config``. Output length equals input length.
    """
    samples = np.asarray(noisy, dtype=np.float64).ravel()
    if samples.size < config.frame_length:
        raise ValueError("waveform shorter than one frame")
    n_frames = config.frame_count(samples.size)
    features = np.asarray(estimated_clean_logfb, dtype=np.float64)
    if features.shape != (n_frames, config.n_filters):
        raise ValueError(
            f"feature shape {features.shape} does not match waveform framing "
            f"({n_frames} frames x {config.n_filters} bands)"
        )
    op = make_filterbank_operator(config)
    window = np.hamming(config.frame_length)
    gains = np.empty((n_frames, config.n_bins))
    for m in range(n_frames):
        start = m * config.hop
        segment = samples[start : start + config.frame_length] * window
        noisy_ps = np.abs(np.fft.rfft(segment, n=config.fft_size)) ** 2
        clean_ps = inverse_filterbank(features[m], op)
        gains[m] = wiener_gain(clean_ps, noisy_ps)
    return resynthesize(samples, gains, config)

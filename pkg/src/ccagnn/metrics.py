"""Evaluation metrics: MSE, activation-rate curves, discrete AUC,
Wilcoxon signed-rank test, and a segmental-SNR measure for enhancement."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import rankdata

from .model import ActivationStats
from .numeric import Array

EXACT_WILCOXON_MAX_N = 12
SEGSNR_FLOOR_DB = -10.0
SEGSNR_CEIL_DB = 35.0


def mse(y: Array, y_hat: Array) -> float:
    """Mean squared difference over all entries."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {y_hat.shape}")
    diff = y - y_hat
    return float((diff * diff).mean())


def activation_rate_curve(stats: ActivationStats) -> Array:
    """Per-neuron firing rates, sorted descending."""
    if stats.total_forwards <= 0:
        raise ValueError("activation stats have no recorded forwards")
    rates = stats.fire_count / float(stats.total_forwards)
    return np.sort(rates)[::-1]


def area_under_curve(values) -> float:
    """Discrete area under a curve: the plain sum of its values."""
    return float(np.sum(np.asarray(values, dtype=np.float64))) if len(values) else 0.0


def _exact_two_sided_p(ranks: Array, w_plus: float) -> float:
    """Tail probability by enumerating every sign assignment of the ranks."""
    n = ranks.size
    sums = np.zeros(1)
    for r in ranks:  # all subset sums, doubling the table per rank
        sums = np.concatenate([sums, sums + r])
    eps = 1e-9
    lower = float((sums <= w_plus + eps).mean())
    upper = float((sums >= w_plus - eps).mean())
    return min(1.0, 2.0 * min(lower, upper))


def _normal_two_sided_p(diffs: Array, ranks: Array, w_plus: float) -> float:
    """Normal approximation with tie and continuity corrections."""
    n = diffs.size
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, counts = np.unique(np.abs(diffs), return_counts=True)
    var -= float(((counts**3 - counts) / 48.0).sum())
    dev = w_plus - mean
    dev -= 0.5 * np.sign(dev)  # continuity correction toward the mean
    z = dev / math.sqrt(var)
    return min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))


def wilcoxon_signed_rank(a, b, alpha: float = 0.05) -> tuple[float, float, bool]:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped; absolute differences are ranked with
    average ranks for ties. Returns (W+, p, reject), where W+ is the sum
    of ranks of positive differences. The p-value is exact (enumeration of
    all sign patterns) for n <= 12 nonzero differences and a tie- and
    continuity-corrected normal approximation above that.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"samples differ in length: {a.size} vs {b.size}")
    diffs = a - b
    diffs = diffs[diffs != 0.0]
    n = diffs.size
    if n == 0:
        raise ValueError("degenerate sample: all differences are zero")
    if n < 5:
        raise ValueError(f"need at least 5 nonzero differences, got {n}")
    ranks = rankdata(np.abs(diffs))
    w_plus = float(ranks[diffs > 0].sum())
    if n <= EXACT_WILCOXON_MAX_N:
        p = _exact_two_sided_p(ranks, w_plus)
    else:
        p = _normal_two_sided_p(diffs, ranks, w_plus)
    return w_plus, p, p < alpha


def segmental_snr(reference, test, frame: int) -> float:
    """Mean per-frame SNR in dB, each frame clamped to [-10, 35].

    Frames are consecutive non-overlapping blocks of ``frame`` samples;
    zero-energy reference frames are skipped.
    """
    reference = np.asarray(reference, dtype=np.float64).ravel()
    test = np.asarray(test, dtype=np.float64).ravel()
    if reference.shape != test.shape:
        raise ValueError(f"waveforms differ in length: {reference.size} vs {test.size}")
    if frame < 1 or reference.size < frame:
        raise ValueError(f"need at least one frame of {frame} samples, got {reference.size}")
    n_frames = reference.size // frame
    values = []
    for m in range(n_frames):
        ref = reference[m * frame : (m + 1) * frame]
        err = ref - test[m * frame : (m + 1) * frame]
        signal_energy = float((ref * ref).sum())
        if signal_energy == 0.0:
            continue
        error_energy = float((err * err).sum())
        if error_energy == 0.0:
            values.append(SEGSNR_CEIL_DB)
            continue
        snr = 10.0 * math.log10(signal_energy / error_energy)
        values.append(min(max(snr, SEGSNR_FLOOR_DB), SEGSNR_CEIL_DB))
    if not values:
        raise ValueError("all reference frames have zero energy")
    return float(np.mean(values))

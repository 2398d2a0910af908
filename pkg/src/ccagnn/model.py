"""Two-layer graph-convolution encoder, MLP baseline, reconstruction head.

Both encoders share the same parameter layout; the MLP is simply the
graph encoder with identity propagation. The first hidden layer is
instrumented with per-neuron fire counters for the energy-efficiency
analysis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse

from .numeric import Array, Tensor, as_tensor, glorot_uniform, relu, spmm


@dataclass
class EncoderParams:
    """Weights of a two-layer encoder: (F x H) then (H x H), biases zero-init."""

    layer1_weights: Tensor
    layer1_bias: Tensor
    layer2_weights: Tensor
    layer2_bias: Tensor

    def tensors(self) -> list[Tensor]:
        return [self.layer1_weights, self.layer1_bias, self.layer2_weights, self.layer2_bias]

    @property
    def n_features(self) -> int:
        return self.layer1_weights.shape[0]

    @property
    def hidden(self) -> int:
        return self.layer1_weights.shape[1]


@dataclass
class ReconParams:
    """Single dense layer mapping embeddings to clean feature frames."""

    weights: Tensor
    bias: Tensor

    def tensors(self) -> list[Tensor]:
        return [self.weights, self.bias]


@dataclass
class ActivationStats:
    """Per-neuron fire counters for the first hidden layer.

    ``total_forwards`` counts node-forwards; each forward of N nodes adds
    N, and a neuron's count grows by how many of those nodes produced a
    strictly positive output.
    """

    fire_count: Array
    total_forwards: int = 0

    def record(self, first_layer_output: Array) -> None:
        if first_layer_output.shape[1] != self.fire_count.shape[0]:
            raise ValueError(
                f"layer width {first_layer_output.shape[1]} does not match counter width {self.fire_count.shape[0]}"
            )
        self.fire_count += (first_layer_output > 0.0).sum(axis=0)
        self.total_forwards += first_layer_output.shape[0]


def new_activation_stats(hidden: int) -> ActivationStats:
    return ActivationStats(fire_count=np.zeros(hidden, dtype=np.int64))


def init_encoder_params(n_features: int, hidden: int, rng: np.random.Generator) -> EncoderParams:
    return EncoderParams(
        layer1_weights=Tensor(glorot_uniform(n_features, hidden, rng)),
        layer1_bias=Tensor(np.zeros(hidden)),
        layer2_weights=Tensor(glorot_uniform(hidden, hidden, rng)),
        layer2_bias=Tensor(np.zeros(hidden)),
    )


def init_recon_params(n_inputs: int, n_outputs: int, rng: np.random.Generator) -> ReconParams:
    return ReconParams(
        weights=Tensor(glorot_uniform(n_inputs, n_outputs, rng)),
        bias=Tensor(np.zeros(n_outputs)),
    )


def gcn_forward(
    prop: sparse.spmatrix,
    features,
    params: EncoderParams,
    stats: ActivationStats | None = None,
) -> Tensor:
    """ReLU(P ReLU(P X W1 + b1) W2 + b2); records first-layer fires in stats."""
    x = as_tensor(features)
    n = x.shape[0]
    if prop.shape != (n, n):
        raise ValueError(f"propagation matrix shape {prop.shape} does not match {n} nodes")
    if x.shape[1] != params.n_features:
        raise ValueError(f"feature width {x.shape[1]} does not match layer1 input {params.n_features}")
    h1 = relu(spmm(prop, x) @ params.layer1_weights + params.layer1_bias)
    if stats is not None:
        stats.record(h1.data)
    return relu(spmm(prop, h1) @ params.layer2_weights + params.layer2_bias)


def mlp_forward(features, params: EncoderParams, stats: ActivationStats | None = None) -> Tensor:
    """The encoder without propagation: ReLU(ReLU(X W1 + b1) W2 + b2)."""
    x = as_tensor(features)
    if x.shape[1] != params.n_features:
        raise ValueError(f"feature width {x.shape[1]} does not match layer1 input {params.n_features}")
    h1 = relu(x @ params.layer1_weights + params.layer1_bias)
    if stats is not None:
        stats.record(h1.data)
    return relu(h1 @ params.layer2_weights + params.layer2_bias)


def recon_forward(embeddings, params: ReconParams) -> Tensor:
    """Linear reconstruction head, no activation."""
    z = as_tensor(embeddings)
    if z.shape[1] != params.weights.shape[0]:
        raise ValueError(f"embedding width {z.shape[1]} does not match head input {params.weights.shape[0]}")
    return z @ params.weights + params.bias


CHECKPOINT_MAGIC = "ccagnn-checkpoint 1"


def save_checkpoint(path, tensors: dict[str, Array], meta: dict[str, str]) -> None:
    """Text tensor dump: magic line, meta lines, then shape-headed tensors.

    2-D tensors are written one row per line, 1-D tensors on a single
    line, entries as full-precision reprs.
    """
    with open(path, "w") as fh:
        fh.write(CHECKPOINT_MAGIC + "\n")
        for key, value in meta.items():
            fh.write(f"meta {key} {value}\n")
        for name, arr in tensors.items():
            arr = np.asarray(arr, dtype=np.float64)
            dims = " ".join(str(d) for d in arr.shape)
            fh.write(f"tensor {name} {arr.ndim} {dims}\n")
            rows = arr.reshape(1, -1) if arr.ndim == 1 else arr
            for row in rows:
                fh.write(" ".join(repr(v) for v in row) + "\n")


def load_checkpoint(path) -> tuple[dict[str, Array], dict[str, str]]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a recognized checkpoint file")
    tensors: dict[str, Array] = {}
    meta: dict[str, str] = {}
    i = 1
    while i < len(lines):
        parts = lines[i].split()
        if parts[0] == "meta":
            meta[parts[1]] = " ".join(parts[2:])
            i += 1
        elif parts[0] == "tensor":
            name, ndim = parts[1], int(parts[2])
            shape = tuple(int(d) for d in parts[3 : 3 + ndim])
            n_lines = 1 if ndim == 1 else shape[0]
            block = lines[i + 1 : i + 1 + n_lines]
            data = np.array([[float(v) for v in row.split()] for row in block])
            tensors[name] = data.reshape(shape)
            i += 1 + n_lines
        else:
            raise ValueError(f"{path}: unexpected line {i + 1}: {lines[i][:40]!r}")
    return tensors, meta

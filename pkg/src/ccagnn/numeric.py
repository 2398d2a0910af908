"""Dense float64 linear algebra with reverse-mode gradients and Adam.

Everything downstream (graph encoders, losses, reconstruction heads) is
built from the handful of differentiable operations defined here. Arrays
are plain numpy ndarrays in double precision; the covariance terms of the
training objective are too ill-conditioned for float32.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sparse

Array = np.ndarray

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum a broadcast gradient back down to the original operand shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """A float64 array plus the bookkeeping for reverse-mode gradients.

    Operations on tensors record their parents and a closure mapping the
    upstream gradient to per-parent gradients, forming an implicit tape.
    Leaves (parameters, constants) have no parents. Use ``gradients`` to
    evaluate d(scalar output)/d(leaf) for a set of leaves.
    """

    __slots__ = ("data", "_parents", "_grad_fn")

    def __init__(self, data, _parents: tuple = (), _grad_fn: Callable | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self._parents = _parents
        self._grad_fn = _grad_fn

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def T(self) -> "Tensor":
        return Tensor(self.data.T, (self,), lambda g: (g.T,))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, leaf={self._grad_fn is None})"

    def __add__(self, other) -> "Tensor":
        other = as_tensor(other)
        return Tensor(
            self.data + other.data,
            (self, other),
            lambda g: (_unbroadcast(g, self.data.shape), _unbroadcast(g, other.data.shape)),
        )

    def __sub__(self, other) -> "Tensor":
        other = as_tensor(other)
        return Tensor(
            self.data - other.data,
            (self, other),
            lambda g: (_unbroadcast(g, self.data.shape), -_unbroadcast(g, other.data.shape)),
        )

    def __mul__(self, other) -> "Tensor":
        if isinstance(other, (int, float)):
            k = float(other)
            return Tensor(self.data * k, (self,), lambda g: (g * k,))
        other = as_tensor(other)
        return Tensor(
            self.data * other.data,
            (self, other),
            lambda g: (
                _unbroadcast(g * other.data, self.data.shape),
                _unbroadcast(g * self.data, other.data.shape),
            ),
        )

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return Tensor(-self.data, (self,), lambda g: (-g,))

    def __matmul__(self, other) -> "Tensor":
        other = as_tensor(other)
        return Tensor(
            self.data @ other.data,
            (self, other),
            lambda g: (g @ other.data.T, self.data.T @ g),
        )

    def sum(self) -> "Tensor":
        return Tensor(
            self.data.sum(),
            (self,),
            lambda g: (np.broadcast_to(g, self.data.shape),),
        )


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def relu(t: Tensor) -> Tensor:
    """Elementwise max(x, 0); gradient at exactly zero is defined as zero."""
    mask = t.data > 0.0
    return Tensor(np.where(mask, t.data, 0.0), (t,), lambda g: (np.where(mask, g, 0.0),))


def spmm(matrix: sparse.spmatrix, t: Tensor) -> Tensor:
    """Left-multiply a tensor by a constant sparse matrix."""
    csr = matrix.tocsr()
    csr_t = csr.T.tocsr()
    return Tensor(csr @ t.data, (t,), lambda g: (csr_t @ g,))


def frobenius_sq(t: Tensor) -> Tensor:
    """Squared Frobenius norm, sum of squared entries."""
    return Tensor((t.data * t.data).sum(), (t,), lambda g: ((2.0 * g) * t.data,))


def standardize_columns(t: Tensor) -> tuple[Tensor, Array]:
    """Center each column and scale so its squared entries sum to one.

    The scale is (column std * sqrt(N)), hence diag(Z^T Z) = 1 for the
    output Z. Zero-variance columns are mapped to all-zero columns (their
    gradient is defined as zero) and reported in the returned boolean mask.
    """
    h = t.data
    if h.ndim != 2 or h.shape[0] < 2:
        raise ValueError(f"standardize_columns needs a 2-D input with >= 2 rows, got shape {h.shape}")
    n = h.shape[0]
    centered = h - h.mean(axis=0)
    std = np.sqrt((centered * centered).mean(axis=0))
    degenerate = std <= 1e-150
    denom = np.where(degenerate, 1.0, std) * np.sqrt(n)
    z = np.where(degenerate, 0.0, centered / denom)

    def grad_fn(g):
        proj = (g * z).sum(axis=0)
        gh = (g - g.mean(axis=0) - z * proj) / denom
        return (np.where(degenerate, 0.0, gh),)

    return Tensor(z, (t,), grad_fn), degenerate


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            stack.append((parent, False))
    return order


def gradients(output: Tensor, params: Sequence[Tensor]) -> list[Array]:
    """Reverse-mode gradients of a finite scalar output for each parameter.

    Parameters that do not influence the output get all-zero gradients of
    matching shape.
    """
    if output.data.size != 1:
        raise ValueError(f"gradient source must be a scalar, got shape {output.data.shape}")
    if not np.isfinite(output.data).all():
        raise ValueError("gradient source is not finite")
    topo = _topological_order(output)
    grads: dict[int, Array] = {id(output): np.ones_like(output.data)}
    for node in reversed(topo):
        g = grads.get(id(node))
        if g is None or node._grad_fn is None:
            continue
        for parent, pg in zip(node._parents, node._grad_fn(g)):
            if pg is None:
                continue
            acc = grads.get(id(parent))
            grads[id(parent)] = pg if acc is None else acc + pg
    out = []
    for p in params:
        g = grads.get(id(p))
        out.append(np.zeros_like(p.data) if g is None else np.asarray(g, dtype=np.float64))
    return out


def finite_difference_gradient(f: Callable[[Array], float], x: Array, eps: float = 1e-5) -> Array:
    """Central-difference gradient estimate, the oracle for gradient checks."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        xp = x.copy()
        xp[idx] += eps
        xm = x.copy()
        xm[idx] -= eps
        fp = float(f(xp))
        fm = float(f(xm))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError(f"function not finite near perturbed entry {idx}")
        grad[idx] = (fp - fm) / (2.0 * eps)
    return grad


def glorot_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> Array:
    """Uniform init in +-sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class AdamState:
    """Per-parameter first/second moments and the shared step counter."""

    first_moment: list[Array]
    second_moment: list[Array]
    step_count: int = 0


def init_adam_state(params: Sequence[Array]) -> AdamState:
    return AdamState(
        first_moment=[np.zeros_like(p) for p in params],
        second_moment=[np.zeros_like(p) for p in params],
        step_count=0,
    )


def adam_step(
    params: Sequence[Array],
    grads: Sequence[Array],
    state: AdamState,
    lr: float,
    weight_decay: float = 0.0,
) -> tuple[list[Array], AdamState]:
    """One Adam update; returns fresh parameter arrays and a fresh state.

    Weight decay enters as an additive L2 gradient term before the moment
    update (the classical, non-decoupled form).
    """
    if lr <= 0:
        raise ValueError("lr must be positive")
    if weight_decay < 0:
        raise ValueError("weight_decay must be non-negative")
    if not (len(params) == len(grads) == len(state.first_moment) == len(state.second_moment)):
        raise ValueError("params, grads, and moments must have equal lengths")
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if not (p.shape == g.shape == m.shape == v.shape):
            raise ValueError(f"shape mismatch in adam_step: {p.shape} vs {g.shape} vs {m.shape}")

    t = state.step_count + 1
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if weight_decay:
            g = g + weight_decay * p
        m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
        v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * (g * g)
        m_hat = m / (1.0 - ADAM_BETA1**t)
        v_hat = v / (1.0 - ADAM_BETA2**t)
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(new_m, new_v, t)

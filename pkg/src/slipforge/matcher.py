"""Triplet-embedding matcher over 64-sample edge vectors.

A small fully connected network maps each edge vector onto the unit sphere
in 32 dimensions.  Training pulls embeddings of complementary edges
together and pushes non-matching edges apart by a hinge margin; match
confidence between two edges is exp(-distance) of their embeddings.

The network is implemented directly on numpy arrays, including the
backward pass and the Adam update, and is small enough to verify against
central finite differences (see :func:`gradient_check`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .features import EDGE_DIM, EdgeVector, extract_edge_vector, role_for_group

if TYPE_CHECKING:
    from .datastore import DatasetManifest

DEFAULT_LAYER_DIMS = (64, 128, 64, 32)
DEFAULT_MARGIN = 0.2

# Raw edge vectors carry amplitudes of several height units; scaling them
# down before the first layer keeps tanh units out of saturation.  The
# constant is part of the model and is serialized with the weights.
DEFAULT_INPUT_SCALE = 0.1

_NORM_FLOOR = 1e-12

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


class ModelError(ValueError):
    """Raised when model structure or inputs are inconsistent."""


class BatchError(ValueError):
    """Raised when a triplet batch is empty or malformed."""


@dataclass
class EmbeddingModel:
    """Weights and structural constants of the edge-embedding network."""

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    margin: float = DEFAULT_MARGIN
    input_scale: float = DEFAULT_INPUT_SCALE
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        if len(self.layer_dims) < 2:
            raise ModelError("need at least an input and an output layer")
        if any(d < 1 for d in self.layer_dims):
            raise ModelError("layer dimensions must be positive")
        if len(self.weights) != len(self.layer_dims) - 1:
            raise ModelError("weight count does not match layer dimensions")
        if len(self.biases) != len(self.layer_dims) - 1:
            raise ModelError("bias count does not match layer dimensions")
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.layer_dims[i], self.layer_dims[i + 1])
            if w.shape != want:
                raise ModelError(f"weight {i} has shape {w.shape}, expected {want}")
            if b.shape != (self.layer_dims[i + 1],):
                raise ModelError(
                    f"bias {i} has shape {b.shape}, expected ({self.layer_dims[i + 1]},)"
                )
        if not (self.margin > 0.0):
            raise ModelError("margin must be positive")
        if not (self.input_scale > 0.0):
            raise ModelError("input scale must be positive")

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def embedding_dim(self) -> int:
        return self.layer_dims[-1]

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(
            layer_dims=self.layer_dims,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            margin=self.margin,
            input_scale=self.input_scale,
            training_meta=dict(self.training_meta),
        )


def init_model(
    seed: int,
    layer_dims: Sequence[int] = DEFAULT_LAYER_DIMS,
    margin: float = DEFAULT_MARGIN,
    input_scale: float = DEFAULT_INPUT_SCALE,
) -> EmbeddingModel:
    """Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases."""
    rng = np.random.default_rng(seed)
    dims = tuple(int(d) for d in layer_dims)
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return EmbeddingModel(
        layer_dims=dims,
        weights=weights,
        biases=biases,
        margin=margin,
        input_scale=input_scale,
    )


def _as_input_matrix(x, dim: int) -> np.ndarray:
    if isinstance(x, EdgeVector):
        arr = x.values[None, :]
    else:
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ModelError(f"input must have {dim} components, got shape {arr.shape}")
    return arr


def _forward(model: EmbeddingModel, X: np.ndarray):
    """Run the network, returning activations needed for the backward pass.

    Returns (embeddings, hidden activations, pre-normalization outputs,
    clamped norms).
    """
    acts = [X * model.input_scale]
    a = acts[0]
    for W, b in zip(model.weights[:-1], model.biases[:-1]):
        a = np.tanh(a @ W + b)
        acts.append(a)
    z = a @ model.weights[-1] + model.biases[-1]
    norms = np.maximum(np.linalg.norm(z, axis=1, keepdims=True), _NORM_FLOOR)
    return z / norms, acts, z, norms


def embed_batch(model: EmbeddingModel, X) -> np.ndarray:
    """Embed rows of ``X`` (shape (n, 64)); rows come out unit-length."""
    mat = _as_input_matrix(X, model.input_dim)
    emb, _, _, _ = _forward(model, mat)
    return emb


def embed(model: EmbeddingModel, x) -> np.ndarray:
    """Embed a single edge vector onto the unit sphere."""
    return embed_batch(model, x)[0]


def score_pair(model: EmbeddingModel, a, b) -> float:
    """Match confidence exp(-||e_a - e_b||), symmetric and in (0, 1]."""
    ea = embed(model, a)
    eb = embed(model, b)
    return float(np.exp(-np.linalg.norm(ea - eb)))


@dataclass
class TripletBatch:
    """Matched rows of anchors, positives and negatives."""

    anchors: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray

    def __post_init__(self) -> None:
        self.anchors = self._matrix(self.anchors)
        self.positives = self._matrix(self.positives)
        self.negatives = self._matrix(self.negatives)
        n = self.anchors.shape[0]
        if n == 0:
            raise BatchError("triplet batch is empty")
        if self.positives.shape != self.anchors.shape or self.negatives.shape != self.anchors.shape:
            raise BatchError("anchor, positive and negative blocks must share a shape")

    @staticmethod
    def _matrix(block) -> np.ndarray:
        if isinstance(block, np.ndarray):
            arr = np.asarray(block, dtype=np.float64)
        else:
            rows = [r.values if isinstance(r, EdgeVector) else np.asarray(r, float) for r in block]
            arr = np.asarray(rows, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2:
            raise BatchError(f"triplet block must be 2-d, got shape {arr.shape}")
        return arr

    def __len__(self) -> int:
        return self.anchors.shape[0]


def _stacked_forward(model: EmbeddingModel, batch: TripletBatch):
    X = np.vstack([batch.anchors, batch.positives, batch.negatives])
    if X.shape[1] != model.input_dim:
        raise ModelError(
            f"batch width {X.shape[1]} does not match model input {model.input_dim}"
        )
    return _forward(model, X)


def triplet_loss(model: EmbeddingModel, batch: TripletBatch) -> float:
    """mean(max(0, ||e_a - e_p||^2 - ||e_a - e_n||^2 + margin))."""
    emb, _, _, _ = _stacked_forward(model, batch)
    n = len(batch)
    ea, ep, en = emb[:n], emb[n : 2 * n], emb[2 * n :]
    d_pos = np.sum((ea - ep) ** 2, axis=1)
    d_neg = np.sum((ea - en) ** 2, axis=1)
    return float(np.mean(np.maximum(0.0, d_pos - d_neg + model.margin)))


def _loss_and_grads(model: EmbeddingModel, batch: TripletBatch):
    """Triplet loss plus analytic gradients for every weight and bias."""
    emb, acts, z, norms = _stacked_forward(model, batch)
    n = len(batch)
    ea, ep, en = emb[:n], emb[n : 2 * n], emb[2 * n :]
    d_pos = np.sum((ea - ep) ** 2, axis=1)
    d_neg = np.sum((ea - en) ** 2, axis=1)
    hinge = d_pos - d_neg + model.margin
    active = (hinge > 0.0).astype(np.float64)
    loss = float(np.mean(np.maximum(0.0, hinge)))

    scale = active[:, None] / n
    g_emb = np.vstack([
        2.0 * (en - ep) * scale,
        -2.0 * (ea - ep) * scale,
        2.0 * (ea - en) * scale,
    ])

    # Through e = z / max(||z||, floor): g_z = (g - (g . e) e) / ||z||.
    g_z = (g_emb - np.sum(g_emb * emb, axis=1, keepdims=True) * emb) / norms

    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    delta = g_z
    for i in range(len(model.weights) - 1, -1, -1):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (1.0 - acts[i] ** 2)
    return loss, grads_w, grads_b


def gradient_check(model: EmbeddingModel, batch: TripletBatch, step: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Walks every parameter, so batches are capped at 4 triplets to keep the
    check affordable.
    """
    if len(batch) > 4:
        raise BatchError("gradient check is limited to batches of at most 4 triplets")
    _, grads_w, grads_b = _loss_and_grads(model, batch)
    worst = 0.0
    params = list(zip(model.weights, grads_w)) + list(zip(model.biases, grads_b))
    for arr, grad in params:
        flat = arr.flat
        gflat = grad.ravel()
        for j in range(arr.size):
            orig = flat[j]
            flat[j] = orig + step
            up = triplet_loss(model, batch)
            flat[j] = orig - step
            down = triplet_loss(model, batch)
            flat[j] = orig
            numeric = (up - down) / (2.0 * step)
            denom = abs(gflat[j]) + abs(numeric)
            if denom > 1e-8:
                worst = max(worst, abs(gflat[j] - numeric) / denom)
    return worst


class _Adam:
    def __init__(self, shapes, lr: float):
        self.lr = lr
        self.t = 0
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        bias1 = 1.0 - _ADAM_BETA1**self.t
        bias2 = 1.0 - _ADAM_BETA2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= _ADAM_BETA1
            m += (1.0 - _ADAM_BETA1) * g
            v *= _ADAM_BETA2
            v += (1.0 - _ADAM_BETA2) * g * g
            p -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + _ADAM_EPS)


@dataclass
class TrainConfig:
    epochs: int = 30
    learning_rate: float = 1e-3
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise BatchError("epochs must be non-negative")
        if self.batch_size < 1:
            raise BatchError("batch size must be positive")
        if not (self.learning_rate > 0.0):
            raise BatchError("learning rate must be positive")


def _dataset_vectors(dataset: "DatasetManifest"):
    """Edge-vector matrices for training: paired uppers/lowers row-aligned
    by ground truth, plus interference edges split by group."""

    def vec(frag) -> np.ndarray:
        return extract_edge_vector(frag.heights, role_for_group(frag.group), frag.id).values

    pairs = sorted(dataset.ground_truth, key=lambda p: p.upper_id)
    uppers = np.asarray([vec(dataset.fragment(p.upper_id)) for p in pairs])
    lowers = np.asarray([vec(dataset.fragment(p.lower_id)) for p in pairs])
    extra_upper = [vec(f) for f in dataset.interference_fragments() if f.group == "upper"]
    extra_lower = [vec(f) for f in dataset.interference_fragments() if f.group == "lower"]
    xu = np.asarray(extra_upper) if extra_upper else np.zeros((0, EDGE_DIM))
    xl = np.asarray(extra_lower) if extra_lower else np.zeros((0, EDGE_DIM))
    return uppers, lowers, xu, xl


def train(
    model: EmbeddingModel,
    dataset: "DatasetManifest",
    config: TrainConfig | None = None,
) -> EmbeddingModel:
    """Train a copy of ``model`` on the dataset's true pairs.

    Each pair contributes two triplets per epoch, one anchored on the upper
    edge and one on the lower, with negatives drawn uniformly from the
    opposite-side pool minus the true counterpart.  Returns a new model;
    per-epoch mean losses are recorded in ``training_meta``.
    """
    cfg = config or TrainConfig()
    uppers, lowers, xu, xl = _dataset_vectors(dataset)
    n_pairs = uppers.shape[0]
    if n_pairs == 0:
        raise BatchError("dataset has no ground-truth pairs to train on")
    if cfg.epochs == 0:
        return model.copy()

    out = model.copy()
    lower_pool = np.vstack([lowers, xl])
    upper_pool = np.vstack([uppers, xu])
    if lower_pool.shape[0] < 2 or upper_pool.shape[0] < 2:
        raise BatchError("need at least two candidates per side to form negatives")

    anchors = np.vstack([uppers, lowers])
    positives = np.vstack([lowers, uppers])
    pair_index = np.arange(n_pairs)

    rng = np.random.default_rng(cfg.seed)
    opt = _Adam([w.shape for w in out.weights] + [b.shape for b in out.biases], cfg.learning_rate)
    history = []
    for _ in range(cfg.epochs):
        # Uniform negative over the pool excluding the true counterpart:
        # draw from size-1 fewer slots and shift indices at or past it.
        neg_lo = rng.integers(0, lower_pool.shape[0] - 1, size=n_pairs)
        neg_lo = neg_lo + (neg_lo >= pair_index)
        neg_up = rng.integers(0, upper_pool.shape[0] - 1, size=n_pairs)
        neg_up = neg_up + (neg_up >= pair_index)
        negatives = np.vstack([lower_pool[neg_lo], upper_pool[neg_up]])

        order = rng.permutation(2 * n_pairs)
        losses = []
        for start in range(0, order.size, cfg.batch_size):
            sel = order[start : start + cfg.batch_size]
            batch = TripletBatch(anchors[sel], positives[sel], negatives[sel])
            loss, grads_w, grads_b = _loss_and_grads(out, batch)
            opt.step(out.weights + out.biases, grads_w + grads_b)
            losses.append(loss)
        history.append(float(np.mean(losses)))

    out.training_meta = dict(model.training_meta)
    out.training_meta.update(
        {
            "epochs": cfg.epochs,
            "learning_rate": cfg.learning_rate,
            "batch_size": cfg.batch_size,
            "seed": cfg.seed,
            "n_pairs": int(n_pairs),
            "loss_history": history,
        }
    )
    return out

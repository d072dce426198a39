"""Builtin environmental model: residual co-occurrence features plus a
logistic detector.

The feature map follows the SPAM construction: pixel differences along the
four axis directions and four diagonals, truncated to [-3, 3], summarised
by joint second-order transition histograms (triples of consecutive
differences along the same direction). Axis directions are pooled into one
343-bin block and diagonals into another, giving 686 dimensions. Each
block is a probability distribution, so it sums to at most 1.

The detector is a logistic regression trained by seeded stochastic
gradient descent on standardized features. Scores are oriented so that
covers sit near 1 and stegos near 0: the score is the model's cover
confidence.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng
from .errors import DataError, DomainError, FormatError
from .types import Domain, PixelMatrix

SPAM_TRUNCATION = 3
FEATURE_DIMS = 686  # two pooled 7**3 blocks

_AXIS_DIRECTIONS = ((0, 1), (0, -1), (1, 0), (-1, 0))
_DIAG_DIRECTIONS = ((1, 1), (-1, -1), (1, -1), (-1, 1))
_MODEL_MAGIC = b"ENVM1"


@dataclass
class EnvScore:
    """Cover confidence in [0, 1]; higher means more cover-like."""

    cover_confidence: float


def _direction_histogram(data: np.ndarray, di: int, dj: int) -> np.ndarray:
    """Joint distribution of difference triples along one direction."""
    h, w = data.shape
    # Difference plane: d[i, j] = x[i, j] - x[i + di, j + dj], on the
    # largest grid where both ends are in bounds.
    r0, r1 = max(0, -di), h - max(0, di)
    c0, c1 = max(0, -dj), w - max(0, dj)
    diff = data[r0:r1, c0:c1] - data[r0 + di : r1 + di, c0 + dj : c1 + dj]
    t = SPAM_TRUNCATION
    diff = np.clip(diff, -t, t).astype(np.int64)

    # Triples stride twice more along the same direction inside the
    # difference grid.
    hh, ww = diff.shape
    rr0, rr1 = max(0, -2 * di), hh - max(0, 2 * di)
    cc0, cc1 = max(0, -2 * dj), ww - max(0, 2 * dj)
    first = diff[rr0:rr1, cc0:cc1]
    second = diff[rr0 + di : rr1 + di, cc0 + dj : cc1 + dj]
    third = diff[rr0 + 2 * di : rr1 + 2 * di, cc0 + 2 * dj : cc1 + 2 * dj]
    if first.size == 0:
        raise DataError("image too small for second-order difference triples")

    span = 2 * t + 1
    codes = (first + t) * span * span + (second + t) * span + (third + t)
    hist = np.bincount(codes.ravel(), minlength=span**3).astype(np.float64)
    return hist / first.size


def extract_features(img: PixelMatrix) -> np.ndarray:
    """686-dim feature vector: pooled axis block then pooled diagonal block."""
    if img.domain is not Domain.SPATIAL:
        raise DomainError(
            "pixel-difference features are defined for spatial images only"
        )
    axis = np.mean(
        [_direction_histogram(img.data, di, dj) for di, dj in _AXIS_DIRECTIONS],
        axis=0,
    )
    diag = np.mean(
        [_direction_histogram(img.data, di, dj) for di, dj in _DIAG_DIRECTIONS],
        axis=0,
    )
    return np.concatenate([axis, diag])


def _sigmoid(z: np.ndarray | float):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-z)), np.exp(z) / (1.0 + np.exp(z)))


@dataclass
class LinearModel:
    """Standardizing logistic scorer over feature vectors."""

    weights: np.ndarray
    bias: float
    feat_mean: np.ndarray
    feat_scale: np.ndarray

    def score_features(self, features: np.ndarray) -> float:
        z = (np.asarray(features, dtype=np.float64) - self.feat_mean) / self.feat_scale
        return float(_sigmoid(z @ self.weights + self.bias))

    def score(self, img: PixelMatrix) -> EnvScore:
        return EnvScore(self.score_features(extract_features(img)))


@dataclass
class ConstantEnvironment:
    """Scores every image the same; used for budget and plumbing tests."""

    value: float = 0.5

    def score(self, img: PixelMatrix) -> EnvScore:
        return EnvScore(self.value)


@dataclass
class TrainConfig:
    epochs: int = 40
    learning_rate: float = 0.05
    seed: int = 0
    val_fraction: float = 0.2
    l2: float = 1.0e-3

# After fitting, logits are rescaled to this spread on the training set.
# Feedback-driven embedding needs confidences that move between nearby
# candidates; an uncalibrated separable fit saturates the sigmoid and
# returns the same 0.0 or 1.0 for every candidate. Rescaling is monotone,
# so accuracies and score ordering are unchanged.
_TARGET_LOGIT_STD = 3.0


@dataclass
class TrainReport:
    train_accuracy: float
    val_accuracy: float
    n_train: int
    n_val: int


MIN_TRAINING_PAIRS = 50


def train(
    cover_features: np.ndarray,
    stego_features: np.ndarray,
    cfg: TrainConfig | None = None,
) -> tuple[LinearModel, TrainReport]:
    """Fit the logistic detector on paired cover/stego features.

    The validation split keeps each cover with its stego twin on the same
    side so the reported accuracy is not inflated by pair leakage. All
    shuffles derive from cfg.seed; training is fully deterministic.
    """
    cfg = cfg or TrainConfig()
    covers = np.asarray(cover_features, dtype=np.float64)
    stegos = np.asarray(stego_features, dtype=np.float64)
    if covers.size == 0 or stegos.size == 0:
        raise DataError("training sets must be non-empty")
    if covers.ndim != 2 or stegos.ndim != 2 or covers.shape != stegos.shape:
        raise DataError("cover and stego feature matrices must match in shape")
    n_pairs = covers.shape[0]
    if n_pairs < MIN_TRAINING_PAIRS:
        raise DataError(
            f"need at least {MIN_TRAINING_PAIRS} pairs, got {n_pairs}"
        )
    stacked = np.vstack([covers, stegos])
    if np.allclose(stacked, stacked[0], atol=0.0):
        raise DataError("degenerate training data: all feature vectors identical")

    gen = rng.generator(cfg.seed, rng.STREAM_TRAIN)
    pair_order = gen.permutation(n_pairs)
    n_val = max(1, int(round(cfg.val_fraction * n_pairs)))
    val_pairs = pair_order[:n_val]
    train_pairs = pair_order[n_val:]

    def assemble(pair_idx):
        x = np.vstack([covers[pair_idx], stegos[pair_idx]])
        y = np.concatenate(
            [np.ones(len(pair_idx)), np.zeros(len(pair_idx))]
        )
        return x, y

    x_train, y_train = assemble(train_pairs)
    x_val, y_val = assemble(val_pairs)

    mean = x_train.mean(axis=0)
    scale = x_train.std(axis=0)
    scale[scale < 1.0e-12] = 1.0
    xt = (x_train - mean) / scale
    xv = (x_val - mean) / scale

    w = np.zeros(xt.shape[1])
    b = 0.0
    n = xt.shape[0]
    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate / (1.0 + 0.1 * epoch)
        for i in gen.permutation(n):
            z = xt[i] @ w + b
            g = _sigmoid(z) - y_train[i]
            w -= lr * (g * xt[i] + cfg.l2 * w)
            b -= lr * g

    logit_std = float(np.std(xt @ w + b))
    if logit_std > 0:
        factor = _TARGET_LOGIT_STD / logit_std
        w *= factor
        b *= factor

    def accuracy(x, y):
        pred = _sigmoid(x @ w + b) >= 0.5
        return float(np.mean(pred == (y == 1.0)))

    model = LinearModel(w, float(b), mean, scale)
    report = TrainReport(accuracy(xt, y_train), accuracy(xv, y_val), n, 2 * n_val)
    return model, report


def score(model_or_remote, img: PixelMatrix) -> EnvScore:
    """Uniform scoring entry: anything with .score(PixelMatrix)."""
    return model_or_remote.score(img)


@dataclass
class ConfidenceHistogram:
    counts: np.ndarray
    bin_edges: np.ndarray
    scores: np.ndarray

    def fraction_above(self, threshold: float) -> float:
        return float(np.mean(self.scores >= threshold))

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.scores, q))


def confidence_histogram(env, images, bins: int = 20) -> ConfidenceHistogram:
    """Score a dataset and bucket the cover confidences over [0, 1]."""
    scores = np.array([score(env, img).cover_confidence for img in images])
    if scores.size == 0:
        raise DataError("cannot build a histogram from an empty dataset")
    counts, edges = np.histogram(scores, bins=bins, range=(0.0, 1.0))
    return ConfidenceHistogram(counts, edges, scores)


def save_model(model: LinearModel, path) -> None:
    """Versioned binary layout: magic, u32 dims, then mean, scale, weights
    and bias as little-endian float64."""
    dims = model.weights.size
    blob = _MODEL_MAGIC + struct.pack("<I", dims)
    blob += model.feat_mean.astype("<f8").tobytes()
    blob += model.feat_scale.astype("<f8").tobytes()
    blob += model.weights.astype("<f8").tobytes()
    blob += struct.pack("<d", model.bias)
    Path(path).write_bytes(blob)


def load_model(path) -> LinearModel:
    blob = Path(path).read_bytes()
    if blob[: len(_MODEL_MAGIC)] != _MODEL_MAGIC:
        raise FormatError(f"{path}: bad model magic")
    if len(blob) < len(_MODEL_MAGIC) + 4:
        raise FormatError(f"{path}: truncated model header")
    (dims,) = struct.unpack_from("<I", blob, len(_MODEL_MAGIC))
    expected = len(_MODEL_MAGIC) + 4 + dims * 8 * 3 + 8
    if len(blob) != expected:
        raise FormatError(
            f"{path}: model file holds {len(blob)} bytes, expected {expected}"
        )
    offset = len(_MODEL_MAGIC) + 4
    def take(count):
        nonlocal offset
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
        offset += count * 8
        return arr.astype(np.float64)
    mean = take(dims)
    scale = take(dims)
    weights = take(dims)
    (bias,) = struct.unpack_from("<d", blob, offset)
    return LinearModel(weights, float(bias), mean, scale)

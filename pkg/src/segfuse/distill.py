"""Distillation losses, a toy per-pixel student, and the selection protocol.

The student is a multinomial logistic classifier applied independently to
each pixel's feature vector.  That is deliberately small: it exercises the
distillation losses, trains deterministically in seconds, and its output
certainty reacts to pseudo-label quality the same way a deep student's
does, which is all the certainty-aware policy selection needs.

All losses are plain sums over pixels; the trainer divides by the number
of labeled pixels so the step size is resolution-independent.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .core import (
    UNLABELED_ID,
    CertaintyTable,
    Ensemble,
    FusionPolicy,
    LabelMap,
    ProbMap,
    _frozen,
)
from .metrics import certainty_table
from .policy import select_certainty
from .unify import unify
from .util import softmax, thread_count

_LOG_CLAMP = 1e-12

#: Measurement share of the dataset used by the selection protocol
#: (500 of 2975 images in the full-scale setting).
DEFAULT_MEASURE_FRACTION = 500 / 2975


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """H x W x d map of real-valued per-pixel features."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3:
            raise ValueError(f"feature map must be H x W x d, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("feature map contains non-finite values")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def dims(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True, eq=False)
class ToyStudent:
    """Per-pixel multinomial logistic classifier: softmax(W x + b)."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
            raise ValueError("weights must be |C| x d and bias |C|")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise ValueError("student parameters must be finite")
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "bias", _frozen(b))

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dims(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    """SGD hyperparameters for the toy student."""

    lr: float = 0.5
    lr_decay_power: float = 0.9
    weight_decay: float = 5e-3
    momentum: float = 0.9
    iterations: int = 300
    seed: int = 0
    source_weight: float = 0.0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.lr < 0 or self.weight_decay < 0 or self.source_weight < 0:
            raise ValueError("lr, weight_decay and source_weight must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValueError(f"training config JSON is malformed: {e}")
        known = {f for f in cls.__dataclass_fields__}
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown training config fields: {sorted(extra)}")
        return cls(**obj)


@dataclass(frozen=True, eq=False)
class TrainResult:
    model: ToyStudent
    losses: np.ndarray


@dataclass(frozen=True, eq=False)
class ProtocolResult:
    table: CertaintyTable
    policy: FusionPolicy
    students: tuple


def average_fuse(teachers: Sequence[ProbMap]) -> ProbMap:
    """Mean of the raw teacher probabilities (the naive baseline fusion)."""
    teachers = list(teachers)
    if not teachers:
        raise ValueError("need at least one teacher")
    shape = teachers[0].values.shape
    for t in teachers[1:]:
        if t.values.shape != shape:
            raise ValueError(f"teacher shapes differ: {t.values.shape} vs {shape}")
    stacked = np.stack([t.values for t in teachers])
    return ProbMap(stacked.mean(axis=0))


def student_forward(model: ToyStudent, feats: FeatureMap) -> ProbMap:
    """Per-pixel softmax(W x + b)."""
    if feats.dims != model.feature_dims:
        raise ValueError(
            f"feature dim {feats.dims} does not match model dim {model.feature_dims}"
        )
    logits = feats.values @ model.weights.T + model.bias
    return ProbMap(softmax(logits, axis=2))


def loss_kl(target: ProbMap, student: ProbMap) -> float:
    """Soft-target cross entropy, summed over pixels and classes."""
    if target.values.shape != student.values.shape:
        raise ValueError("target and student shapes differ")
    logs = np.log(np.maximum(student.values, _LOG_CLAMP))
    return float(-(target.values * logs).sum())


def loss_ce(fused: LabelMap, student: ProbMap) -> float:
    """Hard-label cross entropy over fused pseudo labels, summed over pixels.

    Unlabeled pixels have all-zero one-hot rows and contribute exactly 0.
    """
    if (fused.height, fused.width) != (student.height, student.width):
        raise ValueError("fused map and student shapes differ")
    if fused.num_classes != student.num_classes:
        raise ValueError("fused map and student class counts differ")
    mask = ~fused.unlabeled_mask()
    if not mask.any():
        return 0.0
    ids = fused.values[mask].astype(np.intp)
    picked = student.values[mask, ids]
    return float(-np.log(np.maximum(picked, _LOG_CLAMP)).sum())


def _as_list(x, cls):
    return [x] if isinstance(x, cls) else list(x)


def _flatten_pairs(feats, labels):
    """Stack (features, labels) image lists into flat pixel matrices."""
    feats = _as_list(feats, FeatureMap)
    labels = _as_list(labels, LabelMap)
    if len(feats) != len(labels) or not feats:
        raise ValueError("need equally many (>=1) feature and label maps")
    xs, ys = [], []
    dims = feats[0].dims
    classes = labels[0].num_classes
    for f, l in zip(feats, labels):
        if (f.height, f.width) != (l.height, l.width):
            raise ValueError("feature and label dimensions differ")
        if f.dims != dims or l.num_classes != classes:
            raise ValueError("images disagree on feature dim or class count")
        xs.append(f.values.reshape(-1, dims))
        ys.append(l.values.reshape(-1))
    return np.concatenate(xs), np.concatenate(ys), classes


def _ce_sums(weights, bias, x, y):
    """(summed loss, summed grads, labeled count) for hard labels y."""
    mask = y != UNLABELED_ID
    n = int(np.count_nonzero(mask))
    if n == 0:
        return 0.0, np.zeros_like(weights), np.zeros_like(bias), 0
    xm = x[mask]
    ym = y[mask].astype(np.intp)
    probs = softmax(xm @ weights.T + bias, axis=1)
    picked = probs[np.arange(n), ym]
    loss = float(-np.log(np.maximum(picked, _LOG_CLAMP)).sum())
    g = probs
    g[np.arange(n), ym] -= 1.0
    return loss, g.T @ xm, g.sum(axis=0), n


def ce_loss_and_grads(
    model: ToyStudent, feats, labels
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean per-labeled-pixel CE loss and its analytic parameter gradients."""
    x, y, classes = _flatten_pairs(feats, labels)
    if classes != model.num_classes:
        raise ValueError("label class count does not match the model")
    loss, gw, gb, n = _ce_sums(model.weights, model.bias, x, y)
    if n == 0:
        raise ValueError("all pixels are unlabeled")
    return loss / n, gw / n, gb / n


def kl_loss_and_grads(
    model: ToyStudent, feats: FeatureMap, target: ProbMap
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean per-pixel soft-target loss and its analytic parameter gradients."""
    if (feats.height, feats.width) != (target.height, target.width):
        raise ValueError("feature and target dimensions differ")
    if target.num_classes != model.num_classes:
        raise ValueError("target class count does not match the model")
    x = feats.values.reshape(-1, feats.dims)
    s = target.values.reshape(-1, target.num_classes)
    n = x.shape[0]
    probs = softmax(x @ model.weights.T + model.bias, axis=1)
    loss = float(-(s * np.log(np.maximum(probs, _LOG_CLAMP))).sum()) / n
    g = (probs * s.sum(axis=1, keepdims=True) - s) / n
    return loss, g.T @ x, g.sum(axis=0)


def train_student(
    feats,
    labels,
    config: TrainConfig,
    source_feats=None,
    source_labels=None,
) -> TrainResult:
    """SGD with momentum on the mean per-labeled-pixel CE loss.

    Learning rate follows a polynomial decay, lr_i = lr * (1 - i/n)^power.
    With ``source_weight`` > 0 and a second labeled stream, its mean loss
    is added with that weight.  Fully deterministic given the seed.
    """
    x, y, classes = _flatten_pairs(feats, labels)
    n_labeled = int(np.count_nonzero(y != UNLABELED_ID))
    if n_labeled == 0:
        raise ValueError("all pixels are unlabeled; nothing to train on")
    use_source = source_feats is not None and config.source_weight > 0
    if use_source:
        xs, ys, src_classes = _flatten_pairs(source_feats, source_labels)
        if src_classes != classes:
            raise ValueError("source stream class count differs")
        ns_labeled = int(np.count_nonzero(ys != UNLABELED_ID))
        if ns_labeled == 0:
            raise ValueError("source stream has no labeled pixels")

    rng = np.random.default_rng(config.seed)
    dims = x.shape[1]
    weights = rng.normal(0.0, 0.01, size=(classes, dims))
    bias = np.zeros(classes)
    vel_w = np.zeros_like(weights)
    vel_b = np.zeros_like(bias)
    losses = np.empty(config.iterations)

    for i in range(config.iterations):
        loss, gw, gb, n = _ce_sums(weights, bias, x, y)
        loss, gw, gb = loss / n, gw / n, gb / n
        if use_source:
            sloss, sgw, sgb, sn = _ce_sums(weights, bias, xs, ys)
            loss += config.source_weight * sloss / sn
            gw += config.source_weight * sgw / sn
            gb += config.source_weight * sgb / sn
        losses[i] = loss
        gw += config.weight_decay * weights
        lr = config.lr * (1.0 - i / config.iterations) ** config.lr_decay_power
        vel_w = config.momentum * vel_w - lr * gw
        vel_b = config.momentum * vel_b - lr * gb
        weights = weights + vel_w
        bias = bias + vel_b

    return TrainResult(ToyStudent(weights, bias), _frozen(losses))


def certainty_selection_protocol(
    teacher_maps: Sequence,
    feats,
    measure_fraction: float = DEFAULT_MEASURE_FRACTION,
    config: TrainConfig = TrainConfig(),
) -> ProtocolResult:
    """Offline certainty-aware policy selection.

    ``teacher_maps[t]`` is teacher t's ProbMap (or list of ProbMaps, one
    per image); ``feats`` the matching feature maps.  The first
    ``measure_fraction`` share of the images (at least one) is held out
    for measurement.  For each teacher: unify its predictions on the
    training split, distill a fresh student (identical seed for every
    teacher), then average the student's certainty per class on the
    measurement split.  The policy is the per-class argmax of that table.
    """
    if not 0 < measure_fraction < 1:
        raise ValueError("measure_fraction must lie in (0, 1)")
    if isinstance(teacher_maps, Ensemble):
        teacher_maps = [[pm] for pm in teacher_maps]
    per_teacher = [_as_list(maps, ProbMap) for maps in teacher_maps]
    if not per_teacher:
        raise ValueError("ensemble must contain at least one teacher")
    feats = _as_list(feats, FeatureMap)
    n_images = len(feats)
    if n_images < 2:
        raise ValueError("protocol needs >= 2 images to split")
    for t, maps in enumerate(per_teacher):
        if len(maps) != n_images:
            raise ValueError(f"teacher {t} has {len(maps)} maps for {n_images} images")
    n_measure = min(max(1, round(measure_fraction * n_images)), n_images - 1)
    measure_feats = feats[:n_measure]
    train_feats = feats[n_measure:]

    def run(t: int):
        train_labels = [unify(pm) for pm in per_teacher[t][n_measure:]]
        result = train_student(train_feats, train_labels, config)
        preds = [student_forward(result.model, f) for f in measure_feats]
        return result.model, preds

    workers = min(thread_count(), len(per_teacher))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, range(len(per_teacher))))
    else:
        outcomes = [run(t) for t in range(len(per_teacher))]

    students = tuple(model for model, _ in outcomes)
    table = certainty_table([preds for _, preds in outcomes])
    return ProtocolResult(table, select_certainty(table), students)

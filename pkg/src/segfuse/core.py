"""Core domain types for ensemble pseudo-label fusion.

Label maps, probability maps, fusion policies and evaluation reports are
frozen dataclasses over numpy arrays.  Every array is validated and marked
read-only at construction time, so instances are immutable and safe to
share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

#: Canonical id of the "unlabeled" symbol (also its serialized u16 value).
UNLABELED_ID = 65535

#: Per-pixel probability vectors may deviate from sum 1 by this much
#: (float32 accumulation error over up to 256 classes).
PROB_SUM_TOL = 1e-4


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ClassSet:
    """Semantic classes 0..count-1 plus a reserved unlabeled sentinel."""

    count: int
    unlabeled_id: int = UNLABELED_ID

    def __post_init__(self):
        if self.count < 2:
            raise ValueError(f"class count must be >= 2, got {self.count}")
        if self.count > UNLABELED_ID:
            raise ValueError(f"class count must fit 16-bit storage, got {self.count}")
        if 0 <= self.unlabeled_id < self.count:
            raise ValueError("unlabeled_id collides with a real class id")


@dataclass(frozen=True, eq=False)
class ProbMap:
    """H x W x C map of per-pixel class probabilities.

    Values are kept as float64 in memory (training and loss code needs
    64-bit accumulation); the on-disk format is float32.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3:
            raise ValueError(f"probability map must be H x W x C, got shape {v.shape}")
        h, w, c = v.shape
        if h < 1 or w < 1 or c < 2:
            raise ValueError(f"bad probability map shape {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("probability map contains non-finite values")
        if v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
        dev = np.abs(v.sum(axis=2) - 1.0).max()
        if dev > PROB_SUM_TOL:
            raise ValueError(
                f"per-pixel probabilities must sum to 1 (worst deviation {dev:.3e})"
            )
        object.__setattr__(self, "values", _frozen(v))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def num_classes(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True, eq=False)
class LabelMap:
    """H x W map of class ids; UNLABELED_ID marks pixels with no class."""

    values: np.ndarray
    num_classes: int

    def __post_init__(self):
        ClassSet(self.num_classes)
        v = np.asarray(self.values)
        if v.ndim != 2:
            raise ValueError(f"label map must be H x W, got shape {v.shape}")
        if not np.issubdtype(v.dtype, np.integer):
            raise ValueError(f"label map requires integer values, got {v.dtype}")
        bad = (v < 0) | ((v >= self.num_classes) & (v != UNLABELED_ID))
        if bad.any():
            raise ValueError(
                f"label map contains ids outside [0, {self.num_classes}) "
                f"that are not the unlabeled sentinel"
            )
        object.__setattr__(self, "values", _frozen(v.astype(np.uint16)))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def unlabeled_mask(self) -> np.ndarray:
        return self.values == UNLABELED_ID


@dataclass(frozen=True, eq=False)
class FusionPolicy:
    """Total mapping class id -> teacher index used by channel-wise fusion."""

    assignment: np.ndarray
    num_teachers: int

    def __post_init__(self):
        a = np.asarray(self.assignment)
        if a.ndim != 1 or a.size < 1:
            raise ValueError("policy assignment must be a non-empty 1-d array")
        if not np.issubdtype(a.dtype, np.integer):
            raise ValueError("policy assignment must hold integer teacher indices")
        if self.num_teachers < 1:
            raise ValueError("policy needs at least one teacher")
        if (a < 0).any() or (a >= self.num_teachers).any():
            raise ValueError(
                f"policy references teachers outside [0, {self.num_teachers})"
            )
        object.__setattr__(self, "assignment", _frozen(a.astype(np.int64)))

    @property
    def num_classes(self) -> int:
        return self.assignment.size

    def teacher_for(self, class_id: int) -> int:
        return int(self.assignment[class_id])


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Ordered, dimension-consistent collection of teacher probability maps."""

    teachers: tuple

    def __post_init__(self):
        teachers = tuple(self.teachers)
        if not teachers:
            raise ValueError("ensemble must contain at least one teacher")
        shape = teachers[0].values.shape
        for t in teachers[1:]:
            if t.values.shape != shape:
                raise ValueError(
                    f"inconsistent teacher dimensions: {t.values.shape} vs {shape}"
                )
        object.__setattr__(self, "teachers", teachers)

    def __len__(self) -> int:
        return len(self.teachers)

    def __iter__(self):
        return iter(self.teachers)

    def __getitem__(self, idx):
        return self.teachers[idx]

    @property
    def num_classes(self) -> int:
        return self.teachers[0].num_classes


@dataclass(frozen=True, eq=False)
class IoUReport:
    """Per-class IoU values in [0, 1]; NaN marks classes with an empty union."""

    per_class: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.per_class, dtype=np.float64)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("per-class IoU must be a non-empty 1-d array")
        defined = v[~np.isnan(v)]
        if defined.size and (defined.min() < 0.0 or defined.max() > 1.0):
            raise ValueError("IoU values must lie in [0, 1]")
        object.__setattr__(self, "per_class", _frozen(v))

    @property
    def num_classes(self) -> int:
        return self.per_class.size

    @property
    def miou(self) -> float:
        defined = self.per_class[~np.isnan(self.per_class)]
        if defined.size == 0:
            return float("nan")
        return float(defined.mean())


@dataclass(frozen=True, eq=False)
class CertaintyTable:
    """|C| x |T| table of average student certainty; NaN marks empty cells."""

    rho: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.rho, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError("certainty table must be |C| x |T| with both >= 1")
        defined = v[~np.isnan(v)]
        if defined.size and (defined.min() < 0.0 or defined.max() > 1.0):
            raise ValueError("certainty values must lie in [0, 1]")
        object.__setattr__(self, "rho", _frozen(v))

    @property
    def num_classes(self) -> int:
        return self.rho.shape[0]

    @property
    def num_teachers(self) -> int:
        return self.rho.shape[1]


def check_same_grid(maps: Sequence, what: str = "map") -> None:
    """Raise if the maps disagree on (height, width) or class count."""
    first = maps[0]
    for m in maps[1:]:
        if (m.height, m.width) != (first.height, first.width):
            raise ValueError(
                f"{what} dimensions differ: "
                f"{(m.height, m.width)} vs {(first.height, first.width)}"
            )
        if m.num_classes != first.num_classes:
            raise ValueError(
                f"{what} class counts differ: {m.num_classes} vs {first.num_classes}"
            )

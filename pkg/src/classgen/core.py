"""Domain types for the super-sample construction and the mask mechanics.

Pair convention: element 0 of every pair is the *minus* example and element 1
the *plus* example.  A mask entry of +1 sends the plus example to training and
the minus example to test; -1 does the reverse.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class Example:
    features: tuple
    label: int
    attribute: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(float(v) for v in self.features))
        if int(self.label) != self.label or self.label < 0:
            raise InvalidArgumentError(f"label must be a non-negative integer, got {self.label!r}")
        object.__setattr__(self, "label", int(self.label))
        if self.attribute is not None:
            if int(self.attribute) != self.attribute or self.attribute < 0:
                raise InvalidArgumentError(f"attribute must be a non-negative integer, got {self.attribute!r}")
            object.__setattr__(self, "attribute", int(self.attribute))

    @property
    def dimension(self) -> int:
        return len(self.features)


@dataclass(frozen=True)
class Mask:
    entries: tuple

    def __post_init__(self):
        entries = tuple(int(e) for e in self.entries)
        if not entries:
            raise InvalidArgumentError("mask must have at least one entry")
        if any(e not in (-1, 1) for e in entries):
            raise InvalidArgumentError("mask entries must be -1 or +1")
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return len(self.entries)

    def flipped(self) -> "Mask":
        return Mask(tuple(-e for e in self.entries))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=np.int8)


@dataclass(frozen=True)
class SuperSample:
    """``n`` (minus, plus) pairs drawn i.i.d. from the data distribution."""

    pairs: tuple
    num_classes: int
    dimension: int
    num_attributes: Optional[int] = None

    def __post_init__(self):
        pairs = tuple((p[0], p[1]) for p in self.pairs)
        if not pairs:
            raise InvalidArgumentError("a super-sample needs at least one pair")
        object.__setattr__(self, "pairs", pairs)
        for i, (minus, plus) in enumerate(pairs):
            for ex in (minus, plus):
                if ex.dimension != self.dimension:
                    raise InvalidArgumentError(
                        f"pair {i}: feature length {ex.dimension} != dimension {self.dimension}"
                    )
                if ex.label >= self.num_classes:
                    raise InvalidArgumentError(
                        f"pair {i}: label {ex.label} >= num_classes {self.num_classes}"
                    )
                if ex.attribute is not None and self.num_attributes is not None:
                    if ex.attribute >= self.num_attributes:
                        raise InvalidArgumentError(
                            f"pair {i}: attribute {ex.attribute} >= num_attributes {self.num_attributes}"
                        )

    @classmethod
    def from_examples(cls, examples: Sequence[Example], num_classes: int,
                      num_attributes: Optional[int] = None) -> "SuperSample":
        """Pair consecutive examples: (e0, e1), (e2, e3), ..."""
        if len(examples) < 2 or len(examples) % 2:
            raise InvalidArgumentError(f"need a positive even number of examples, got {len(examples)}")
        pairs = tuple((examples[2 * i], examples[2 * i + 1]) for i in range(len(examples) // 2))
        return cls(pairs, num_classes, examples[0].dimension, num_attributes)

    @property
    def n(self) -> int:
        return len(self.pairs)

    @cached_property
    def arrays(self) -> dict:
        """Read-only numpy views of both halves (features, labels, attributes)."""
        out = {
            "x_minus": np.array([p[0].features for p in self.pairs], dtype=float).reshape(self.n, self.dimension),
            "x_plus": np.array([p[1].features for p in self.pairs], dtype=float).reshape(self.n, self.dimension),
            "y_minus": np.array([p[0].label for p in self.pairs], dtype=np.int64),
            "y_plus": np.array([p[1].label for p in self.pairs], dtype=np.int64),
        }
        if all(p[0].attribute is not None and p[1].attribute is not None for p in self.pairs):
            out["t_minus"] = np.array([p[0].attribute for p in self.pairs], dtype=np.int64)
            out["t_plus"] = np.array([p[1].attribute for p in self.pairs], dtype=np.int64)
        for arr in out.values():
            arr.flags.writeable = False
        return out

    @property
    def has_attributes(self) -> bool:
        return "t_minus" in self.arrays

    def examples(self) -> list:
        return [ex for pair in self.pairs for ex in pair]


@dataclass(frozen=True)
class ClassStats:
    y: int
    n_y_super: int

    @property
    def n_y_half(self) -> Fraction:
        return Fraction(self.n_y_super, 2)


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of training on one mask of one super-sample draw.

    All per-pair arrays have length n and are stored read-only.
    """

    supersample_id: int
    mask_id: int
    mask: np.ndarray
    pred_minus: np.ndarray
    pred_plus: np.ndarray
    loss_minus: np.ndarray
    loss_plus: np.ndarray
    y_minus: np.ndarray
    y_plus: np.ndarray
    t_minus: Optional[np.ndarray] = None
    t_plus: Optional[np.ndarray] = None
    model_id: Optional[int] = None

    def __post_init__(self):
        n = len(self.mask)
        for name in ("mask", "pred_minus", "pred_plus", "loss_minus", "loss_plus",
                     "y_minus", "y_plus", "t_minus", "t_plus"):
            value = getattr(self, name)
            if value is None:
                continue
            arr = np.array(value, dtype=float if name.startswith("loss") else np.int64)
            if arr.shape != (n,):
                raise InvalidArgumentError(f"{name} has shape {arr.shape}, expected ({n},)")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if np.any((self.mask != 1) & (self.mask != -1)):
            raise InvalidArgumentError("mask entries must be -1 or +1")
        for name in ("loss_minus", "loss_plus"):
            arr = getattr(self, name)
            if np.any(arr < 0) or np.any(arr > 1):
                raise InvalidArgumentError(f"{name} outside [0, 1]")

    @property
    def n(self) -> int:
        return len(self.mask)

    def delta_l(self, y: int) -> np.ndarray:
        """1{y-=y}*loss(minus) - 1{y+=y}*loss(plus), per pair."""
        return (self.y_minus == y) * self.loss_minus - (self.y_plus == y) * self.loss_plus


def draw_mask(n: int, rng_seed: int) -> Mask:
    """Draw ``n`` i.i.d. fair signs from a generator seeded with ``rng_seed``."""
    if n < 1:
        raise InvalidArgumentError(f"mask length must be >= 1, got {n}")
    bits = np.random.default_rng(rng_seed).integers(0, 2, size=n)
    return Mask(tuple(int(b) * 2 - 1 for b in bits))


def split(supersample: SuperSample, mask: Mask) -> tuple:
    """Return ``(train, test)`` lists selected by ``mask``."""
    if len(mask) != supersample.n:
        raise InvalidArgumentError(f"mask length {len(mask)} != number of pairs {supersample.n}")
    train, test = [], []
    for (minus, plus), u in zip(supersample.pairs, mask.entries):
        if u == 1:
            train.append(plus)
            test.append(minus)
        else:
            train.append(minus)
            test.append(plus)
    return train, test


def class_stats(supersample: SuperSample, y: int) -> ClassStats:
    if not 0 <= y < supersample.num_classes:
        raise InvalidArgumentError(f"class {y} outside [0, {supersample.num_classes})")
    arrays = supersample.arrays
    count = int(np.sum(arrays["y_minus"] == y) + np.sum(arrays["y_plus"] == y))
    return ClassStats(y, count)


def attribute_stats(supersample: SuperSample, t: int) -> ClassStats:
    """Same as :func:`class_stats` but counting attribute value ``t``."""
    if not supersample.has_attributes:
        raise InvalidArgumentError("super-sample examples carry no attribute")
    arrays = supersample.arrays
    count = int(np.sum(arrays["t_minus"] == t) + np.sum(arrays["t_plus"] == t))
    return ClassStats(t, count)


__all__ = [
    "Example", "Mask", "SuperSample", "ClassStats", "TrialRecord",
    "draw_mask", "split", "class_stats", "attribute_stats",
]

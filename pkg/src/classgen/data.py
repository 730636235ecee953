"""Synthetic classification data and CSV ingestion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .core import Example
from .errors import InvalidArgumentError, LoadError

KINDS = ("gaussian-mixture", "concentric", "xor")


@dataclass(frozen=True)
class AttributeRule:
    """Sensitive attribute t = 1{features[feature] > threshold}."""

    feature: int
    threshold: float = 0.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return (x[..., self.feature] > self.threshold).astype(np.int64)


@dataclass(frozen=True)
class GeneratorSpec:
    """Class-conditional law of (X, Y).

    ``means`` has one vector per class.  For ``concentric`` only the norm of
    each mean is used (ring radius); for ``xor`` each class is a mixture of two
    Gaussians centred at +mean and -mean.  ``label_noise[y]`` is the chance a
    draw from class y is relabelled to a uniformly chosen other class.
    """

    kind: str
    means: tuple
    scale: float = 1.0
    priors: Optional[tuple] = None
    label_noise: Optional[tuple] = None
    attribute_rule: Optional[AttributeRule] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown generator kind {self.kind!r}; expected one of {KINDS}")
        means = tuple(tuple(float(v) for v in m) for m in self.means)
        if not means:
            raise InvalidArgumentError("need at least one class mean")
        if len({len(m) for m in means}) != 1 or len(means[0]) == 0:
            raise InvalidArgumentError("all class means must share one positive dimension")
        object.__setattr__(self, "means", means)
        k = len(means)
        priors = tuple(float(p) for p in (self.priors if self.priors is not None else [1.0 / k] * k))
        noise = tuple(float(p) for p in (self.label_noise if self.label_noise is not None else [0.0] * k))
        if len(priors) != k or len(noise) != k:
            raise InvalidArgumentError("priors and label_noise need one entry per class")
        if any(p < 0 for p in priors) or abs(sum(priors) - 1.0) > 1e-12:
            raise InvalidArgumentError(f"priors must be a probability vector, got {priors}")
        if any(not 0.0 <= p < 1.0 for p in noise):
            raise InvalidArgumentError("label noise probabilities must lie in [0, 1)")
        if k == 1 and any(noise):
            raise InvalidArgumentError("label noise needs at least two classes")
        if not self.scale > 0:
            raise InvalidArgumentError("covariance scale must be positive")
        if self.kind == "xor" and k != 2:
            raise InvalidArgumentError("xor generator is binary")
        if self.attribute_rule is not None and not 0 <= self.attribute_rule.feature < len(means[0]):
            raise InvalidArgumentError("attribute rule refers to a missing feature")
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "label_noise", noise)

    @property
    def num_classes(self) -> int:
        return len(self.means)

    @property
    def dimension(self) -> int:
        return len(self.means[0])

    @property
    def num_attributes(self) -> Optional[int]:
        return 2 if self.attribute_rule is not None else None


def box_muller(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normals from pairs of uniforms."""
    size = int(np.prod(shape))
    half = (size + 1) // 2
    u1 = 1.0 - rng.random(half)  # (0, 1], keeps log finite
    u2 = rng.random(half)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2 * math.pi * u2), r * np.sin(2 * math.pi * u2)])
    return z[:size].reshape(shape)


def sample_arrays(spec: GeneratorSpec, count: int, seed: int):
    """Vectorised core of :func:`sample_iid`.

    Returns ``(x, y_clean, y_observed, t)``; ``t`` is None without an attribute rule.
    """
    if count < 0:
        raise InvalidArgumentError(f"count must be >= 0, got {count}")
    rng = np.random.default_rng(seed)
    k, d = spec.num_classes, spec.dimension
    cdf = np.cumsum(spec.priors)
    y = np.minimum(np.searchsorted(cdf, rng.random(count), side="right"), k - 1)
    noise = box_muller(rng, (count, d)) * spec.scale
    means = np.asarray(spec.means)
    if spec.kind == "gaussian-mixture":
        x = means[y] + noise
    elif spec.kind == "xor":
        sign = np.where(rng.random(count) < 0.5, -1.0, 1.0)
        x = sign[:, None] * means[y] + noise
    else:
        direction = box_muller(rng, (count, d))
        norms = np.linalg.norm(direction, axis=1, keepdims=True)
        direction = direction / np.where(norms == 0, 1.0, norms)
        radius = np.linalg.norm(means, axis=1)[y]
        x = radius[:, None] * direction + noise
    flip = rng.random(count) < np.asarray(spec.label_noise)[y]
    # shift by 1..k-1 so the new label is uniform over the other classes
    shift = 1 + np.floor(rng.random(count) * max(k - 1, 1)).astype(np.int64)
    observed = np.where(flip, (y + shift) % k, y)
    t = spec.attribute_rule(x) if spec.attribute_rule is not None else None
    return x, y, observed, t


def sample_iid(spec: GeneratorSpec, count: int, seed: int) -> list:
    x, _, labels, t = sample_arrays(spec, count, seed)
    return [
        Example(tuple(x[i]), int(labels[i]), None if t is None else int(t[i]))
        for i in range(count)
    ]


@dataclass(frozen=True)
class CsvSchema:
    features: Sequence[str] = field(default_factory=tuple)
    label: str = "label"
    attribute: Optional[str] = None


class LoadedData(NamedTuple):
    examples: list
    label_map: dict
    num_classes: int


def _is_int_token(token: str) -> bool:
    try:
        return int(token) >= 0 and str(int(token)) == token.strip()
    except ValueError:
        return False


def load_csv(path, schema: Optional[CsvSchema] = None) -> LoadedData:
    """Read one Example per data row.

    Labels that are all non-negative integers are used as class ids directly;
    otherwise labels are re-indexed 0..K-1 in order of first appearance.
    With no schema, every column except ``label``/``attribute`` is a feature.
    """
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise LoadError(f"cannot open {path}: {exc}") from exc
    header = None
    rows = []
    with handle:
        try:
            for lineno, line in _numbered(handle):
                row = next(csv.reader([line]), [])
                if not row or all(not c.strip() for c in row):
                    continue
                if header is None:
                    header = [c.strip() for c in row]
                else:
                    rows.append((lineno, row))
        except (UnicodeDecodeError, csv.Error) as exc:
            raise LoadError(f"{path}: {exc}") from None
    if header is None:
        raise LoadError(f"{path}: missing header row")
    schema = schema or CsvSchema(
        features=tuple(c for c in header if c not in ("label", "attribute")),
        attribute="attribute" if "attribute" in header else None,
    )
    index = {name: i for i, name in enumerate(header)}
    wanted = list(schema.features) + [schema.label] + ([schema.attribute] if schema.attribute else [])
    for name in wanted:
        if name not in index:
            raise LoadError(f"{path}: unknown column {name!r}", line=1)
    feat_idx = [index[c] for c in schema.features]

    raw = []
    for lineno, row in rows:
        if len(row) != len(header):
            raise LoadError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
        try:
            feats = tuple(float(row[i]) for i in feat_idx)
        except ValueError as exc:
            raise LoadError(f"non-numeric feature: {exc}", line=lineno) from None
        if not all(math.isfinite(v) for v in feats):
            raise LoadError("non-finite feature value", line=lineno)
        attr = None
        if schema.attribute:
            token = row[index[schema.attribute]].strip()
            if not _is_int_token(token):
                raise LoadError(f"attribute must be a non-negative integer, got {token!r}", line=lineno)
            attr = int(token)
        raw.append((feats, row[index[schema.label]].strip(), attr))

    tokens = [r[1] for r in raw]
    if tokens and all(_is_int_token(tok) for tok in tokens):
        ids = [int(tok) for tok in tokens]
        label_map = {str(i): i for i in sorted(set(ids))}
        num_classes = max(ids) + 1
    else:
        label_map = {}
        for tok in tokens:
            label_map.setdefault(tok, len(label_map))
        ids = [label_map[tok] for tok in tokens]
        num_classes = len(label_map)
    examples = [Example(f, y, a) for (f, _, a), y in zip(raw, ids)]
    return LoadedData(examples, label_map, num_classes)


def _numbered(handle):
    """Yield (line number, line) for csv.reader, skipping '#' comment lines."""
    for lineno, line in enumerate(handle, start=1):
        if line.lstrip().startswith("#"):
            continue
        yield lineno, line


def save_csv(path, examples: Sequence[Example], dimension: Optional[int] = None) -> int:
    """Write examples with columns x0..x{d-1}, label[, attribute]; returns the row count."""
    if dimension is None:
        if not examples:
            raise InvalidArgumentError("dimension is required when writing no examples")
        dimension = examples[0].dimension
    with_attr = bool(examples) and all(ex.attribute is not None for ex in examples)
    header = [f"x{j}" for j in range(dimension)] + ["label"] + (["attribute"] if with_attr else [])
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for ex in examples:
            if ex.dimension != dimension:
                raise InvalidArgumentError("examples disagree on dimension")
            row = [repr(v) for v in ex.features] + [str(ex.label)]
            if with_attr:
                row.append(str(ex.attribute))
            writer.writerow(row)
    return len(examples)

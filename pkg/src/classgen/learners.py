"""Small learning algorithms mapping a training set to a trained model.

Every learner is deterministic given (spec, training order, seed).  Only the
gradient-trained models use the seed, and only for their initial weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Example
from .data import box_muller
from .errors import InvalidArgumentError, LoadError

LEARNER_KINDS = ("knn", "logistic", "mlp", "finite_erm", "constant")
LOSS_KINDS = ("zero_one", "clipped_ce")


@dataclass(frozen=True)
class LossSpec:
    loss_kind: str = "zero_one"
    cap: float = 10.0

    def __post_init__(self):
        if self.loss_kind not in LOSS_KINDS:
            raise InvalidArgumentError(f"unknown loss {self.loss_kind!r}")
        if not self.cap > 0:
            raise InvalidArgumentError("cross-entropy cap must be positive")

    @property
    def bounds(self) -> tuple:
        return (0.0, 1.0)

    @property
    def subgaussian_sigma(self) -> float:
        # Hoeffding: a loss in [a, b] is (b - a)/2 sub-gaussian
        a, b = self.bounds
        return (b - a) / 2.0

    @property
    def is_discrete(self) -> bool:
        return self.loss_kind == "zero_one"


@dataclass(frozen=True)
class LearnerSpec:
    kind: str
    k: int = 1
    steps: int = 100
    step_size: float = 0.1
    init_scale: float = 0.1
    hidden_width: int = 16
    hypotheses: Optional[tuple] = None
    tie_break: str = "lowest"
    label: int = 0
    loss: LossSpec = LossSpec()

    def __post_init__(self):
        if self.kind not in LEARNER_KINDS:
            raise InvalidArgumentError(f"unknown learner {self.kind!r}; expected one of {LEARNER_KINDS}")
        if self.k < 1:
            raise InvalidArgumentError("knn needs k >= 1")
        if self.steps < 0 or not self.step_size > 0 or self.init_scale < 0 or self.hidden_width < 1:
            raise InvalidArgumentError("invalid optimisation settings")
        if self.kind == "finite_erm":
            if not self.hypotheses:
                raise InvalidArgumentError("finite_erm needs a non-empty hypothesis table")
            table = tuple(tuple(int(v) for v in row) for row in self.hypotheses)
            if len({len(row) for row in table}) != 1 or not table[0]:
                raise InvalidArgumentError("every hypothesis must cover the same input domain")
            if min(min(row) for row in table) < 0:
                raise InvalidArgumentError("hypothesis labels must be non-negative")
            object.__setattr__(self, "hypotheses", table)
            if self.tie_break != "lowest":
                raise InvalidArgumentError("only the 'lowest' tie-break rule is supported")

    @classmethod
    def knn(cls, k=1, **kw):
        return cls("knn", k=k, **kw)

    @classmethod
    def logistic(cls, steps=100, step_size=0.1, init_scale=0.1, **kw):
        return cls("logistic", steps=steps, step_size=step_size, init_scale=init_scale, **kw)

    @classmethod
    def mlp(cls, hidden_width=16, steps=100, step_size=0.1, init_scale=0.1, **kw):
        return cls("mlp", hidden_width=hidden_width, steps=steps, step_size=step_size,
                   init_scale=init_scale, **kw)

    @classmethod
    def finite_erm(cls, hypotheses, **kw):
        return cls("finite_erm", hypotheses=hypotheses, **kw)

    @classmethod
    def constant(cls, label=0, **kw):
        return cls("constant", label=label, **kw)

    @property
    def is_finite(self) -> bool:
        return self.kind in ("finite_erm", "constant")

    @property
    def table(self) -> np.ndarray:
        return np.asarray(self.hypotheses, dtype=np.int64)


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def losses_from_scores(scores, labels, loss: LossSpec, predictions=None):
    labels = np.asarray(labels, dtype=np.int64)
    if loss.loss_kind == "zero_one":
        if predictions is None:
            predictions = np.argmax(scores, axis=1)
        return (predictions != labels).astype(float)
    p = scores[np.arange(len(labels)), labels]
    with np.errstate(divide="ignore"):
        nll = -np.log(p)
    return np.minimum(nll, loss.cap) / loss.cap


class TrainedModel:
    """Common surface: ``predict``, ``score`` and ``loss`` over feature rows."""

    hypothesis_index: Optional[int] = None

    def __init__(self, num_classes: int, dimension: int, loss: LossSpec):
        self.num_classes = num_classes
        self.dimension = dimension
        self.loss_spec = loss

    def _rows(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.dimension:
            raise InvalidArgumentError(f"expected {self.dimension} features, got {x.shape[1]}")
        return x

    def score(self, features) -> np.ndarray:
        raise NotImplementedError

    def predict(self, features) -> np.ndarray:
        return np.argmax(self.score(features), axis=1)

    def loss(self, features, labels) -> np.ndarray:
        x = self._rows(features)
        labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
        if np.any(labels < 0) or np.any(labels >= self.num_classes):
            raise InvalidArgumentError("label outside the model's class range")
        if self.loss_spec.loss_kind == "zero_one":
            return (self.predict(x) != labels).astype(float)
        return losses_from_scores(self.score(x), labels, self.loss_spec)


class ConstantModel(TrainedModel):
    hypothesis_index = 0

    def __init__(self, label, num_classes, dimension, loss):
        super().__init__(num_classes, dimension, loss)
        self.label = label

    def score(self, features):
        x = self._rows(features)
        out = np.zeros((len(x), self.num_classes))
        out[:, self.label] = 1.0
        return out

    def predict(self, features):
        return np.full(len(self._rows(features)), self.label, dtype=np.int64)


class KNNModel(TrainedModel):
    def __init__(self, x, y, k, num_classes, loss):
        super().__init__(num_classes, x.shape[1], loss)
        self.x, self.y, self.k = x, y, min(k, len(x))

    def _votes(self, x):
        d2 = ((x[:, None, :] - self.x[None, :, :]) ** 2).sum(axis=2)
        nearest = np.argsort(d2, axis=1, kind="stable")[:, : self.k]
        votes = np.zeros((len(x), self.num_classes))
        np.add.at(votes, (np.repeat(np.arange(len(x)), self.k), self.y[nearest].ravel()), 1.0)
        return votes

    def score(self, features):
        return self._votes(self._rows(features)) / self.k

    def predict(self, features):
        # argmax returns the lowest label among tied vote counts
        return np.argmax(self._votes(self._rows(features)), axis=1)


class LinearSoftmaxModel(TrainedModel):
    def __init__(self, weights, bias, num_classes, loss):
        super().__init__(num_classes, weights.shape[0], loss)
        self.weights, self.bias = weights, bias

    def score(self, features):
        return _softmax(self._rows(features) @ self.weights + self.bias)


class MLPModel(TrainedModel):
    def __init__(self, params, num_classes, loss):
        super().__init__(num_classes, params[0].shape[0], loss)
        self.params = params

    def score(self, features):
        w1, b1, w2, b2 = self.params
        return _softmax(np.tanh(self._rows(features) @ w1 + b1) @ w2 + b2)


class TableModel(TrainedModel):
    """A finite hypothesis: a label for each input id 0..d-1 (read from features[0])."""

    def __init__(self, row, index, num_classes, loss):
        super().__init__(num_classes, 1, loss)
        self.row = np.asarray(row, dtype=np.int64)
        self.hypothesis_index = index

    def predict(self, features):
        return self.row[input_ids(self._rows(features), len(self.row))]

    def score(self, features):
        pred = self.predict(features)
        out = np.zeros((len(pred), self.num_classes))
        out[np.arange(len(pred)), pred] = 1.0
        return out


def input_ids(x: np.ndarray, domain_size: int) -> np.ndarray:
    ids = np.rint(x[:, 0]).astype(np.int64)
    if np.any(ids != x[:, 0]) or np.any(ids < 0) or np.any(ids >= domain_size):
        raise InvalidArgumentError(f"finite-domain inputs must be integer ids in [0, {domain_size})")
    return ids


def _clipped_ce_grad(probs, y, cap):
    n = len(y)
    nll = -np.log(np.maximum(probs[np.arange(n), y], 1e-300))
    g = probs.copy()
    g[np.arange(n), y] -= 1.0
    g *= (nll < cap)[:, None]  # clipped region is flat
    return g / n


def fit_arrays(spec: LearnerSpec, x: np.ndarray, y: np.ndarray, seed: int,
               num_classes: int) -> TrainedModel:
    """Train on feature matrix ``x`` and labels ``y`` (the engine's fast path)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise InvalidArgumentError("training set is empty")
    if np.any(y < 0) or np.any(y >= num_classes):
        raise InvalidArgumentError(f"training label outside [0, {num_classes})")
    loss = spec.loss
    if spec.kind == "constant":
        if spec.label >= num_classes:
            raise InvalidArgumentError("constant label outside the class range")
        return ConstantModel(spec.label, num_classes, x.shape[1], loss)
    if spec.kind == "knn":
        return KNNModel(x.copy(), y.copy(), spec.k, num_classes, loss)
    if spec.kind == "finite_erm":
        table = spec.table
        if table.max() >= num_classes:
            raise InvalidArgumentError("hypothesis table uses labels outside the class range")
        ids = input_ids(x, table.shape[1])
        # one-hot scores: clipped CE of a wrong label is the cap, i.e. loss 1
        risks = (table[:, ids] != y[None, :]).sum(axis=1)
        best = int(np.argmin(risks))  # first minimiser = lowest index
        return TableModel(table[best], best, num_classes, loss)

    rng = np.random.default_rng(seed)
    d = x.shape[1]
    if spec.kind == "logistic":
        w = box_muller(rng, (d, num_classes)) * spec.init_scale
        b = np.zeros(num_classes)
        for _ in range(spec.steps):
            g = _clipped_ce_grad(_softmax(x @ w + b), y, loss.cap)
            w -= spec.step_size * (x.T @ g)
            b -= spec.step_size * g.sum(axis=0)
        return LinearSoftmaxModel(w, b, num_classes, loss)

    h = spec.hidden_width
    w1 = box_muller(rng, (d, h)) * spec.init_scale
    w2 = box_muller(rng, (h, num_classes)) * spec.init_scale
    b1, b2 = np.zeros(h), np.zeros(num_classes)
    for _ in range(spec.steps):
        hidden = np.tanh(x @ w1 + b1)
        g = _clipped_ce_grad(_softmax(hidden @ w2 + b2), y, loss.cap)
        gh = (g @ w2.T) * (1.0 - hidden ** 2)
        w2 -= spec.step_size * (hidden.T @ g)
        b2 -= spec.step_size * g.sum(axis=0)
        w1 -= spec.step_size * (x.T @ gh)
        b1 -= spec.step_size * gh.sum(axis=0)
    return MLPModel((w1, b1, w2, b2), num_classes, loss)


def train(spec: LearnerSpec, train_set: Sequence[Example], seed: int = 0,
          num_classes: Optional[int] = None) -> TrainedModel:
    if not train_set:
        raise InvalidArgumentError("training set is empty")
    dims = {ex.dimension for ex in train_set}
    if len(dims) != 1:
        raise InvalidArgumentError("training examples disagree on dimension")
    x = np.array([ex.features for ex in train_set], dtype=float)
    y = np.array([ex.label for ex in train_set], dtype=np.int64)
    if num_classes is None:
        num_classes = int(y.max()) + 1
        if spec.kind == "finite_erm":
            num_classes = max(num_classes, int(spec.table.max()) + 1)
        if spec.kind == "constant":
            num_classes = max(num_classes, spec.label + 1)
    return fit_arrays(spec, x, y, seed, num_classes)


def eval_loss(model: TrainedModel, example: Example) -> float:
    if example.dimension != model.dimension:
        raise InvalidArgumentError(f"expected {model.dimension} features, got {example.dimension}")
    return float(model.loss(np.asarray(example.features)[None, :], [example.label])[0])


def parse_hypothesis_table(text: str) -> tuple:
    """Parse lines of ``input_id:label`` tokens into a table indexed [h][input_id].

    Blank lines and ``#`` comments are ignored; every line must cover the same
    contiguous input domain 0..d-1.
    """
    table = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        entries = {}
        for token in line.replace(",", " ").split():
            try:
                key, value = token.split(":")
                key, value = int(key), int(value)
            except ValueError:
                raise LoadError(f"bad truth-table entry {token!r}", line=lineno) from None
            if key in entries:
                raise LoadError(f"input {key} listed twice", line=lineno)
            entries[key] = value
        if sorted(entries) != list(range(len(entries))):
            raise LoadError("truth table must cover inputs 0..d-1", line=lineno)
        if table and len(entries) != len(table[0]):
            raise LoadError("hypotheses disagree on domain size", line=lineno)
        table.append(tuple(entries[i] for i in range(len(entries))))
    if not table:
        raise LoadError("hypothesis table is empty")
    return tuple(table)


def format_hypothesis_table(table) -> str:
    return "".join(" ".join(f"{i}:{int(v)}" for i, v in enumerate(row)) + "\n" for row in table)

"""Brute-force evaluation of every error and bound on small finite instances.

An instance has a finite input domain ``0..d-1``, ``K`` classes, a joint pmf
over (input, class), a finite hypothesis table trained by ERM, and one fixed
super-sample.  Two enumerations are performed:

* all ``2^n`` masks on the fixed super-sample, giving the super-sample class
  errors and the exact disintegrated CMI terms of the four class bounds;
* all multisets of ``n`` training examples drawn from the pmf, giving the
  exact laws of (W, Z) needed by the KL bounds (class, attribute, subtask).

This path builds exact pmfs directly and never goes through trial records or
the plug-in estimator, so it serves as an independent oracle for them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bounds import ClassBoundReport, PairCMI, SubtaskReport, SubtaskSpec
from .core import Example, SuperSample
from .errors import (EmptyClassError, InfiniteDivergenceError, InvalidArgumentError,
                     UnsupportedError)
from .info import JointPmf, entropy, exact_mi, kl_divergence
from .learners import LearnerSpec, LossSpec

MAX_PAIRS = 20
MAX_MASK_WORK = 1 << 26
MAX_MULTISETS = 5_000_000
TOLERANCE = 1e-9


@dataclass(frozen=True)
class ExactInstance:
    """A finite problem small enough to enumerate.

    ``pmf[x, y]`` is P(X = x, Y = y).  Super-sample examples carry their input
    id as the single feature.  ``input_attributes[x]`` (optional) is the
    sensitive attribute of input ``x``.
    """

    pmf: np.ndarray
    learner: LearnerSpec
    supersample: SuperSample
    input_attributes: Optional[tuple] = None
    loss: LossSpec = LossSpec()

    def __post_init__(self):
        pmf = np.array(self.pmf, dtype=float)
        if pmf.ndim != 2 or pmf.size == 0:
            raise InvalidArgumentError("pmf must be a non-empty (inputs x classes) matrix")
        if np.any(pmf < 0) or abs(math.fsum(pmf.ravel()) - 1.0) > 1e-12:
            raise InvalidArgumentError("pmf must be non-negative and sum to 1")
        pmf.flags.writeable = False
        object.__setattr__(self, "pmf", pmf)
        d, k = pmf.shape
        if self.supersample.num_classes != k or self.supersample.dimension != 1:
            raise InvalidArgumentError("super-sample must hold 1-feature input ids over the pmf's classes")
        ids = np.concatenate([self.supersample.arrays["x_minus"][:, 0], self.supersample.arrays["x_plus"][:, 0]])
        if np.any(ids != np.rint(ids)) or ids.min() < 0 or ids.max() >= d:
            raise InvalidArgumentError(f"super-sample inputs must be ids in [0, {d})")
        if self.learner.kind == "finite_erm":
            table = self.learner.table
            if table.shape[1] != d:
                raise InvalidArgumentError("hypothesis table does not cover the input domain")
            if table.max() >= k:
                raise InvalidArgumentError("hypothesis table uses labels outside the class range")
        if self.input_attributes is not None:
            attrs = tuple(int(a) for a in self.input_attributes)
            if len(attrs) != d or min(attrs) < 0:
                raise InvalidArgumentError("need one non-negative attribute per input")
            object.__setattr__(self, "input_attributes", attrs)
        if self.supersample.n > MAX_PAIRS:
            raise UnsupportedError(f"2^{self.supersample.n} masks exceed the enumeration budget 2^{MAX_PAIRS}")

    @classmethod
    def from_ids(cls, pmf, hypotheses, pairs, input_attributes=None) -> "ExactInstance":
        """Build from ``pairs = [((x-, y-), (x+, y+)), ...]`` of input ids and labels."""
        pmf = np.asarray(pmf, dtype=float)
        attrs = input_attributes

        def example(x, y):
            return Example((float(x),), y, None if attrs is None else attrs[x])

        ss = SuperSample(tuple((example(*m), example(*p)) for m, p in pairs), pmf.shape[1], 1,
                         None if attrs is None else max(attrs) + 1)
        return cls(pmf, LearnerSpec.finite_erm(hypotheses), ss, input_attributes)

    @property
    def num_inputs(self) -> int:
        return self.pmf.shape[0]

    @property
    def num_classes(self) -> int:
        return self.pmf.shape[1]

    @property
    def n(self) -> int:
        return self.supersample.n


def _table(instance: ExactInstance) -> np.ndarray:
    spec = instance.learner
    if spec.kind == "finite_erm":
        return spec.table
    if spec.kind == "constant":
        return np.full((1, instance.num_inputs), spec.label, dtype=np.int64)
    raise UnsupportedError(f"exact enumeration needs a finite learner, got {spec.kind!r}")


# --------------------------------------------------------------------------
# mask enumeration on the fixed super-sample


def enumerate_masks(n: int) -> np.ndarray:
    """All 2^n masks as rows of +-1, in binary counting order (bit i = pair i)."""
    if not 1 <= n <= MAX_PAIRS:
        raise UnsupportedError(f"cannot enumerate masks for n={n}")
    codes = np.arange(1 << n)[:, None]
    bits = (codes >> np.arange(n)[None, :]) & 1
    return (2 * bits - 1).astype(np.int64)


@dataclass(frozen=True)
class MaskOutcomes:
    """What ERM does on every mask of the fixed super-sample."""

    masks: np.ndarray  # (2^n, n)
    model: np.ndarray  # (2^n,)
    pred_minus: np.ndarray  # (2^n, n)
    pred_plus: np.ndarray
    loss_minus: np.ndarray
    loss_plus: np.ndarray


def mask_outcomes(instance: ExactInstance) -> MaskOutcomes:
    table = _table(instance)
    n = instance.n
    if (1 << n) * len(table) > MAX_MASK_WORK:
        raise UnsupportedError("masks x hypotheses exceed the enumeration budget")
    a = instance.supersample.arrays
    x_minus = a["x_minus"][:, 0].astype(np.int64)
    x_plus = a["x_plus"][:, 0].astype(np.int64)
    err_minus = (table[:, x_minus] != a["y_minus"][None, :]).astype(np.int64)  # (H, n)
    err_plus = (table[:, x_plus] != a["y_plus"][None, :]).astype(np.int64)
    masks = enumerate_masks(n)
    plus_trains = (masks == 1).astype(np.int64)
    risk = err_plus @ plus_trains.T + err_minus @ (1 - plus_trains).T  # (H, 2^n)
    model = np.argmin(risk, axis=0)  # lowest index among minimisers
    pred_minus = table[model][:, x_minus]
    pred_plus = table[model][:, x_plus]
    return MaskOutcomes(
        masks=masks,
        model=model,
        pred_minus=pred_minus,
        pred_plus=pred_plus,
        loss_minus=(pred_minus != a["y_minus"][None, :]).astype(float),
        loss_plus=(pred_plus != a["y_plus"][None, :]).astype(float),
    )


def _mask_pmf(u: np.ndarray, v_keys: list) -> JointPmf:
    weight = 1.0 / len(u)
    probs = {}
    for ui, vi in zip(u.tolist(), v_keys):
        probs[(ui, vi)] = probs.get((ui, vi), 0.0) + weight
    return JointPmf(probs)


def _labels_of(instance, key):
    a = instance.supersample.arrays
    if key == "label":
        return a["y_minus"], a["y_plus"]
    if not instance.supersample.has_attributes:
        raise EmptyClassError("instance has no sensitive attribute")
    return a["t_minus"], a["t_plus"]


def exact_class_report(instance: ExactInstance, y: int, outcomes: Optional[MaskOutcomes] = None,
                       *, key: str = "label") -> Optional[ClassBoundReport]:
    """Exact super-sample class error and the four CMI bounds for one class.

    Returns None if the class does not occur in the super-sample.
    """
    out = outcomes or mask_outcomes(instance)
    lab_minus, lab_plus = _labels_of(instance, key)
    in_minus = lab_minus == y
    in_plus = lab_plus == y
    half = (int(in_minus.sum()) + int(in_plus.sum())) / 2.0
    if half == 0:
        return None
    gaps = []
    for row in range(len(out.masks)):
        total = 0.0
        for i in range(instance.n):
            if out.masks[row, i] == 1:
                test, train = in_minus[i] * out.loss_minus[row, i], in_plus[i] * out.loss_plus[row, i]
            else:
                test, train = in_plus[i] * out.loss_plus[row, i], in_minus[i] * out.loss_minus[row, i]
            total += test - train
        gaps.append(total / half)
    pairs = []
    sums = {"w": 0.0, "f": 0.0, "e": 0.0, "delta": 0.0}
    for i in range(instance.n):
        u = out.masks[:, i]
        indicator = int(in_minus[i] or in_plus[i])
        keys = {
            "w": out.model.tolist(),
            "f": list(zip(out.pred_minus[:, i].tolist(), out.pred_plus[:, i].tolist())),
            "e": list(zip(out.loss_minus[:, i].tolist(), out.loss_plus[:, i].tolist())),
            "delta": (in_minus[i] * out.loss_minus[:, i] - in_plus[i] * out.loss_plus[:, i]).tolist(),
        }
        # filtered pairs keep 0 for the prefactored terms; ΔL is left unfiltered and is 0 on its own
        mis = {name: (1 if name == "delta" else indicator) * exact_mi(_mask_pmf(u, v)) for name, v in keys.items()}
        pairs.append(PairCMI(i, mis["f"], mis["e"], mis["delta"], indicator, mis["w"]))
        for name, mi in mis.items():
            sums[name] += math.sqrt(2.0 * mi)
    return ClassBoundReport(
        y=y,
        n_y_half=half,
        gen_estimate=math.fsum(gaps) / len(gaps),
        mc_stderr=0.0,
        bound_f_cmi=sums["f"] / half,
        bound_e_cmi=sums["e"] / half,
        bound_delta_l_cmi=sums["delta"] / half,
        bound_class_cmi=sums["w"] / half,
        per_pair_cmi=tuple(pairs),
    )


def class_cmi_bound(instance: ExactInstance, y: int) -> float:
    """Class-CMI bound with W the ERM hypothesis index, by full mask enumeration."""
    _table(instance)
    report = exact_class_report(instance, y)
    if report is None:
        raise EmptyClassError(f"class {y} is absent from the super-sample")
    return report.bound_class_cmi


# --------------------------------------------------------------------------
# dataset enumeration: the laws of (W, Z)


@dataclass(frozen=True)
class DatasetLaw:
    """Exact P(W = w, Z_1 = z) with z = x * K + y indexing the pmf cells."""

    joint: np.ndarray  # (H, d*K)
    model_marginal: np.ndarray  # (H,)
    cell_probs: np.ndarray  # (d*K,)
    cell_loss: np.ndarray  # (H, d*K) zero-one loss of hypothesis h on cell z


def dataset_law(instance: ExactInstance) -> DatasetLaw:
    table = _table(instance)
    n = instance.n
    d, k = instance.pmf.shape
    p = instance.pmf.ravel()
    live = np.flatnonzero(p > 0)
    if math.comb(len(live) + n - 1, n) > MAX_MULTISETS:
        raise UnsupportedError("too many training multisets to enumerate")
    cell_label = np.tile(np.arange(k), d)
    cell_input = np.repeat(np.arange(d), k)
    cell_loss = (table[:, cell_input] != cell_label[None, :]).astype(float)
    combos = np.array(list(itertools.combinations_with_replacement(live, n)), dtype=np.int64)
    counts = np.zeros((len(combos), len(p)))
    np.add.at(counts, (np.repeat(np.arange(len(combos)), n), combos.ravel()), 1.0)
    log_p = np.zeros_like(p)
    log_p[live] = np.log(p[live])
    log_factorial = np.array([math.lgamma(c + 1) for c in range(n + 1)])
    log_prob = log_factorial[n] - log_factorial[counts.astype(np.int64)].sum(axis=1) + counts @ log_p
    prob = np.exp(log_prob)
    # ERM depends on the multiset only: empirical risk is a sum over examples
    models = np.argmin(counts @ cell_loss.T, axis=1)
    one_hot = np.zeros((len(combos), len(table)))
    one_hot[np.arange(len(combos)), models] = 1.0
    joint = one_hot.T @ (prob[:, None] * counts / n)
    joint /= joint.sum()  # absorb rounding; total mass is 1 analytically
    return DatasetLaw(joint, joint.sum(axis=1), p.copy(), cell_loss)


@dataclass(frozen=True)
class KLResult:
    """Population-form error E_prod[loss] - E_joint[loss] and its KL bound for one slice."""

    value: int
    probability: float
    gen: float
    divergence: float
    bound: float


def _kl_slice(law: DatasetLaw, cells: np.ndarray, sigma: float, value: int) -> Optional[KLResult]:
    """Conditional law of (W, Z) given Z in ``cells`` versus P_W x P_{Z | cells}."""
    mass = law.cell_probs[cells].sum()
    if mass <= 0:
        return None
    joint = law.joint[:, cells] / mass
    product = np.outer(law.model_marginal, law.cell_probs[cells] / mass)
    loss = law.cell_loss[:, cells]
    gen = math.fsum(((product - joint) * loss).ravel())
    try:
        div = kl_divergence(joint.ravel(), product.ravel())
    except InfiniteDivergenceError:
        return KLResult(value, float(mass), gen, math.inf, math.inf)
    return KLResult(value, float(mass), gen, div, math.sqrt(2.0 * sigma ** 2 * div))


def _sigma(instance, sigma):
    if sigma is None:
        return instance.loss.subgaussian_sigma
    if not sigma > 0:
        raise InvalidArgumentError("sigma must be positive")
    return float(sigma)


def kl_class_bound(instance: ExactInstance, y: int, sigma_y: Optional[float] = None,
                   law: Optional[DatasetLaw] = None) -> KLResult:
    """KL bound sqrt(2 sigma^2 D(P_{W,X|y} || P_W x P_{X|y})) and the error it bounds."""
    law = law or dataset_law(instance)
    k = instance.num_classes
    cells = np.arange(instance.num_inputs) * k + y
    result = _kl_slice(law, cells, _sigma(instance, sigma_y), y)
    if result is None:
        raise EmptyClassError(f"class {y} has zero probability")
    return result


def kl_attribute_bound(instance: ExactInstance, t: int, sigma: Optional[float] = None,
                       law: Optional[DatasetLaw] = None) -> KLResult:
    """KL bound for the sub-population with attribute ``t``."""
    if instance.input_attributes is None:
        raise EmptyClassError("instance has no sensitive attribute")
    law = law or dataset_law(instance)
    k = instance.num_classes
    attrs = np.repeat(np.asarray(instance.input_attributes), k)
    result = _kl_slice(law, np.flatnonzero(attrs == t), _sigma(instance, sigma), t)
    if result is None:
        raise EmptyClassError(f"attribute {t} has zero probability")
    return result


@dataclass(frozen=True)
class BaselineSubtask:
    """Shift-style baseline: sqrt(2 s^2 D(Q||P)) + sqrt(2 s^2 I(W;S)) and its target error."""

    gen_q_ep: float
    divergence: float
    mutual_information: float
    bound: float


def subtask_baseline(instance: ExactInstance, spec: SubtaskSpec, sigma: Optional[float] = None,
                     law: Optional[DatasetLaw] = None) -> BaselineSubtask:
    """Target Q(x, y) = Q_Y(y) P(x | y) on the classes of ``spec``.

    ERM is deterministic, so I(W; S) = H(W).
    """
    law = law or dataset_law(instance)
    s = _sigma(instance, sigma)
    pmf = instance.pmf
    q = np.zeros_like(pmf)
    for y, w in zip(spec.classes, spec.weights):
        if not 0 <= y < instance.num_classes or pmf[:, y].sum() <= 0:
            raise EmptyClassError(f"subtask class {y} has zero probability")
        q[:, y] = w * pmf[:, y] / pmf[:, y].sum()
    q_cells = q.ravel()
    target_risk = law.model_marginal @ (law.cell_loss @ q_cells)
    train_risk = math.fsum((law.joint * law.cell_loss).ravel())
    try:
        div = kl_divergence(q_cells, law.cell_probs)
    except InfiniteDivergenceError:
        div = math.inf
    mi = entropy(law.model_marginal)
    bound = math.sqrt(2 * s * s * div) + math.sqrt(2 * s * s * mi)
    return BaselineSubtask(float(target_risk - train_risk), div, mi, bound)


# --------------------------------------------------------------------------
# full evaluation


@dataclass(frozen=True)
class ExactResult:
    instance: ExactInstance
    class_reports: tuple  # ClassBoundReport per class present in the super-sample
    kl: tuple  # KLResult per class with positive probability
    standard_gen: float  # super-sample standard gen error
    standard_bounds: dict  # selector -> class-weighted bound
    standard_gen_mi: float
    class_weighted_kl: float  # class-probability weighted KL bounds
    attribute_reports: tuple = ()
    attribute_kl: tuple = ()
    attribute_kl_sum: Optional[float] = None
    subtask: Optional[SubtaskReport] = None
    subtask_spec: Optional[SubtaskSpec] = None
    baseline: Optional[BaselineSubtask] = None
    notes: tuple = field(default_factory=tuple)


def default_subtask(instance: ExactInstance) -> Optional[SubtaskSpec]:
    """All classes but the last, weighted by their source probabilities."""
    k = instance.num_classes
    probs = instance.pmf.sum(axis=0)
    classes = [y for y in range(max(k - 1, 1)) if probs[y] > 0]
    if not classes:
        return None
    return SubtaskSpec.proportional(classes, {y: float(probs[y]) for y in classes})


def evaluate(instance: ExactInstance, subtask: Optional[SubtaskSpec] = None,
             sigma: Optional[float] = None) -> ExactResult:
    outcomes = mask_outcomes(instance)
    law = dataset_law(instance)
    notes = []
    reports = [r for y in range(instance.num_classes)
               if (r := exact_class_report(instance, y, outcomes)) is not None]
    total = math.fsum(r.n_y_half for r in reports)
    weights = {r.y: r.n_y_half / total for r in reports}
    standard_gen = math.fsum(weights[r.y] * r.gen_estimate for r in reports)
    standard_bounds = {
        name: math.fsum(weights[r.y] * getattr(r, attr) for r in reports)
        for name, attr in (("class_cmi", "bound_class_cmi"), ("f_cmi", "bound_f_cmi"),
                           ("e_cmi", "bound_e_cmi"), ("delta_l_cmi", "bound_delta_l_cmi"))
    }
    class_probs = instance.pmf.sum(axis=0)
    kl = tuple(kl_class_bound(instance, y, sigma, law)
               for y in range(instance.num_classes) if class_probs[y] > 0)
    standard_gen_mi = math.fsum(r.probability * r.gen for r in kl)
    class_weighted = math.fsum(r.probability * r.bound for r in kl)

    attr_reports, attr_kl, attr_sum = (), (), None
    if instance.input_attributes is not None:
        values = sorted(set(instance.input_attributes))
        attr_reports = tuple(r for t in values
                             if (r := exact_class_report(instance, t, outcomes, key="attribute")) is not None)
        attr_kl = tuple(r for t in values if (r := _attribute_or_none(instance, t, sigma, law)) is not None)
        attr_sum = math.fsum(r.probability * r.bound for r in attr_kl)

    if subtask is None:
        subtask = default_subtask(instance)
    sub_report = baseline = None
    if subtask is not None:
        baseline = subtask_baseline(instance, subtask, sigma, law)
        by_class = {r.y: r for r in reports}
        if all(c in by_class for c in subtask.classes):
            chosen = [by_class[c] for c in subtask.classes]
            w = subtask.weights
            sub_report = SubtaskReport(
                classes=subtask.classes,
                weights=w,
                gen_estimate=math.fsum(wi * r.gen_estimate for wi, r in zip(w, chosen)),
                bound_f_cmi=math.fsum(wi * r.bound_f_cmi for wi, r in zip(w, chosen)),
                bound_e_cmi=math.fsum(wi * r.bound_e_cmi for wi, r in zip(w, chosen)),
                bound_delta_l_cmi=math.fsum(wi * r.bound_delta_l_cmi for wi, r in zip(w, chosen)),
                bound_class_cmi=math.fsum(wi * r.bound_class_cmi for wi, r in zip(w, chosen)),
            )
        else:
            notes.append("subtask class missing from the super-sample; CMI subtask bound skipped")
    return ExactResult(instance, tuple(reports), kl, standard_gen, standard_bounds, standard_gen_mi,
                       class_weighted, attr_reports, attr_kl, attr_sum, sub_report, subtask, baseline,
                       tuple(notes))


def _attribute_or_none(instance, t, sigma, law):
    try:
        return kl_attribute_bound(instance, t, sigma, law)
    except EmptyClassError:
        return None


# --------------------------------------------------------------------------
# invariant checks


@dataclass(frozen=True)
class Check:
    """``lhs <= rhs`` within tolerance; margin = rhs - lhs."""

    name: str
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs + TOLERANCE


def checks(result: ExactResult) -> list:
    """Every validity and ordering inequality the oracle can certify."""
    out = []
    for r in result.class_reports:
        g = abs(r.gen_estimate)
        for attr in ("bound_class_cmi", "bound_f_cmi", "bound_e_cmi", "bound_delta_l_cmi"):
            out.append(Check(f"class {r.y}: |gen| <= {attr}", g, getattr(r, attr)))
        out.append(Check(f"class {r.y}: bound_delta_l_cmi <= bound_e_cmi", r.bound_delta_l_cmi, r.bound_e_cmi))
        out.append(Check(f"class {r.y}: bound_e_cmi <= bound_f_cmi", r.bound_e_cmi, r.bound_f_cmi))
        out.append(Check(f"class {r.y}: bound_f_cmi <= bound_class_cmi", r.bound_f_cmi, r.bound_class_cmi))
    for k in result.kl:
        out.append(Check(f"class {k.value}: |gen (population form)| <= bound_kl", abs(k.gen), k.bound))
    for name, bound in result.standard_bounds.items():
        out.append(Check(f"standard: |gen| <= weighted {name}", abs(result.standard_gen), bound))
    out.append(Check("standard: |gen (population form)| <= weighted bound_kl",
                     abs(result.standard_gen_mi), result.class_weighted_kl))
    for r in result.attribute_reports:
        out.append(Check(f"attribute {r.y}: |gen| <= bound_delta_l_cmi", abs(r.gen_estimate), r.bound_delta_l_cmi))
    for k in result.attribute_kl:
        out.append(Check(f"attribute {k.value}: |gen (population form)| <= bound_kl", abs(k.gen), k.bound))
    if result.attribute_kl_sum is not None:
        out.append(Check("standard: |gen (population form)| <= attribute-weighted bound_kl",
                         abs(result.standard_gen_mi), result.attribute_kl_sum))
    if result.subtask is not None:
        out.append(Check("subtask: |gen| <= bound_delta_l_cmi",
                         abs(result.subtask.gen_estimate), result.subtask.bound_delta_l_cmi))
    if result.baseline is not None:
        out.append(Check("subtask: |gen vs source empirical risk| <= baseline",
                         abs(result.baseline.gen_q_ep), result.baseline.bound))
    return out


def violations(result: ExactResult) -> list:
    return [c for c in checks(result) if not c.passed]


def random_instance(seed: int, max_pairs: int = 6, max_hypotheses: int = 16) -> ExactInstance:
    """A random small instance: n <= 6 pairs, 2-4 inputs, 2-3 classes, <= 16 hypotheses."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, max_pairs + 1))
    d = int(rng.integers(2, 5))
    k = int(rng.integers(2, 4))
    h = int(rng.integers(1, max_hypotheses + 1))
    pmf = rng.dirichlet(np.ones(d * k)).reshape(d, k)
    pmf /= pmf.sum()
    table = rng.integers(0, k, size=(h, d))
    attrs = tuple(int(a) for a in rng.integers(0, 2, size=d))
    cells = rng.choice(d * k, size=2 * n, p=pmf.ravel())
    pairs = [((int(cells[2 * i] // k), int(cells[2 * i] % k)),
              (int(cells[2 * i + 1] // k), int(cells[2 * i + 1] % k))) for i in range(n)]
    return ExactInstance.from_ids(pmf, tuple(map(tuple, table.tolist())), pairs, attrs)


def instance_from_dict(raw: dict) -> tuple:
    """Parse ``{"pmf", "hypotheses", "pairs", "attributes"?, "subtask"?}``.

    Returns ``(instance, subtask_spec_or_None)``.
    """
    unknown = set(raw) - {"pmf", "hypotheses", "pairs", "attributes", "subtask"}
    if unknown:
        raise InvalidArgumentError(f"unknown instance keys {sorted(unknown)}")
    try:
        pairs = [((int(m[0]), int(m[1])), (int(p[0]), int(p[1]))) for m, p in raw["pairs"]]
        instance = ExactInstance.from_ids(raw["pmf"], tuple(tuple(h) for h in raw["hypotheses"]), pairs,
                                          raw.get("attributes"))
        sub = raw.get("subtask")
        spec = SubtaskSpec(tuple(sub["classes"]), tuple(sub["weights"])) if sub else None
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        if isinstance(exc, InvalidArgumentError):
            raise
        raise InvalidArgumentError(f"malformed instance: {exc!r}") from None
    return instance, spec

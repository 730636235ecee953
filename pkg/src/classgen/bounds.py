"""Class-wise generalization error estimates and their CMI upper bounds.

Everything here works on trials grouped per super-sample draw.  Mutual
information terms are estimated by pooling the (mask bit, statistic) pairs
over the masks of a single draw, since the information is conditional on the
super-sample; draws are never pooled together.

Four statistics are compared against each mask bit U_i:

* ``W``: the trained model's identity (finite learners only), class-CMI;
* the prediction pair on both halves of pair i, class-f-CMI;
* the loss pair on both halves, class-e-CMI;
* the class-weighted loss difference, class-ΔL-CMI.

Every bound has the shape ``(1 / n_y_half) * sum_i sqrt(2 * c_i * I_i)``,
where ``c_i`` is 1 for ΔL and otherwise the indicator that either element of
pair i carries the class of interest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .core import SuperSample, TrialRecord
from .errors import (ClassGenError, EmptyClassError, InsufficientSamplesError,
                     InvalidArgumentError, UnsupportedError)
from .info import DEFAULT_BINS, JointCounts, plugin_mi, quantize

BOUND_FIELDS = ("bound_class_cmi", "bound_f_cmi", "bound_e_cmi", "bound_delta_l_cmi")


@dataclass(frozen=True)
class DrawTrials:
    """All trials run on one super-sample draw.

    ``exhaustive`` marks that the masks enumerate {-1, +1}^n exactly once each,
    so mask averages are exact expectations with no Monte Carlo error.
    """

    supersample: SuperSample
    trials: tuple
    supersample_id: int = 0
    exhaustive: bool = False
    discrete_loss: bool = True

    def __post_init__(self):
        trials = tuple(self.trials)
        object.__setattr__(self, "trials", trials)
        n = self.supersample.n
        arrays = self.supersample.arrays
        for tr in trials:
            if tr.n != n:
                raise InvalidArgumentError(f"trial {tr.mask_id} has {tr.n} pairs, super-sample has {n}")
            if not (np.array_equal(tr.y_minus, arrays["y_minus"]) and np.array_equal(tr.y_plus, arrays["y_plus"])):
                raise InvalidArgumentError(f"trial {tr.mask_id} labels disagree with its super-sample")

    @property
    def m(self) -> int:
        return len(self.trials)

    @cached_property
    def stacked(self) -> dict:
        out = {name: np.stack([getattr(tr, name) for tr in self.trials])
               for name in ("mask", "pred_minus", "pred_plus", "loss_minus", "loss_plus")}
        ids = [tr.model_id for tr in self.trials]
        out["model_id"] = None if any(i is None for i in ids) else np.asarray(ids, dtype=np.int64)
        return out


@dataclass(frozen=True)
class PairCMI:
    index: int
    mi_f: float
    mi_e: float
    mi_delta: float
    indicator_max: int
    mi_w: Optional[float] = None


@dataclass(frozen=True)
class ClassBoundReport:
    """Gen-error estimate and bounds for one class (or attribute value).

    On a single draw ``mc_stderr`` is the Monte Carlo error of the mask
    average; on an aggregate over draws it is the across-draw standard error.
    """

    y: int
    n_y_half: float
    gen_estimate: float
    mc_stderr: float
    bound_f_cmi: float
    bound_e_cmi: float
    bound_delta_l_cmi: float
    bound_class_cmi: Optional[float] = None
    per_pair_cmi: tuple = ()
    draws_used: int = 1
    draws_skipped: int = 0
    gen_std: float = 0.0
    bound_std: dict = field(default_factory=dict)


class GenEstimate(NamedTuple):
    estimate: float
    stderr: float
    draws_used: int
    draws_skipped: int


@dataclass(frozen=True)
class SubtaskSpec:
    classes: tuple
    weights: tuple

    def __post_init__(self):
        classes = tuple(int(c) for c in self.classes)
        weights = tuple(float(w) for w in self.weights)
        if not classes or len(classes) != len(weights) or len(set(classes)) != len(classes):
            raise InvalidArgumentError("subtask needs distinct classes with one weight each")
        if any(w <= 0 for w in weights) or abs(math.fsum(weights) - 1.0) > 1e-9:
            raise InvalidArgumentError("subtask weights must be positive and sum to 1")
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def proportional(cls, classes, class_probabilities: Mapping) -> "SubtaskSpec":
        """Target weights P(y) / P(Y in A), i.e. the source law restricted to A."""
        mass = math.fsum(class_probabilities[c] for c in classes)
        return cls(tuple(classes), tuple(class_probabilities[c] / mass for c in classes))


@dataclass(frozen=True)
class SubtaskReport:
    classes: tuple
    weights: tuple
    gen_estimate: float
    bound_f_cmi: float
    bound_e_cmi: float
    bound_delta_l_cmi: float
    bound_class_cmi: Optional[float] = None


# --------------------------------------------------------------------------
# per-draw primitives


def _indicators(draw: DrawTrials, key: str, value: int):
    arrays = draw.supersample.arrays
    if key == "label":
        return arrays["y_minus"] == value, arrays["y_plus"] == value
    if not draw.supersample.has_attributes:
        raise EmptyClassError("examples carry no sensitive attribute")
    return arrays["t_minus"] == value, arrays["t_plus"] == value


def _half_count(ind_minus, ind_plus) -> float:
    return (int(ind_minus.sum()) + int(ind_plus.sum())) / 2.0


def _trial_gaps(draw: DrawTrials, ind_minus, ind_plus, half: float) -> np.ndarray:
    """Per-trial class gap: indicator-weighted test loss minus train loss over n_y_half."""
    s = draw.stacked
    plus_trains = s["mask"] == 1
    weighted_minus = ind_minus[None, :] * s["loss_minus"]
    weighted_plus = ind_plus[None, :] * s["loss_plus"]
    test = np.where(plus_trains, weighted_minus, weighted_plus)
    train = np.where(plus_trains, weighted_plus, weighted_minus)
    return (test - train).sum(axis=1) / half


def _mask_stderr(draw: DrawTrials, values: np.ndarray) -> float:
    if draw.exhaustive or len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


def _loss_codes(losses: np.ndarray, discrete: bool, bins: int) -> np.ndarray:
    if discrete:
        return np.rint(losses).astype(np.int64)
    return quantize(2.0 * losses - 1.0, bins)


def _statistic_codes(draw: DrawTrials, ind_minus, ind_plus, bins: int, num_classes: int) -> dict:
    """Discrete codes (trials x pairs) of each statistic whose CMI with U_i is needed."""
    s = draw.stacked
    codes = {"f": s["pred_minus"] * num_classes + s["pred_plus"]}
    lm = _loss_codes(s["loss_minus"], draw.discrete_loss, bins)
    lp = _loss_codes(s["loss_plus"], draw.discrete_loss, bins)
    codes["e"] = lm * (bins + 1) + lp
    delta = ind_minus[None, :] * s["loss_minus"] - ind_plus[None, :] * s["loss_plus"]
    if draw.discrete_loss:
        codes["delta"] = np.rint(delta).astype(np.int64) + 1
    else:
        codes["delta"] = quantize(delta, bins)
    if s["model_id"] is not None:
        codes["w"] = np.repeat(s["model_id"][:, None], draw.supersample.n, axis=1)
    return codes


def _mi_column(u: np.ndarray, v: np.ndarray, correction: str) -> float:
    return plugin_mi(JointCounts.from_samples(u.tolist(), v.tolist()), correction)


def _require_masks(draw: DrawTrials):
    if draw.m < 2:
        raise InsufficientSamplesError(
            f"draw {draw.supersample_id}: MI estimation needs >= 2 masks, got {draw.m}")


def draw_report(draw: DrawTrials, value: int, *, key: str = "label", bins: int = DEFAULT_BINS,
                correction: str = "none") -> Optional[ClassBoundReport]:
    """Estimate and all bounds for class (or attribute) ``value`` on one draw.

    Returns None when the value does not occur in the super-sample.
    """
    _require_masks(draw)
    ind_minus, ind_plus = _indicators(draw, key, value)
    half = _half_count(ind_minus, ind_plus)
    if half == 0:
        return None
    gaps = _trial_gaps(draw, ind_minus, ind_plus, half)
    codes = _statistic_codes(draw, ind_minus, ind_plus, bins, draw.supersample.num_classes)
    masks = draw.stacked["mask"]
    pairs = []
    totals = {"w": 0.0, "f": 0.0, "e": 0.0, "delta": 0.0}
    for i in range(draw.supersample.n):
        indicator = int(ind_minus[i] or ind_plus[i])
        mis = {}
        for name, code in codes.items():
            if indicator == 0:
                # both labels differ from the class: filtered out, and ΔL is identically 0
                mis[name] = 0.0
            else:
                mis[name] = _mi_column(masks[:, i], code[:, i], correction)
        pairs.append(PairCMI(i, mis["f"], mis["e"], mis["delta"], indicator, mis.get("w")))
        for name, mi in mis.items():
            c = 1 if name == "delta" else indicator
            totals[name] += math.sqrt(2.0 * c * mi)
    return ClassBoundReport(
        y=value,
        n_y_half=half,
        gen_estimate=float(gaps.mean()),
        mc_stderr=_mask_stderr(draw, gaps),
        bound_f_cmi=totals["f"] / half,
        bound_e_cmi=totals["e"] / half,
        bound_delta_l_cmi=totals["delta"] / half,
        bound_class_cmi=totals["w"] / half if "w" in codes else None,
        per_pair_cmi=tuple(pairs),
    )


# --------------------------------------------------------------------------
# estimators over many draws


def _gen_per_draw(draws, key, value):
    values, errs, skipped = [], [], 0
    for draw in draws:
        ind_minus, ind_plus = _indicators(draw, key, value)
        half = _half_count(ind_minus, ind_plus)
        if half == 0:
            skipped += 1
            continue
        if draw.m == 0:
            raise InsufficientSamplesError(f"draw {draw.supersample_id} has no trials")
        gaps = _trial_gaps(draw, ind_minus, ind_plus, half)
        values.append(float(gaps.mean()))
        errs.append(_mask_stderr(draw, gaps))
    return values, errs, skipped


def _across_draws(values, within):
    if len(values) >= 2:
        return float(np.std(values, ddof=1) / math.sqrt(len(values)))
    return within[0] if within else 0.0


def class_gen_error(draws: Sequence[DrawTrials], y: int, *, key: str = "label") -> GenEstimate:
    """Average over masks within each draw, then over draws.

    Draws in which the class is absent are skipped and counted; if every draw
    is skipped an EmptyClassError is raised.
    """
    if not draws:
        raise InvalidArgumentError("no trials given")
    values, within, skipped = _gen_per_draw(draws, key, y)
    if not values:
        raise EmptyClassError(f"{key} {y} is absent from every super-sample draw")
    return GenEstimate(float(np.mean(values)), _across_draws(values, within), len(values), skipped)


def _bound_over_draws(draws, y, attr, bins, correction, key="label"):
    if not draws:
        raise InvalidArgumentError("no trials given")
    values = []
    for draw in draws:
        report = draw_report(draw, y, key=key, bins=bins, correction=correction)
        if report is None:
            continue
        value = getattr(report, attr)
        if value is None:
            raise UnsupportedError("class-CMI needs model identities (a finite learner)")
        values.append(value)
    if not values:
        raise EmptyClassError(f"{key} {y} is absent from every super-sample draw")
    return float(np.mean(values))


def class_f_cmi_bound(draws, y, *, correction="none") -> float:
    return _bound_over_draws(draws, y, "bound_f_cmi", DEFAULT_BINS, correction)


def class_e_cmi_bound(draws, y, bins=DEFAULT_BINS, *, correction="none") -> float:
    return _bound_over_draws(draws, y, "bound_e_cmi", bins, correction)


def class_delta_l_cmi_bound(draws, y, bins=DEFAULT_BINS, *, correction="none") -> float:
    return _bound_over_draws(draws, y, "bound_delta_l_cmi", bins, correction)


def sampled_class_cmi_bound(draws, y, *, correction="none") -> float:
    """Class-CMI with the model identity as W; only defined for finite learners."""
    return _bound_over_draws(draws, y, "bound_class_cmi", DEFAULT_BINS, correction)


def aggregate_reports(reports: Sequence[ClassBoundReport], skipped: int = 0) -> ClassBoundReport:
    """Combine one class's per-draw reports: means, across-draw std and stderr."""
    if not reports:
        raise EmptyClassError("no draw contains this class")
    y = reports[0].y
    gens = [r.gen_estimate for r in reports]
    stds = {}
    means = {}
    for name in BOUND_FIELDS:
        vals = [getattr(r, name) for r in reports]
        if any(v is None for v in vals):
            means[name] = None
            continue
        means[name] = float(np.mean(vals))
        stds[name] = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
    return ClassBoundReport(
        y=y,
        n_y_half=float(np.mean([r.n_y_half for r in reports])),
        gen_estimate=float(np.mean(gens)),
        mc_stderr=_across_draws(gens, [r.mc_stderr for r in reports]),
        bound_f_cmi=means["bound_f_cmi"],
        bound_e_cmi=means["bound_e_cmi"],
        bound_delta_l_cmi=means["bound_delta_l_cmi"],
        bound_class_cmi=means["bound_class_cmi"],
        per_pair_cmi=(),
        draws_used=len(reports),
        draws_skipped=skipped,
        gen_std=float(np.std(gens, ddof=1)) if len(gens) > 1 else 0.0,
        bound_std=stds,
    )


# --------------------------------------------------------------------------
# aggregations


_SELECTORS = {
    "gen": "gen_estimate",
    "class_cmi": "bound_class_cmi",
    "f_cmi": "bound_f_cmi",
    "e_cmi": "bound_e_cmi",
    "delta_l_cmi": "bound_delta_l_cmi",
}


def empirical_weights(reports: Sequence[ClassBoundReport]) -> dict:
    """P(Y = y) estimated as the super-sample share of each reported class."""
    total = math.fsum(r.n_y_half for r in reports)
    if total <= 0:
        raise EmptyClassError("reports carry no examples")
    return {r.y: r.n_y_half / total for r in reports}


def _weighted_sum(reports, weights, which):
    if which not in _SELECTORS:
        raise InvalidArgumentError(f"unknown selector {which!r}; expected one of {sorted(_SELECTORS)}")
    by_class = {r.y: r for r in reports}
    if set(weights) != set(by_class):
        raise InvalidArgumentError(
            f"weights cover classes {sorted(weights)} but reports cover {sorted(by_class)}")
    terms = []
    for y, w in weights.items():
        value = getattr(by_class[y], _SELECTORS[which])
        if value is None:
            return None
        terms.append(w * value)
    return math.fsum(terms)


def standard_gen_bound(reports: Sequence[ClassBoundReport], class_weights: Optional[Mapping] = None,
                       which: str = "delta_l_cmi") -> Optional[float]:
    """Class-weighted sum of per-class values (a bound on the standard gen error).

    ``which="gen"`` aggregates the estimates themselves instead of a bound.
    Returns None when the selected bound is unavailable for some class.
    """
    if class_weights is None:
        class_weights = empirical_weights(reports)
    if abs(math.fsum(class_weights.values()) - 1.0) > 1e-9 or any(w < 0 for w in class_weights.values()):
        raise InvalidArgumentError("class weights must form a pmf")
    return _weighted_sum(reports, class_weights, which)


def subtask_from_reports(reports: Sequence[ClassBoundReport], spec: SubtaskSpec) -> SubtaskReport:
    by_class = {r.y: r for r in reports}
    missing = [c for c in spec.classes if c not in by_class]
    if missing:
        raise EmptyClassError(f"subtask classes {missing} are absent from the data")
    chosen = [by_class[c] for c in spec.classes]
    weights = dict(zip(spec.classes, spec.weights))
    return SubtaskReport(
        classes=spec.classes,
        weights=spec.weights,
        gen_estimate=_weighted_sum(chosen, weights, "gen"),
        bound_f_cmi=_weighted_sum(chosen, weights, "f_cmi"),
        bound_e_cmi=_weighted_sum(chosen, weights, "e_cmi"),
        bound_delta_l_cmi=_weighted_sum(chosen, weights, "delta_l_cmi"),
        bound_class_cmi=_weighted_sum(chosen, weights, "class_cmi"),
    )


def class_reports(draws: Sequence[DrawTrials], *, key: str = "label", values=None,
                  bins: int = DEFAULT_BINS, correction: str = "none") -> list:
    """Aggregated report for every class (or attribute value) seen in any draw."""
    if values is None:
        seen = set()
        for draw in draws:
            a = draw.supersample.arrays
            if key == "label":
                seen.update(a["y_minus"].tolist() + a["y_plus"].tolist())
            elif draw.supersample.has_attributes:
                seen.update(a["t_minus"].tolist() + a["t_plus"].tolist())
        values = sorted(seen)
    out = []
    for v in values:
        per_draw = [draw_report(d, v, key=key, bins=bins, correction=correction) for d in draws]
        present = [r for r in per_draw if r is not None]
        if present:
            out.append(aggregate_reports(present, skipped=len(per_draw) - len(present)))
    return out


def subtask_report(draws: Sequence[DrawTrials], spec: SubtaskSpec, bins: int = DEFAULT_BINS,
                   *, correction: str = "none") -> SubtaskReport:
    reports = class_reports(draws, values=spec.classes, bins=bins, correction=correction)
    return subtask_from_reports(reports, spec)


def attribute_report(draws: Sequence[DrawTrials], t: int, bins: int = DEFAULT_BINS,
                     *, correction: str = "none") -> ClassBoundReport:
    """Attribute-wise gap and bounds: the class construction with indicators on t."""
    if not all(d.supersample.has_attributes for d in draws):
        raise EmptyClassError("attributes are missing on some examples")
    reports = class_reports(draws, key="attribute", values=[t], bins=bins, correction=correction)
    if not reports:
        raise EmptyClassError(f"attribute {t} is absent from every draw")
    return reports[0]


# --------------------------------------------------------------------------
# recall / specificity


class RecallSpecificity(NamedTuple):
    recall_gap: float
    specificity_gap: float
    max_identity_residual: float


def _confusion_gap(draw: DrawTrials, cls: int, half: float) -> np.ndarray:
    """Per-trial (FN_test - FN_train) / n_half for class ``cls``, from confusion counts."""
    s = draw.stacked
    a = draw.supersample.arrays
    plus_trains = s["mask"] == 1
    y_train = np.where(plus_trains, a["y_plus"][None, :], a["y_minus"][None, :])
    y_test = np.where(plus_trains, a["y_minus"][None, :], a["y_plus"][None, :])
    p_train = np.where(plus_trains, s["pred_plus"], s["pred_minus"])
    p_test = np.where(plus_trains, s["pred_minus"], s["pred_plus"])
    tp_train = ((y_train == cls) & (p_train == cls)).sum(axis=1)
    tp_test = ((y_test == cls) & (p_test == cls)).sum(axis=1)
    pos_train = (y_train == cls).sum(axis=1)
    pos_test = (y_test == cls).sum(axis=1)
    return ((pos_test - tp_test) - (pos_train - tp_train)) / half


def recall_specificity(draws: Sequence[DrawTrials], positive_class: int = 1,
                       tolerance: float = 1e-12) -> RecallSpecificity:
    """Recall and specificity gaps of a binary zero-one classifier.

    The gaps are the class gen errors of the positive and negative class.  Each
    trial is recomputed from train/test confusion matrices and must agree with
    the indicator-sum form to ``tolerance``.
    """
    if not draws:
        raise InvalidArgumentError("no trials given")
    for draw in draws:
        if draw.supersample.num_classes != 2:
            raise UnsupportedError("recall/specificity needs a binary task")
        s = draw.stacked
        a = draw.supersample.arrays
        expected_minus = (s["pred_minus"] != a["y_minus"][None, :]).astype(float)
        expected_plus = (s["pred_plus"] != a["y_plus"][None, :]).astype(float)
        if not (np.array_equal(s["loss_minus"], expected_minus) and np.array_equal(s["loss_plus"], expected_plus)):
            raise UnsupportedError("recall/specificity needs the zero-one loss")
    if positive_class not in (0, 1):
        raise InvalidArgumentError("positive class must be 0 or 1")
    residual = 0.0
    for draw in draws:
        for cls in (0, 1):
            ind_minus, ind_plus = _indicators(draw, "label", cls)
            half = _half_count(ind_minus, ind_plus)
            if half == 0:
                continue
            indicator_form = _trial_gaps(draw, ind_minus, ind_plus, half)
            confusion_form = _confusion_gap(draw, cls, half)
            residual = max(residual, float(np.max(np.abs(indicator_form - confusion_form))))
    if residual > tolerance:
        raise ClassGenError(f"confusion-matrix identity violated by {residual:.3g}")
    recall = class_gen_error(draws, positive_class).estimate
    specificity = class_gen_error(draws, 1 - positive_class).estimate
    return RecallSpecificity(recall, specificity, residual)

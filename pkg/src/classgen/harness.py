"""Experiment engine: m1 super-sample draws times m2 masks per training size.

For each ``n`` in the grid and each draw, a fresh super-sample of ``n`` pairs
is built, every mask trains the learner on its half, and both halves are
scored.  Information estimates are formed only after all masks of a draw are
in, since they pool over masks with the super-sample held fixed.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import jsonschema
import numpy as np

from . import bounds as B
from .core import SuperSample, TrialRecord, draw_mask
from .data import AttributeRule, CsvSchema, GeneratorSpec, load_csv, sample_iid
from .errors import ClassGenError, InsufficientSamplesError, InvalidArgumentError, LoadError
from .exact import ExactInstance, ExactResult, enumerate_masks, evaluate
from .info import CORRECTIONS, DEFAULT_BINS
from .learners import LearnerSpec, LossSpec, fit_arrays, parse_hypothesis_table

MASK64 = (1 << 64) - 1
MASK_MODES = ("iid", "distinct", "exhaustive")
SELECTORS = ("gen", "class_cmi", "f_cmi", "e_cmi", "delta_l_cmi")


# --------------------------------------------------------------------------
# seeds


def _splitmix(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive(master_seed: int, *indices: int) -> int:
    """64-bit seed for an index tuple.

    Chains the SplitMix64 finaliser: h0 = mix(master), h1 = mix(h0 ^ len),
    then h <- mix(h ^ index) per index.  The finaliser is a bijection on 64-bit
    words, so tuples of equal length that differ in one position never collide.
    """
    if master_seed < 0 or any(i < 0 for i in indices):
        raise InvalidArgumentError("seeds and indices must be non-negative")
    h = _splitmix(master_seed & MASK64)
    h = _splitmix(h ^ len(indices))
    for i in indices:
        h = _splitmix(h ^ (i & MASK64))
    return h


# --------------------------------------------------------------------------
# config


@dataclass(frozen=True)
class CsvSource:
    path: str
    schema: CsvSchema = CsvSchema()


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a run.

    ``data`` is a generator, a CSV source, or a fixed super-sample (used as-is
    for every draw, truncated to the first ``n`` pairs).  ``subtask_classes``
    with no ``subtask_weights`` weights the classes by their observed shares.
    ``mask_mode``: ``iid`` masks may repeat, ``distinct`` masks may not, and
    ``exhaustive`` enumerates all 2^n masks (ignoring ``m2``).
    """

    data: Union[GeneratorSpec, CsvSource, SuperSample]
    learner: LearnerSpec
    n_grid: tuple
    m1: int = 1
    m2: int = 2
    master_seed: int = 0
    bins: int = DEFAULT_BINS
    mi_correction: str = "none"
    subtask_classes: Optional[tuple] = None
    subtask_weights: Optional[tuple] = None
    attributes: bool = False
    mask_mode: str = "iid"
    nested: bool = False
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if not self.n_grid or min(self.n_grid) < 1:
            raise InvalidArgumentError("n_grid needs entries >= 1")
        if self.m1 < 1:
            raise InvalidArgumentError("m1 must be >= 1")
        if self.m2 < 2 and self.mask_mode != "exhaustive":
            raise InvalidArgumentError("m2 must be >= 2: MI estimation needs mask variation")
        if self.bins < 2:
            raise InvalidArgumentError("bins must be >= 2")
        if self.mi_correction not in CORRECTIONS:
            raise InvalidArgumentError(f"unknown MI correction {self.mi_correction!r}")
        if self.mask_mode not in MASK_MODES:
            raise InvalidArgumentError(f"unknown mask mode {self.mask_mode!r}")
        if self.workers < 1:
            raise InvalidArgumentError("workers must be >= 1")
        if not 0 <= self.master_seed <= MASK64:
            raise InvalidArgumentError("master seed must be an unsigned 64-bit integer")
        if self.subtask_classes is not None:
            object.__setattr__(self, "subtask_classes", tuple(int(c) for c in self.subtask_classes))
            if self.subtask_weights is not None:
                B.SubtaskSpec(self.subtask_classes, self.subtask_weights)  # validate early
                object.__setattr__(self, "subtask_weights", tuple(float(w) for w in self.subtask_weights))
        elif self.subtask_weights is not None:
            raise InvalidArgumentError("subtask weights given without subtask classes")

    def fingerprint(self) -> str:
        """sha256 of a canonical description; identifies results from this config."""
        text = json.dumps(_describe(self), sort_keys=True, separators=(",", ":"), default=repr)
        return hashlib.sha256(text.encode()).hexdigest()


def _describe(config: ExperimentConfig) -> dict:
    out = asdict(replace(config, data=None))
    data = config.data
    if isinstance(data, SuperSample):
        out["data"] = {"supersample": [[list(ex.features) + [ex.label, ex.attribute] for ex in pair]
                                       for pair in data.pairs]}
    else:
        out["data"] = {type(data).__name__: asdict(data)}
    out.pop("workers")  # scheduling never changes results
    return out


def _schema(name: str) -> dict:
    return json.loads(resources.files("classgen").joinpath("schemas").joinpath(name).read_text(encoding="utf-8"))


def _line_of(text: str, key) -> Optional[int]:
    if key is None:
        return None
    match = re.search(r'"%s"\s*:' % re.escape(str(key)), text)
    return text.count("\n", 0, match.start()) + 1 if match else None


def _schema_error(text: str, err: jsonschema.ValidationError) -> LoadError:
    key = None
    if err.validator == "additionalProperties":
        found = re.findall(r"'([^']+)' (?:was|were) unexpected", err.message)
        extra = re.findall(r"'([^']+)'", err.message.split("(")[-1]) if not found else found
        key = extra[0] if extra else None
        where = "/".join(str(p) for p in err.absolute_path) or "top level"
        message = f"unknown key {key!r} in {where}"
    else:
        keys = [p for p in err.absolute_path if isinstance(p, str)]
        key = keys[-1] if keys else None
        message = f"{'/'.join(str(p) for p in err.absolute_path) or 'config'}: {err.message}"
    return LoadError(message, line=_line_of(text, key))


def parse_config(text: str, base_dir: Union[str, Path] = ".") -> ExperimentConfig:
    """Build a config from JSON text; relative paths resolve against ``base_dir``."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LoadError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    validator = jsonschema.Draft202012Validator(_schema("config.schema.json"))
    errors = sorted(validator.iter_errors(raw), key=lambda e: (len(list(e.absolute_path)), e.message))
    if errors:
        raise _schema_error(text, errors[0])
    base = Path(base_dir)
    try:
        return _build_config(raw, base)
    except InvalidArgumentError as exc:
        raise LoadError(str(exc)) from None


def _build_config(raw: dict, base: Path) -> ExperimentConfig:
    data_raw = raw["data"]
    if "generator" in data_raw:
        g = dict(data_raw["generator"])
        rule = g.pop("attribute_rule", None)
        data = GeneratorSpec(
            kind=g["kind"], means=g["means"], scale=g.get("scale", 1.0),
            priors=g.get("priors"), label_noise=g.get("label_noise"),
            attribute_rule=AttributeRule(rule["feature"], rule.get("threshold", 0.0)) if rule else None,
        )
    else:
        c = data_raw["csv"]
        path = Path(c["path"])
        data = CsvSource(str(path if path.is_absolute() else base / path),
                         CsvSchema(tuple(c.get("features", ())), c.get("label", "label"), c.get("attribute")))
        if not data.schema.features:
            data = CsvSource(data.path, CsvSchema((), data.schema.label, data.schema.attribute))
    lr = dict(raw["learner"])
    if "hypotheses_file" in lr:
        path = Path(lr.pop("hypotheses_file"))
        path = path if path.is_absolute() else base / path
        try:
            lr["hypotheses"] = parse_hypothesis_table(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise LoadError(f"cannot read hypothesis table {path}: {exc}") from exc
    loss = LossSpec(lr.pop("loss", "zero_one"), lr.pop("cap", 10.0))
    learner = LearnerSpec(loss=loss, **lr)
    sub = raw.get("subtask")
    return ExperimentConfig(
        data=data,
        learner=learner,
        n_grid=tuple(raw["n_grid"]),
        m1=raw["m1"],
        m2=raw["m2"],
        master_seed=raw.get("master_seed", 0),
        bins=raw.get("bins", DEFAULT_BINS),
        mi_correction=raw.get("mi_correction", "none"),
        subtask_classes=tuple(sub["classes"]) if sub else None,
        subtask_weights=tuple(sub["weights"]) if sub and "weights" in sub else None,
        attributes=raw.get("attributes", False),
        mask_mode=raw.get("mask_mode", "iid"),
        nested=raw.get("nested", False),
        workers=raw.get("workers", 1),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise LoadError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, path.parent)


# --------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class DrawResult:
    n: int
    draw: int
    seed: int
    num_masks: int
    class_reports: tuple
    skipped_classes: tuple
    standard: dict
    attribute_reports: tuple = ()


@dataclass(frozen=True)
class NResult:
    n: int
    draws: tuple
    class_summary: tuple
    standard_mean: dict
    standard_std: dict
    subtask: Optional[B.SubtaskReport] = None
    attribute_summary: tuple = ()
    recall: Optional[B.RecallSpecificity] = None
    notes: tuple = ()


@dataclass(frozen=True)
class ExperimentResult:
    fingerprint: str
    master_seed: int
    num_classes: int
    per_n: tuple
    exact: Optional[ExactResult] = None
    draw_trials: dict = field(default_factory=dict, compare=False, repr=False)

    def to_dict(self) -> dict:
        out = {
            "fingerprint": self.fingerprint,
            "master_seed": self.master_seed,
            "num_classes": self.num_classes,
            "per_n": [_n_dict(r) for r in self.per_n],
        }
        if self.exact is not None:
            out["exact"] = _exact_dict(self.exact)
        return out

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), sort_keys=True, indent=2) + "\n"


def _jsonable(value):
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return value
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    return value


def _report_dict(r: B.ClassBoundReport) -> dict:
    d = asdict(r)
    d["per_pair_cmi"] = [asdict(p) for p in r.per_pair_cmi]
    return d


def _n_dict(r: NResult) -> dict:
    return {
        "n": r.n,
        "draws": [{
            "draw": d.draw,
            "seed": d.seed,
            "num_masks": d.num_masks,
            "class_reports": [_report_dict(c) for c in d.class_reports],
            "skipped_classes": list(d.skipped_classes),
            "standard": d.standard,
            "attribute_reports": [_report_dict(c) for c in d.attribute_reports],
        } for d in r.draws],
        "class_summary": [_report_dict(c) for c in r.class_summary],
        "standard_mean": r.standard_mean,
        "standard_std": r.standard_std,
        "subtask": asdict(r.subtask) if r.subtask else None,
        "attribute_summary": [_report_dict(c) for c in r.attribute_summary],
        "recall": r.recall._asdict() if r.recall else None,
        "notes": list(r.notes),
    }


def _exact_dict(e: ExactResult) -> dict:
    return {
        "kl": [asdict(k) for k in e.kl],
        "standard_gen": e.standard_gen,
        "standard_bounds": e.standard_bounds,
        "standard_gen_population": e.standard_gen_mi,
        "class_weighted_kl": e.class_weighted_kl,
        "attribute_reports": [_report_dict(r) for r in e.attribute_reports],
        "attribute_kl": [asdict(k) for k in e.attribute_kl],
        "attribute_weighted_kl": e.attribute_kl_sum,
        "subtask": asdict(e.subtask) if e.subtask else None,
        "baseline": asdict(e.baseline) if e.baseline else None,
        "notes": list(e.notes),
    }


# --------------------------------------------------------------------------
# engine


def _num_classes(config: ExperimentConfig, pool) -> int:
    data = config.data
    if isinstance(data, GeneratorSpec):
        return data.num_classes
    if isinstance(data, SuperSample):
        return data.num_classes
    return pool.num_classes


def _load_pool(config: ExperimentConfig):
    if isinstance(config.data, CsvSource):
        schema = config.data.schema
        if not schema.features:
            schema = None
        return load_csv(config.data.path, schema)
    return None


def _supersample(config: ExperimentConfig, pool, n: int, draw: int):
    data = config.data
    if isinstance(data, SuperSample):
        if n > data.n:
            raise InsufficientSamplesError(f"fixed super-sample has {data.n} pairs, n={n} requested")
        return 0, SuperSample(data.pairs[:n], data.num_classes, data.dimension, data.num_attributes)
    size = 2 * (max(config.n_grid) if config.nested else n)
    seed = derive(config.master_seed, 0, draw) if config.nested else derive(config.master_seed, n, draw)
    if isinstance(data, GeneratorSpec):
        examples = sample_iid(data, size, seed)[: 2 * n]
        return seed, SuperSample.from_examples(examples, data.num_classes, data.num_attributes)
    rows = pool.examples
    if len(rows) < size:
        raise InsufficientSamplesError(f"{data.path} has {len(rows)} rows; {size} needed for n={n}")
    order = np.random.default_rng(seed).permutation(len(rows))[:size][: 2 * n]
    examples = [rows[i] for i in order]
    has_attr = all(ex.attribute is not None for ex in examples)
    num_attr = (max(ex.attribute for ex in rows) + 1) if has_attr else None
    return seed, SuperSample.from_examples(examples, pool.num_classes, num_attr)


def _masks(config: ExperimentConfig, n: int, draw: int) -> list:
    if config.mask_mode == "exhaustive":
        return [tuple(row) for row in enumerate_masks(n).tolist()]
    if config.mask_mode == "iid":
        return [draw_mask(n, derive(config.master_seed, n, draw, j, 0)).entries for j in range(config.m2)]
    if config.m2 > 2 ** n:
        raise InvalidArgumentError(f"only {2 ** n} distinct masks exist for n={n}, m2={config.m2} requested")
    seen, out, j = set(), [], 0
    while len(out) < config.m2:
        mask = draw_mask(n, derive(config.master_seed, n, draw, j, 0)).entries
        j += 1
        if mask not in seen:
            seen.add(mask)
            out.append(mask)
    return out


def _run_trials(config: ExperimentConfig, ss: SuperSample, n: int, draw: int, num_classes: int) -> list:
    a = ss.arrays
    trials = []
    for j, entries in enumerate(_masks(config, n, draw)):
        mask = np.asarray(entries)
        plus = mask == 1
        x_train = np.where(plus[:, None], a["x_plus"], a["x_minus"])
        y_train = np.where(plus, a["y_plus"], a["y_minus"])
        try:
            model = fit_arrays(config.learner, x_train, y_train, derive(config.master_seed, n, draw, j, 1),
                               num_classes)
            trial = TrialRecord(
                supersample_id=draw, mask_id=j, mask=mask,
                pred_minus=model.predict(a["x_minus"]), pred_plus=model.predict(a["x_plus"]),
                loss_minus=model.loss(a["x_minus"], a["y_minus"]),
                loss_plus=model.loss(a["x_plus"], a["y_plus"]),
                y_minus=a["y_minus"], y_plus=a["y_plus"],
                t_minus=a.get("t_minus"), t_plus=a.get("t_plus"),
                model_id=model.hypothesis_index if config.learner.is_finite else None,
            )
        except ClassGenError as exc:
            raise type(exc)(f"n={n}, draw={draw}, mask={j}: {exc}") from exc
        except (ValueError, FloatingPointError, ArithmeticError) as exc:
            raise ClassGenError(f"learner failed at n={n}, draw={draw}, mask={j}: {exc}") from exc
        trials.append(trial)
    return trials


def _draw_task(args):
    config, pool, n, draw, num_classes = args
    seed, ss = _supersample(config, pool, n, draw)
    trials = _run_trials(config, ss, n, draw, num_classes)
    return seed, B.DrawTrials(ss, trials, supersample_id=draw, exhaustive=config.mask_mode == "exhaustive",
                              discrete_loss=config.learner.loss.is_discrete)


def _standard(reports) -> dict:
    return {sel: B.standard_gen_bound(reports, None, sel) for sel in SELECTORS} if reports else {
        sel: None for sel in SELECTORS}


def _summarise_draw(config, n, draw, seed, trials: B.DrawTrials, num_classes) -> DrawResult:
    kw = dict(bins=config.bins, correction=config.mi_correction)
    reports, skipped = [], []
    for y in range(num_classes):
        r = B.draw_report(trials, y, **kw)
        (reports if r is not None else skipped).append(r if r is not None else y)
    attr = ()
    if config.attributes and trials.supersample.has_attributes:
        a = trials.supersample.arrays
        values = sorted(set(a["t_minus"].tolist()) | set(a["t_plus"].tolist()))
        attr = tuple(B.draw_report(trials, t, key="attribute", **kw) for t in values)
    return DrawResult(n, draw, seed, trials.m, tuple(reports), tuple(skipped), _standard(reports), attr)


def _mean_std(values):
    values = [v for v in values if v is not None]
    if not values:
        return None, None
    return float(np.mean(values)), float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def _summarise_n(config, n, draws: list, draw_trials: list, num_classes) -> NResult:
    notes = []
    summary = []
    for y in range(num_classes):
        present = [r for d in draws for r in d.class_reports if r.y == y]
        if present:
            summary.append(B.aggregate_reports(present, skipped=len(draws) - len(present)))
        else:
            notes.append(f"class {y} absent from all {len(draws)} draws")
    means, stds = {}, {}
    for sel in SELECTORS:
        means[sel], stds[sel] = _mean_std([d.standard[sel] for d in draws])
    subtask = None
    if config.subtask_classes is not None:
        try:
            if config.subtask_weights is None:
                by_class = {r.y: r for r in summary}
                missing = [c for c in config.subtask_classes if c not in by_class]
                if missing:
                    raise B.EmptyClassError(f"subtask classes {missing} are absent from the data")
                spec = B.SubtaskSpec.proportional(
                    config.subtask_classes, {c: by_class[c].n_y_half for c in config.subtask_classes})
            else:
                spec = B.SubtaskSpec(config.subtask_classes, config.subtask_weights)
            subtask = B.subtask_from_reports(summary, spec)
        except (ClassGenError, KeyError, ZeroDivisionError) as exc:
            notes.append(f"subtask skipped: {exc}")
    attr_summary = []
    if config.attributes:
        values = sorted({r.y for d in draws for r in d.attribute_reports if r is not None})
        for t in values:
            present = [r for d in draws for r in d.attribute_reports if r is not None and r.y == t]
            attr_summary.append(B.aggregate_reports(present, skipped=len(draws) - len(present)))
    recall = None
    if num_classes == 2 and config.learner.loss.is_discrete:
        try:
            recall = B.recall_specificity(draw_trials)
        except ClassGenError as exc:
            notes.append(f"recall/specificity skipped: {exc}")
    return NResult(n, tuple(draws), tuple(summary), means, stds, subtask, tuple(attr_summary), recall,
                   tuple(notes))


def run_experiment(config: ExperimentConfig, *, keep_trials: bool = False) -> ExperimentResult:
    """Run the whole grid.  Deterministic in ``config`` regardless of ``workers``.

    With ``keep_trials`` the per-draw trial groups are kept on the result
    (keyed by ``(n, draw)``) for downstream estimators.
    """
    pool = _load_pool(config)
    num_classes = _num_classes(config, pool)
    tasks = [(config, pool, n, draw, num_classes) for n in config.n_grid for draw in range(config.m1)]
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as ex:
            outputs = list(ex.map(_draw_task, tasks))
    else:
        outputs = [_draw_task(t) for t in tasks]
    per_n, kept = [], {}
    k = 0
    for n in config.n_grid:
        draws, groups = [], []
        for draw in range(config.m1):
            seed, trials = outputs[k]
            k += 1
            draws.append(_summarise_draw(config, n, draw, seed, trials, num_classes))
            groups.append(trials)
            if keep_trials:
                kept[(n, draw)] = trials
        per_n.append(_summarise_n(config, n, draws, groups, num_classes))
    return ExperimentResult(config.fingerprint(), config.master_seed, num_classes, tuple(per_n),
                            draw_trials=kept)


def run_exact(instance: ExactInstance, subtask: Optional[B.SubtaskSpec] = None,
              sigma: Optional[float] = None) -> ExperimentResult:
    """Exact counterpart of :func:`run_experiment` on one fixed super-sample.

    Mask averages are full expectations, so every stderr is 0.
    """
    result = evaluate(instance, subtask, sigma)
    n = instance.n
    present = {r.y for r in result.class_reports}
    draw = DrawResult(n, 0, 0, 1 << n, result.class_reports,
                      tuple(y for y in range(instance.num_classes) if y not in present),
                      _standard(list(result.class_reports)), result.attribute_reports)
    summary = tuple(B.aggregate_reports([r]) for r in result.class_reports)
    means = {sel: draw.standard[sel] for sel in SELECTORS}
    stds = {sel: (0.0 if draw.standard[sel] is not None else None) for sel in SELECTORS}
    desc = json.dumps({"pmf": instance.pmf.tolist(), "table": _table_list(instance),
                       "pairs": [[list(ex.features) + [ex.label] for ex in p] for p in instance.supersample.pairs],
                       "attributes": instance.input_attributes}, sort_keys=True)
    fp = hashlib.sha256(desc.encode()).hexdigest()
    nres = NResult(n, (draw,), summary, means, stds, result.subtask,
                   tuple(B.aggregate_reports([r]) for r in result.attribute_reports), None, result.notes)
    return ExperimentResult(fp, 0, instance.num_classes, (nres,), exact=result)


def _table_list(instance):
    spec = instance.learner
    return [list(row) for row in spec.hypotheses] if spec.hypotheses else [spec.kind, spec.label]

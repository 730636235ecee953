"""Command-line entry point: gen-data, run, verify-exact, plot.

Exit codes: 0 success, 1 invariant violation, 2 usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from .data import AttributeRule, GeneratorSpec, sample_iid, save_csv
from .errors import ClassGenError, LoadError
from .exact import checks, instance_from_dict, random_instance
from .harness import load_config, run_exact, run_experiment
from .report import PLOT_KINDS, read_rows, rows_from_result, validate_summary, write_rows

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
NATS_PER_BIT = math.log(2.0)


class _Failure(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _means(text: str) -> tuple:
    return tuple(_floats(chunk) for chunk in text.split(";") if chunk.strip())


def _u64(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _require_file(path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise _Failure(EXIT_IO, f"no such file: {path}")
    return path


# --------------------------------------------------------------------------
# subcommands


def cmd_gen_data(args) -> int:
    rule = AttributeRule(args.attribute_feature, args.attribute_threshold) if args.attribute_feature is not None else None
    try:
        spec = GeneratorSpec(args.kind, args.means, args.scale, args.priors, args.label_noise, rule)
    except ClassGenError as exc:
        raise _Failure(EXIT_USAGE, str(exc)) from None
    if args.count < 0:
        raise _Failure(EXIT_USAGE, "--count must be >= 0")
    examples = sample_iid(spec, args.count, args.seed)
    try:
        count = save_csv(args.out, examples, spec.dimension)
    except OSError as exc:
        raise _Failure(EXIT_IO, f"cannot write {args.out}: {exc}") from None
    print(f"wrote {count} rows to {args.out}")
    return EXIT_OK


def _print_table(result, bits: bool) -> None:
    unit = "bits" if bits else "nats"
    scale = 1.0 / NATS_PER_BIT if bits else 1.0
    print(f"{'n':>6} {'class':>5} {'gen':>10} {'stderr':>9} {'dL-CMI':>9} {'e-CMI':>9} {'f-CMI':>9} "
          f"{'mean I(dL;U) ' + unit:>20}")
    for nres in result.per_n:
        for r in nres.class_summary:
            mis = [p.mi_delta for d in nres.draws for c in d.class_reports if c.y == r.y for p in c.per_pair_cmi
                   if p.indicator_max]
            mean_mi = scale * sum(mis) / len(mis) if mis else 0.0
            print(f"{nres.n:>6} {r.y:>5} {r.gen_estimate:>10.4f} {r.mc_stderr:>9.4f} {r.bound_delta_l_cmi:>9.4f} "
                  f"{r.bound_e_cmi:>9.4f} {r.bound_f_cmi:>9.4f} {mean_mi:>20.4f}")
        for note in nres.notes:
            print(f"       note (n={nres.n}): {note}")


def cmd_run(args) -> int:
    config = load_config(_require_file(args.config))
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.bins is not None:
        overrides["bins"] = args.bins
    if args.mi_correction is not None:
        overrides["mi_correction"] = args.mi_correction.replace("-", "_")
    if overrides:
        config = replace(config, **overrides)
    result = run_experiment(config)
    document = json.loads(result.to_json())
    validate_summary(document)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        rows = rows_from_result(result)
        write_rows(out / "rows.csv", rows)
        (out / "summary.json").write_text(result.to_json(), encoding="utf-8")
        if args.plots:
            for kind, render in PLOT_KINDS.items():
                (out / f"{kind}.svg").write_text(render(rows), encoding="utf-8")
    except OSError as exc:
        raise _Failure(EXIT_IO, f"cannot write results to {out}: {exc}") from None
    _print_table(result, args.bits)
    print(f"wrote {len(rows)} rows to {out / 'rows.csv'}")
    return EXIT_OK


def _load_instances(path: Path) -> list:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise _Failure(EXIT_IO, f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise LoadError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    items = raw if isinstance(raw, list) else [raw]
    return [instance_from_dict(item) for item in items]


def cmd_verify_exact(args) -> int:
    if (args.instance is None) == (args.random is None):
        raise _Failure(EXIT_USAGE, "give either an instance file or --random N")
    if args.random is not None:
        if args.random < 1:
            raise _Failure(EXIT_USAGE, "--random needs N >= 1")
        seed = args.seed if args.seed is not None else 0
        jobs = [(f"random#{k}", random_instance(seed * 1_000_003 + k), None) for k in range(args.random)]
    else:
        loaded = _load_instances(_require_file(args.instance))
        jobs = [(f"instance#{k}", inst, spec) for k, (inst, spec) in enumerate(loaded)]
    failures = 0
    total = 0
    for name, instance, spec in jobs:
        result = run_exact(instance, spec)
        found = checks(result.exact)
        total += len(found)
        bad = [c for c in found if not c.passed]
        margin = min((c.margin for c in found), default=math.inf)
        gen = max((abs(r.gen_estimate) for r in result.exact.class_reports), default=0.0)
        status = "FAIL" if bad else "ok"
        print(f"{name}: {status} n={instance.n} classes={instance.num_classes} checks={len(found)} "
              f"max|gen|={gen:.6g} min margin={margin:.6g}")
        for c in bad:
            print(f"  violated: {c.name} ({c.lhs:.12g} > {c.rhs:.12g})")
        failures += len(bad)
    print(f"{len(jobs)} instances, {total} checks, {failures} violations")
    return EXIT_VIOLATION if failures else EXIT_OK


def cmd_plot(args) -> int:
    rows = read_rows(_require_file(args.rows))
    svg = PLOT_KINDS[args.kind](rows)
    try:
        Path(args.out).write_text(svg, encoding="utf-8")
    except OSError as exc:
        raise _Failure(EXIT_IO, f"cannot write {args.out}: {exc}") from None
    print(f"wrote {args.kind} plot of {len(rows)} rows to {args.out}")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="classgen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="sample a synthetic dataset to CSV")
    g.add_argument("--kind", default="gaussian-mixture", choices=("gaussian-mixture", "concentric", "xor"))
    g.add_argument("--means", type=_means, default=((-1.0, -1.0), (1.0, 1.0)),
                   help="class means, e.g. '-1,-1;1,1'")
    g.add_argument("--scale", type=float, default=1.0)
    g.add_argument("--priors", type=_floats, default=None)
    g.add_argument("--label-noise", type=_floats, default=None)
    g.add_argument("--attribute-feature", type=int, default=None)
    g.add_argument("--attribute-threshold", type=float, default=0.0)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=_u64, default=0)
    g.add_argument("--out", required=True, help="CSV file to write")
    g.set_defaults(func=cmd_gen_data)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--seed", type=_u64, default=None, help="override master_seed")
    r.add_argument("--bins", type=int, default=None)
    r.add_argument("--mi-correction", choices=("none", "miller-madow"), default=None)
    r.add_argument("--bits", action="store_true", help="print information quantities in bits")
    r.add_argument("--plots", action="store_true", help="also write lines.svg and scatter.svg")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify-exact", help="check every bound on enumerated instances")
    v.add_argument("instance", nargs="?", default=None, help="JSON instance file (object or list)")
    v.add_argument("--random", type=int, default=None, metavar="N")
    v.add_argument("--seed", type=_u64, default=None)
    v.set_defaults(func=cmd_verify_exact)

    p = sub.add_parser("plot", help="render rows.csv as SVG")
    p.add_argument("rows")
    p.add_argument("--kind", choices=tuple(PLOT_KINDS), default="lines")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except _Failure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except LoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO if isinstance(exc.__cause__, (OSError, UnicodeDecodeError)) else EXIT_USAGE
    except ClassGenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

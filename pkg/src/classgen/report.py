"""Tabular, JSON and SVG output of experiment results."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import astuple, dataclass, fields
from importlib import resources
from typing import Optional, Sequence

import jsonschema

from .errors import LoadError

ROW_FIELDS = ("n", "y", "gen_estimate", "stderr", "bound_f_cmi", "bound_delta_l_cmi",
              "bound_e_cmi", "bound_class_cmi", "n_y_half")


@dataclass(frozen=True)
class ReportRow:
    """One (n, class) line; unavailable values are None and written blank."""

    n: int
    y: int
    gen_estimate: Optional[float]
    stderr: Optional[float]
    bound_f_cmi: Optional[float]
    bound_delta_l_cmi: Optional[float]
    bound_e_cmi: Optional[float]
    bound_class_cmi: Optional[float]
    n_y_half: float


def rows_from_result(result) -> list:
    """One row per (n, class) for every class id, present or not."""
    rows = []
    for nres in result.per_n:
        by_class = {r.y: r for r in nres.class_summary}
        for y in range(result.num_classes):
            r = by_class.get(y)
            if r is None:
                rows.append(ReportRow(nres.n, y, None, None, None, None, None, None, 0.0))
                continue
            rows.append(ReportRow(nres.n, y, r.gen_estimate, r.mc_stderr, r.bound_f_cmi, r.bound_delta_l_cmi,
                                  r.bound_e_cmi, r.bound_class_cmi, r.n_y_half))
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if math.isnan(value):
        raise ValueError("NaN cannot be written to a report row")
    return format(value, ".17g")


def emit_rows(rows: Sequence[ReportRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROW_FIELDS)
    for row in rows:
        writer.writerow([_fmt(v) for v in astuple(row)])
    return buf.getvalue()


def parse_rows(text: str) -> list:
    lines = text.splitlines()
    if not lines or [c.strip() for c in next(csv.reader([lines[0]]))] != list(ROW_FIELDS):
        raise LoadError(f"rows header must be {','.join(ROW_FIELDS)}", line=1)
    types = [f.type for f in fields(ReportRow)]
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = next(csv.reader([line]))
        if len(cells) != len(ROW_FIELDS):
            raise LoadError(f"expected {len(ROW_FIELDS)} fields, got {len(cells)}", line=lineno)
        values = []
        for name, kind, cell in zip(ROW_FIELDS, types, cells):
            cell = cell.strip()
            try:
                if kind == "int":
                    values.append(int(cell))
                elif cell == "" and kind.startswith("Optional"):
                    values.append(None)
                else:
                    value = float(cell)
                    if math.isnan(value):
                        raise ValueError("nan")
                    values.append(value)
            except ValueError:
                raise LoadError(f"bad value {cell!r} for {name}", line=lineno) from None
        out.append(ReportRow(*values))
    return out


def write_rows(path, rows: Sequence[ReportRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(emit_rows(rows))


def read_rows(path) -> list:
    try:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise LoadError(f"cannot read {path}: {exc}") from exc
    return parse_rows(text)


def summary_schema() -> dict:
    return json.loads(resources.files("classgen").joinpath("schemas").joinpath("summary.schema.json")
                      .read_text(encoding="utf-8"))


def validate_summary(document) -> None:
    """Raise jsonschema.ValidationError if ``document`` breaks the summary schema."""
    jsonschema.Draft202012Validator(summary_schema()).validate(document)


# --------------------------------------------------------------------------
# SVG

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 150, 30, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _num(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, count: int = 5) -> list:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * k / (count - 1) for k in range(count)]


class _Canvas:
    def __init__(self, x_range, y_range, title, x_label, y_label):
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2:.1f}" y="18" text-anchor="middle" font-size="13">{title}</text>',
        ]
        px0, px1 = LEFT, WIDTH - RIGHT
        py0, py1 = HEIGHT - BOTTOM, TOP
        self.parts.append(f'<line x1="{px0}" y1="{py0}" x2="{px1}" y2="{py0}" stroke="black"/>')
        self.parts.append(f'<line x1="{px0}" y1="{py0}" x2="{px0}" y2="{py1}" stroke="black"/>')
        for t in _ticks(self.x0, self.x1):
            x = self.px(t)
            self.parts.append(f'<line x1="{_num(x)}" y1="{py0}" x2="{_num(x)}" y2="{py0 + 4}" stroke="black"/>')
            self.parts.append(f'<text x="{_num(x)}" y="{py0 + 16}" text-anchor="middle">{t:.3g}</text>')
        for t in _ticks(self.y0, self.y1):
            y = self.py(t)
            self.parts.append(f'<line x1="{px0 - 4}" y1="{_num(y)}" x2="{px0}" y2="{_num(y)}" stroke="black"/>')
            self.parts.append(f'<text x="{px0 - 6}" y="{_num(y + 4)}" text-anchor="end">{t:.3g}</text>')
        self.parts.append(f'<text x="{(px0 + px1) / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{x_label}</text>')
        self.parts.append(f'<text x="16" y="{(py0 + py1) / 2:.1f}" text-anchor="middle" '
                          f'transform="rotate(-90 16 {(py0 + py1) / 2:.1f})">{y_label}</text>')

    def px(self, v):
        span = self.x1 - self.x0 or 1.0
        return LEFT + (v - self.x0) / span * (WIDTH - LEFT - RIGHT)

    def py(self, v):
        span = self.y1 - self.y0 or 1.0
        return HEIGHT - BOTTOM - (v - self.y0) / span * (HEIGHT - TOP - BOTTOM)

    def polyline(self, points, color, dashed=False):
        coords = " ".join(f"{_num(self.px(x))},{_num(self.py(y))}" for x, y in points)
        dash = ' stroke-dasharray="5,4"' if dashed else ""
        self.parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')

    def dot(self, x, y, color):
        self.parts.append(f'<circle cx="{_num(self.px(x))}" cy="{_num(self.py(y))}" r="3" fill="{color}"/>')

    def legend(self, index, color, label, dashed=False):
        y = TOP + 14 * index + 6
        x = WIDTH - RIGHT + 12
        dash = ' stroke-dasharray="5,4"' if dashed else ""
        self.parts.append(f'<line x1="{x}" y1="{y}" x2="{x + 18}" y2="{y}" stroke="{color}" stroke-width="1.5"{dash}/>')
        self.parts.append(f'<text x="{x + 22}" y="{y + 4}">{label}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _finite(v):
    return v is not None and math.isfinite(v)


def _range(values, include_zero=True):
    values = [v for v in values if _finite(v)]
    if include_zero:
        values.append(0.0)
    if not values:
        return 0.0, 1.0
    lo, hi = min(values), max(values)
    if hi == lo:
        hi = lo + 1.0
    return lo, hi


def lines_svg(rows: Sequence[ReportRow]) -> str:
    """Per-class gen estimate (solid) and ΔL-CMI bound (dashed) against n."""
    usable = [r for r in rows if _finite(r.gen_estimate)]
    x_lo, x_hi = _range([r.n for r in usable], include_zero=False)
    y_lo, y_hi = _range([v for r in usable for v in (r.gen_estimate, r.bound_delta_l_cmi)])
    canvas = _Canvas((x_lo, x_hi), (y_lo, y_hi), "class generalization vs n", "n", "value")
    for idx, y in enumerate(sorted({r.y for r in usable})):
        color = PALETTE[idx % len(PALETTE)]
        series = sorted((r for r in usable if r.y == y), key=lambda r: r.n)
        canvas.polyline([(r.n, r.gen_estimate) for r in series], color)
        bound = [(r.n, r.bound_delta_l_cmi) for r in series if _finite(r.bound_delta_l_cmi)]
        if bound:
            canvas.polyline(bound, color, dashed=True)
        for r in series:
            canvas.dot(r.n, r.gen_estimate, color)
        canvas.legend(2 * idx, color, f"class {y} gen")
        canvas.legend(2 * idx + 1, color, f"class {y} bound", dashed=True)
    return canvas.render()


def scatter_svg(rows: Sequence[ReportRow]) -> str:
    """Gen estimate (x) against ΔL-CMI bound (y) with the y = x diagonal."""
    usable = [r for r in rows if _finite(r.gen_estimate) and _finite(r.bound_delta_l_cmi)]
    lo, hi = _range([v for r in usable for v in (r.gen_estimate, r.bound_delta_l_cmi)])
    canvas = _Canvas((lo, hi), (lo, hi), "bound vs class generalization error", "gen estimate", "ΔL-CMI bound")
    canvas.parts.append(f'<line x1="{_num(canvas.px(lo))}" y1="{_num(canvas.py(lo))}" '
                        f'x2="{_num(canvas.px(hi))}" y2="{_num(canvas.py(hi))}" stroke="gray" '
                        f'stroke-dasharray="3,3"/>')
    for idx, y in enumerate(sorted({r.y for r in usable})):
        color = PALETTE[idx % len(PALETTE)]
        for r in sorted((r for r in usable if r.y == y), key=lambda r: r.n):
            canvas.dot(r.gen_estimate, r.bound_delta_l_cmi, color)
        canvas.legend(idx, color, f"class {y}")
    return canvas.render()


PLOT_KINDS = {"lines": lines_svg, "scatter": scatter_svg}

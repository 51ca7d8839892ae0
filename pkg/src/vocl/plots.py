"""Figure emission: deterministic SVG charts from run CSVs.

Rendering is hand-rolled (fixed layout, fixed number formats, no
timestamps), so the same CSV always produces the same bytes.  Four chart
kinds cover the package's outputs: validation curves and weight traces
from a training metrics CSV, a score histogram from a difficulty
manifest, and the cumulative error curve from an evaluation error list.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import EmptyInput, MissingColumns
from .metrics import auc

PLOT_KINDS = ("training_curves", "weight_trace", "difficulty_hist", "auc_curve")

WIDTH, HEIGHT = 640, 400
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 72, 24, 36, 56
PLOT_W = WIDTH - MARGIN_L - MARGIN_R
PLOT_H = HEIGHT - MARGIN_T - MARGIN_B
N_TICKS = 5
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
FONT = 'font-family="sans-serif"'


def read_csv_rows(path):
    """Read a CSV into (header tuple, list of per-row dicts of strings)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(next(reader))
        except StopIteration:
            raise EmptyInput(f"{path} is empty") from None
        rows = [dict(zip(header, row)) for row in reader]
    return header, rows


def require_columns(header, needed):
    missing = sorted(set(needed) - set(header))
    if missing:
        raise MissingColumns(missing)


def _fmt(v):
    return f"{v:.2f}"


def _span(values, pad=0.05):
    lo, hi = float(min(values)), float(max(values))
    if hi <= lo:
        bump = max(abs(lo) * 0.1, 1e-9)
        return lo - bump, lo + bump
    margin = (hi - lo) * pad
    return lo - margin, hi + margin


class _Frame:
    """Data-to-pixel mapping for the fixed plot rectangle."""

    def __init__(self, x_lo, x_hi, y_lo, y_hi):
        self.x_lo, self.x_hi = x_lo, x_hi
        self.y_lo, self.y_hi = y_lo, y_hi

    def px(self, x):
        return MARGIN_L + (x - self.x_lo) / (self.x_hi - self.x_lo) * PLOT_W

    def py(self, y):
        return MARGIN_T + PLOT_H - (y - self.y_lo) / (self.y_hi - self.y_lo) * PLOT_H


def _axes(parts, frame, title, x_label, y_label):
    parts.append(
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{PLOT_W}" height="{PLOT_H}" '
        'fill="none" stroke="#333333" stroke-width="1"/>'
    )
    for tick in np.linspace(frame.x_lo, frame.x_hi, N_TICKS):
        x = _fmt(frame.px(tick))
        parts.append(
            f'<line x1="{x}" y1="{MARGIN_T + PLOT_H}" x2="{x}" '
            f'y2="{MARGIN_T + PLOT_H + 5}" stroke="#333333"/>'
        )
        parts.append(
            f'<text x="{x}" y="{MARGIN_T + PLOT_H + 20}" {FONT} font-size="11" '
            f'text-anchor="middle">{tick:.3g}</text>'
        )
    for tick in np.linspace(frame.y_lo, frame.y_hi, N_TICKS):
        y = _fmt(frame.py(tick))
        parts.append(
            f'<line x1="{MARGIN_L - 5}" y1="{y}" x2="{MARGIN_L}" y2="{y}" stroke="#333333"/>'
        )
        parts.append(
            f'<text x="{MARGIN_L - 8}" y="{y}" {FONT} font-size="11" '
            f'text-anchor="end" dominant-baseline="middle">{tick:.3g}</text>'
        )
    parts.append(
        f'<text x="{MARGIN_L + PLOT_W / 2:.1f}" y="{HEIGHT - 14}" {FONT} '
        f'font-size="13" text-anchor="middle">{x_label}</text>'
    )
    parts.append(
        f'<text x="18" y="{MARGIN_T + PLOT_H / 2:.1f}" {FONT} font-size="13" '
        f'text-anchor="middle" transform="rotate(-90 18 {MARGIN_T + PLOT_H / 2:.1f})">'
        f"{y_label}</text>"
    )
    parts.append(
        f'<text x="{MARGIN_L + PLOT_W / 2:.1f}" y="22" {FONT} font-size="14" '
        f'text-anchor="middle" font-weight="bold">{title}</text>'
    )


def _polyline(parts, frame, xs, ys, color, dash=None):
    pts = " ".join(f"{_fmt(frame.px(x))},{_fmt(frame.py(y))}" for x, y in zip(xs, ys))
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    parts.append(
        f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{extra}/>'
    )


def _legend(parts, entries):
    x = MARGIN_L + PLOT_W - 150
    y = MARGIN_T + 12
    for i, (label, color) in enumerate(entries):
        yy = y + 16 * i
        parts.append(
            f'<line x1="{x}" y1="{yy}" x2="{x + 22}" y2="{yy}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{x + 28}" y="{yy}" {FONT} font-size="11" '
            f'dominant-baseline="middle">{label}</text>'
        )


def _document(parts):
    body = "\n".join(parts)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">\n'
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>\n'
        f"{body}\n</svg>\n"
    )


def _floats(rows, column):
    return [float(r[column]) for r in rows]


def training_curves_svg(header, rows):
    """Validation ATE and AUC against training step."""
    require_columns(header, ("step", "val_ate", "val_auc"))
    val_rows = [r for r in rows if r["val_ate"] != ""]
    if not val_rows:
        raise EmptyInput("metrics CSV has no validation rows")
    steps = _floats(val_rows, "step")
    ates = _floats(val_rows, "val_ate")
    aucs = _floats(val_rows, "val_auc")
    frame = _Frame(*_span(steps, pad=0.0), *_span([0.0, *ates, *aucs]))
    parts = []
    _axes(parts, frame, "Validation during training", "training step",
          "ATE [m] / AUC [0..1]")
    _polyline(parts, frame, steps, ates, PALETTE[0])
    _polyline(parts, frame, steps, aucs, PALETTE[1])
    _legend(parts, [("validation ATE [m]", PALETTE[0]), ("AUC at 1 m", PALETTE[1])])
    return _document(parts)


def weight_trace_svg(header, rows):
    """Curriculum weights w_f, w_p, w_r against training step."""
    require_columns(header, ("step", "w_f", "w_p", "w_r"))
    if not rows:
        raise EmptyInput("metrics CSV has no rows")
    steps = _floats(rows, "step")
    series = [(name, _floats(rows, name)) for name in ("w_f", "w_p", "w_r")]
    all_w = [v for _, values in series for v in values]
    frame = _Frame(*_span(steps, pad=0.0), *_span([0.0, *all_w]))
    parts = []
    _axes(parts, frame, "Curriculum weight trace", "training step",
          "loss weight [dimensionless]")
    for (name, values), color in zip(series, PALETTE):
        _polyline(parts, frame, steps, values, color)
    _legend(parts, [(name, color) for (name, _), color in zip(series, PALETTE)])
    return _document(parts)


def difficulty_hist_svg(header, rows, n_bins=20):
    """Score histogram from a difficulty manifest, with level cut points."""
    require_columns(header, ("score", "level"))
    if not rows:
        raise EmptyInput("difficulty manifest has no rows")
    scores = _floats(rows, "score")
    levels = [int(r["level"]) for r in rows]
    counts, edges = np.histogram(scores, bins=n_bins, range=(0.0, 1.0))
    frame = _Frame(0.0, 1.0, 0.0, float(counts.max()) * 1.05 if counts.max() else 1.0)
    parts = []
    _axes(parts, frame, "Difficulty score distribution",
          "difficulty score [0..1]", "sequences [count]")
    for lo, hi, count in zip(edges[:-1], edges[1:], counts):
        if count == 0:
            continue
        x = frame.px(lo)
        top = frame.py(float(count))
        parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(top)}" '
            f'width="{_fmt(frame.px(hi) - x)}" '
            f'height="{_fmt(MARGIN_T + PLOT_H - top)}" '
            f'fill="{PALETTE[0]}" fill-opacity="0.7" stroke="#ffffff" stroke-width="0.5"/>'
        )
    # cut points between consecutive levels: the top score of each level below the last
    for level in sorted(set(levels))[:-1]:
        cut = max(s for s, lv in zip(scores, levels) if lv == level)
        x = _fmt(frame.px(cut))
        parts.append(
            f'<line x1="{x}" y1="{MARGIN_T}" x2="{x}" y2="{MARGIN_T + PLOT_H}" '
            f'stroke="{PALETTE[1]}" stroke-width="1.5" stroke-dasharray="5,3"/>'
        )
        parts.append(
            f'<text x="{x}" y="{MARGIN_T + 12}" {FONT} font-size="11" '
            f'text-anchor="middle" fill="{PALETTE[1]}">{cut:.3g}</text>'
        )
    return _document(parts)


def auc_curve_svg(header, rows, t_max=1.0):
    """Cumulative fraction of sequences under an error threshold."""
    require_columns(header, ("ate",))
    if not rows:
        raise EmptyInput("error list has no rows")
    errors = sorted(_floats(rows, "ate"))
    n = len(errors)
    # staircase: fraction below t jumps by 1/n at each sorted error
    xs, ys = [0.0], [float(np.searchsorted(errors, 0.0, side="right")) / n]
    for i, e in enumerate(errors):
        if e > t_max:
            break
        xs.extend([e, e])
        ys.extend([ys[-1], (i + 1) / n])
    xs.append(t_max)
    ys.append(ys[-1])
    frame = _Frame(0.0, t_max, 0.0, 1.05)
    parts = []
    _axes(parts, frame, "Cumulative trajectory error",
          "ATE threshold [m]", "fraction of sequences [0..1]")
    _polyline(parts, frame, xs, ys, PALETTE[0])
    _legend(parts, [(f"AUC = {auc(errors, t_max=t_max):.4f}", PALETTE[0])])
    return _document(parts)


_RENDERERS = {
    "training_curves": training_curves_svg,
    "weight_trace": weight_trace_svg,
    "difficulty_hist": difficulty_hist_svg,
    "auc_curve": auc_curve_svg,
}


def render_plot(csv_path, kind, out_path):
    """Render one chart kind from a CSV; nothing is written on error."""
    if kind not in _RENDERERS:
        raise ValueError(f"unknown plot kind: {kind!r}")
    header, rows = read_csv_rows(csv_path)
    svg = _RENDERERS[kind](header, rows)
    out_path = Path(out_path)
    out_path.write_text(svg)
    return out_path

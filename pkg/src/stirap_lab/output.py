"""Plain-text writers: CSV tables, JSON documents and small SVG line plots."""

from __future__ import annotations

import csv
import json
import math
from xml.sax.saxutils import escape

import numpy as np


def format_value(x):
    """Shortest round-trip text for a number; ``inf``/``-inf`` kept, NaN left empty."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (complex, np.complexfloating)):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    return obj


def write_json(path, data):
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def write_svg_plot(path, x, series, xlabel="", ylabel="", title="", width=640, height=400):
    """Line plot of one or more ``(label, y)`` series sharing the abscissa ``x``."""
    x = np.asarray(x, dtype=float)
    pad_l, pad_r, pad_t, pad_b = 60, 120, 30, 45
    ys = [np.asarray(y, dtype=float) for _, y in series]
    finite = np.concatenate([y[np.isfinite(y)] for y in ys]) if ys else np.zeros(1)
    ymin, ymax = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if ymax == ymin:
        ymin, ymax = ymin - 0.5, ymax + 0.5
    xmin, xmax = float(x.min()), float(x.max())
    if xmax == xmin:
        xmin, xmax = xmin - 0.5, xmax + 0.5
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def sx(v):
        return pad_l + (v - xmin) / (xmax - xmin) * pw

    def sy(v):
        return pad_t + (1 - (v - ymin) / (ymax - ymin)) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle">{escape(title)}</text>',
        f'<text x="{pad_l + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">'
        f'{escape(xlabel)}</text>',
        f'<text x="14" y="{pad_t + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {pad_t + ph / 2:.1f})">{escape(ylabel)}</text>',
        f'<text x="{pad_l - 4}" y="{pad_t + ph:.1f}" text-anchor="end">{ymin:.3g}</text>',
        f'<text x="{pad_l - 4}" y="{pad_t + 10}" text-anchor="end">{ymax:.3g}</text>',
        f'<text x="{pad_l}" y="{pad_t + ph + 16:.1f}" text-anchor="middle">{xmin:.3g}</text>',
        f'<text x="{pad_l + pw}" y="{pad_t + ph + 16:.1f}" text-anchor="middle">{xmax:.3g}</text>',
    ]
    for k, ((label, _), y) in enumerate(zip(series, ys)):
        color = _COLORS[k % len(_COLORS)]
        ok = np.isfinite(y)
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x[ok], y[ok]))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = pad_t + 14 + 16 * k
        parts.append(f'<line x1="{width - pad_r + 8}" y1="{ly - 4}" x2="{width - pad_r + 28}" '
                     f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{width - pad_r + 32}" y="{ly}">{escape(str(label))}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")

"""Report files: CSV tables at four decimals, JSON at full precision, small SVG charts."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.4f}"
    return str(v)


def write_csv(path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def to_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=1, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_json(obj), encoding="utf-8")
    return path


# --------------------------------------------------------------------------
# svg

WIDTH, HEIGHT = 720, 360
MARGIN = 48
PALETTE = ("#1f4e79", "#c0504d", "#4f8f3a", "#8064a2")


def _scale(values, lo, hi, out_lo, out_hi):
    span = hi - lo if hi > lo else 1.0
    return [out_lo + (v - lo) / span * (out_hi - out_lo) for v in values]


def line_chart(
    series: dict[str, Sequence[float]],
    title: str,
    x_labels: Sequence[str] = (),
    vlines: Sequence[tuple[float, str]] = (),
    x_values: Sequence[float] | None = None,
) -> str:
    """Plain SVG line chart; ``vlines`` are dashed markers at x positions."""
    n = max((len(v) for v in series.values()), default=0)
    xs_raw = list(x_values) if x_values is not None else list(range(n))
    all_y = [float(y) for v in series.values() for y in v]
    y_lo, y_hi = (min(all_y), max(all_y)) if all_y else (0.0, 1.0)
    x_lo, x_hi = (min(xs_raw), max(xs_raw)) if xs_raw else (0.0, 1.0)
    left, right, top, bottom = MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>',
        f'<text x="{left - 4}" y="{bottom}" text-anchor="end">{y_lo:.4g}</text>',
        f'<text x="{left - 4}" y="{top + 4}" text-anchor="end">{y_hi:.4g}</text>',
    ]
    if x_labels:
        step = max(1, len(x_labels) // 8)
        px = _scale(xs_raw, x_lo, x_hi, left, right)
        for i in range(0, len(x_labels), step):
            parts.append(
                f'<text x="{px[i]:.1f}" y="{bottom + 16}" text-anchor="middle">{escape(str(x_labels[i]))}</text>'
            )
    for x, label in vlines:
        (vx,) = _scale([x], x_lo, x_hi, left, right)
        parts.append(
            f'<line x1="{vx:.1f}" y1="{top}" x2="{vx:.1f}" y2="{bottom}" stroke="gray" stroke-dasharray="5,4"/>'
        )
        parts.append(f'<text x="{vx + 3:.1f}" y="{top + 12}" fill="gray">{escape(label)}</text>')
    for k, (name, ys) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        px = _scale(xs_raw[: len(ys)], x_lo, x_hi, left, right)
        py = _scale([float(y) for y in ys], y_lo, y_hi, bottom, top)
        pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(px, py))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        parts.append(
            f'<text x="{right - 150}" y="{top + 14 * (k + 1)}" fill="{color}">{escape(name)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path

"""Standalone SVG rendering for radar and grouped-bar comparisons.

Hand-rolled rather than delegated to a plotting library so output bytes
are a pure function of the input values (fixed coordinate formatting, no
timestamps or generated ids).
"""

from __future__ import annotations

import math

from .pipeline import FAMILY_ORDER, SYNTHETIC_FAMILIES, MetricsRecord
from .report import RADAR_METRICS, RadarRow, _raw_metric

_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")


def _f(x: float) -> str:
    return f"{x:.2f}"


def emit_radar_svg(rows: list[RadarRow], size: int = 640) -> str:
    """One polygon per generator over the six metric axes."""
    if not rows:
        raise ValueError("no radar rows to draw")
    cx = cy = size / 2
    radius = size * 0.36
    n = len(RADAR_METRICS)

    def point(axis: int, value: float) -> tuple[float, float]:
        angle = -math.pi / 2 + axis * 2 * math.pi / n
        return cx + value * radius * math.cos(angle), cy + value * radius * math.sin(angle)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for ring in (0.25, 0.5, 0.75, 1.0):
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in (point(i, ring) for i in range(n)))
        parts.append(f'<polygon points="{pts}" fill="none" stroke="#cccccc" stroke-width="1"/>')
    for i, metric in enumerate(RADAR_METRICS):
        x, y = point(i, 1.0)
        lx, ly = point(i, 1.12)
        parts.append(
            f'<line x1="{_f(cx)}" y1="{_f(cy)}" x2="{_f(x)}" y2="{_f(y)}" '
            f'stroke="#888888" stroke-width="1"/>'
        )
        anchor = "middle" if abs(lx - cx) < 1 else ("start" if lx > cx else "end")
        parts.append(
            f'<text x="{_f(lx)}" y="{_f(ly)}" font-family="sans-serif" font-size="14" '
            f'text-anchor="{anchor}">{metric}</text>'
        )
    for idx, row in enumerate(rows):
        color = _PALETTE[idx % len(_PALETTE)]
        pts = " ".join(
            f"{_f(x)},{_f(y)}"
            for x, y in (point(i, row.values[m]) for i, m in enumerate(RADAR_METRICS))
        )
        parts.append(
            f'<polygon points="{pts}" fill="{color}" fill-opacity="0.15" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        ly = 24 + idx * 20
        parts.append(f'<rect x="16" y="{ly - 11}" width="12" height="12" fill="{color}"/>')
        parts.append(
            f'<text x="34" y="{ly}" font-family="sans-serif" font-size="14">'
            f"{row.generator_id}</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_bar_svg(records: list[MetricsRecord], metric: str = "utility") -> str:
    """Grouped bars per (synthetic family, multiplier) with baseline lines.

    Bars are grouped in canonical family order with ascending multipliers,
    one bar per generator; the two baseline families appear as dashed
    horizontal reference lines.
    """
    if not records:
        raise ValueError("no records to draw")
    generators = sorted({r.generator_id for r in records if r.generator_id is not None})
    groups: list[tuple[str, int]] = []
    for family in FAMILY_ORDER:
        if family not in SYNTHETIC_FAMILIES:
            continue
        mults = sorted(
            {r.multiplier for r in records if r.family == family and r.multiplier is not None}
        )
        groups.extend((family, m) for m in mults)
    baselines = [
        (r.family, _raw_metric(r, metric))
        for r in sorted(records, key=lambda r: FAMILY_ORDER.index(r.family))
        if r.generator_id is None and _raw_metric(r, metric) is not None
    ]

    values: dict[tuple[str, int, str], float] = {}
    for r in records:
        if r.generator_id is None or r.multiplier is None:
            continue
        v = _raw_metric(r, metric)
        if v is not None:
            values[(r.family, r.multiplier, r.generator_id)] = v

    width, height = 840, 420
    margin_left, margin_bottom, margin_top = 60, 70, 30
    plot_w = width - margin_left - 20
    plot_h = height - margin_top - margin_bottom
    all_values = list(values.values()) + [v for _, v in baselines]
    vmax = max(1.0, max(all_values)) if all_values else 1.0

    def y(v: float) -> float:
        return margin_top + plot_h * (1 - v / vmax)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin_left}" y1="{_f(y(0))}" x2="{width - 20}" y2="{_f(y(0))}" '
        f'stroke="#000000" stroke-width="1"/>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        if tick > vmax:
            continue
        parts.append(
            f'<text x="{margin_left - 8}" y="{_f(y(tick) + 4)}" font-family="sans-serif" '
            f'font-size="12" text-anchor="end">{tick:g}</text>'
        )
        parts.append(
            f'<line x1="{margin_left}" y1="{_f(y(tick))}" x2="{width - 20}" y2="{_f(y(tick))}" '
            f'stroke="#eeeeee" stroke-width="1"/>'
        )

    group_w = plot_w / max(len(groups), 1)
    bar_w = group_w * 0.8 / max(len(generators), 1)
    for gi, (family, mult) in enumerate(groups):
        gx = margin_left + gi * group_w
        for bi, g in enumerate(generators):
            v = values.get((family, mult, g))
            if v is None:
                continue
            x = gx + group_w * 0.1 + bi * bar_w
            color = _PALETTE[bi % len(_PALETTE)]
            parts.append(
                f'<rect x="{_f(x)}" y="{_f(y(v))}" width="{_f(bar_w * 0.9)}" '
                f'height="{_f(y(0) - y(v))}" fill="{color}"/>'
            )
        parts.append(
            f'<text x="{_f(gx + group_w / 2)}" y="{height - margin_bottom + 18}" '
            f'font-family="sans-serif" font-size="12" text-anchor="middle">{family} x{mult}</text>'
        )
    dash_styles = ("6,3", "2,3")
    for bi, (family, v) in enumerate(baselines):
        parts.append(
            f'<line x1="{margin_left}" y1="{_f(y(v))}" x2="{width - 20}" y2="{_f(y(v))}" '
            f'stroke="#333333" stroke-width="1.5" stroke-dasharray="{dash_styles[bi % 2]}"/>'
        )
        parts.append(
            f'<text x="{width - 24}" y="{_f(y(v) - 4)}" font-family="sans-serif" font-size="12" '
            f'text-anchor="end">{family}</text>'
        )
    for bi, g in enumerate(generators):
        color = _PALETTE[bi % len(_PALETTE)]
        lx = margin_left + bi * 140
        ly = height - 16
        parts.append(f'<rect x="{lx}" y="{ly - 11}" width="12" height="12" fill="{color}"/>')
        parts.append(
            f'<text x="{lx + 18}" y="{ly}" font-family="sans-serif" font-size="13">{g}</text>'
        )
    parts.append(
        f'<text x="{margin_left}" y="{margin_top - 10}" font-family="sans-serif" '
        f'font-size="14">{metric}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"

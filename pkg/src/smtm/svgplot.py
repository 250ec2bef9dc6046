"""Tiny deterministic SVG line plots.

No plotting dependency: preset figures must be byte-stable across reruns,
and a handful of polylines with fixed number formatting is enough.  All
coordinates are written with two decimals and tick labels with %.4g, so
identical data produces identical bytes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import IOFailure, SchemaMismatch

WIDTH, HEIGHT = 860.0, 520.0
_ML, _MR, _MT, _MB = 76.0, 24.0, 44.0, 58.0

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
    "#bcbd22", "#e377c2", "#393b79", "#637939",
)


@dataclass(frozen=True)
class Series:
    """One named polyline."""

    name: str
    x: np.ndarray
    y: np.ndarray


def _finite(s: Series) -> Series:
    x = np.asarray(s.x, dtype=float)
    y = np.asarray(s.y, dtype=float)
    keep = np.isfinite(x) & np.isfinite(y)
    return Series(s.name, x[keep], y[keep])


def _limits(vals: list[np.ndarray]) -> tuple[float, float]:
    allv = np.concatenate([v for v in vals if v.size] or [np.zeros(1)])
    lo, hi = float(allv.min()), float(allv.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def render_line_svg(series, title: str, xlabel: str, ylabel: str, out_path) -> None:
    """Write a static line plot of the given Series list to out_path."""
    series = [_finite(s) for s in series]
    drawn = [s for s in series if s.x.size > 0]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0f}" '
        f'height="{HEIGHT:.0f}" viewBox="0 0 {WIDTH:.0f} {HEIGHT:.0f}">',
        f'<rect x="0" y="0" width="{WIDTH:.0f}" height="{HEIGHT:.0f}" fill="#ffffff"/>',
        f'<text x="{WIDTH / 2:.2f}" y="26" font-family="sans-serif" font-size="16" '
        f'text-anchor="middle">{_esc(title)}</text>',
    ]
    x0, x1p = _ML, WIDTH - _MR
    y0, y1p = HEIGHT - _MB, _MT
    parts.append(
        f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1p:.2f}" y2="{y0:.2f}" '
        'stroke="#000000" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x0:.2f}" y2="{y1p:.2f}" '
        'stroke="#000000" stroke-width="1"/>'
    )
    if not drawn:
        parts.append(
            f'<text x="{(x0 + x1p) / 2:.2f}" y="{(y0 + y1p) / 2:.2f}" '
            'font-family="sans-serif" font-size="14" text-anchor="middle" '
            'fill="#888888">no data</text>'
        )
    else:
        xlo, xhi = _limits([s.x for s in drawn])
        ylo, yhi = _limits([s.y for s in drawn])

        def px(v):
            return x0 + (v - xlo) / (xhi - xlo) * (x1p - x0)

        def py(v):
            return y0 - (v - ylo) / (yhi - ylo) * (y0 - y1p)

        for tv in np.linspace(xlo, xhi, 5):
            xp = px(tv)
            parts.append(
                f'<line x1="{xp:.2f}" y1="{y0:.2f}" x2="{xp:.2f}" y2="{y0 + 5:.2f}" '
                'stroke="#000000" stroke-width="1"/>'
            )
            parts.append(
                f'<text x="{xp:.2f}" y="{y0 + 20:.2f}" font-family="sans-serif" '
                f'font-size="11" text-anchor="middle">{tv:.4g}</text>'
            )
        for tv in np.linspace(ylo, yhi, 5):
            yp = py(tv)
            parts.append(
                f'<line x1="{x0 - 5:.2f}" y1="{yp:.2f}" x2="{x0:.2f}" y2="{yp:.2f}" '
                'stroke="#000000" stroke-width="1"/>'
            )
            parts.append(
                f'<text x="{x0 - 9:.2f}" y="{yp + 4:.2f}" font-family="sans-serif" '
                f'font-size="11" text-anchor="end">{tv:.4g}</text>'
            )
        for i, s in enumerate(drawn):
            color = PALETTE[i % len(PALETTE)]
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(s.x, s.y))
            parts.append(
                f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                f'points="{pts}"/>'
            )
        for i, s in enumerate(drawn):
            color = PALETTE[i % len(PALETTE)]
            ly = _MT + 14 + 16 * i
            parts.append(
                f'<line x1="{x1p - 150:.2f}" y1="{ly - 4:.2f}" x2="{x1p - 130:.2f}" '
                f'y2="{ly - 4:.2f}" stroke="{color}" stroke-width="2"/>'
            )
            parts.append(
                f'<text x="{x1p - 124:.2f}" y="{ly:.2f}" font-family="sans-serif" '
                f'font-size="11">{_esc(s.name)}</text>'
            )
    parts.append(
        f'<text x="{(x0 + x1p) / 2:.2f}" y="{HEIGHT - 14:.2f}" '
        f'font-family="sans-serif" font-size="13" text-anchor="middle">{_esc(xlabel)}</text>'
    )
    parts.append(
        f'<text x="20" y="{(y0 + y1p) / 2:.2f}" font-family="sans-serif" '
        f'font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 20 {(y0 + y1p) / 2:.2f})">{_esc(ylabel)}</text>'
    )
    parts.append("</svg>")
    try:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(parts) + "\n")
    except OSError as exc:
        raise IOFailure(f"cannot write SVG {out_path}: {exc}") from exc


def render_svg(csv_path, plot_spec: dict, out_path) -> None:
    """Plot columns of a CSV file.

    plot_spec keys:
        x: column for the x axis (required)
        y: column or list of columns for the y axis (required)
        group_by: optional column; one series per distinct value (y must be
            a single column), ordered by first appearance
        title/xlabel/ylabel: optional labels
    """
    xcol = plot_spec.get("x")
    ycols = plot_spec.get("y")
    if not xcol or not ycols:
        raise SchemaMismatch("plot_spec needs 'x' and 'y'")
    if isinstance(ycols, str):
        ycols = [ycols]
    group_by = plot_spec.get("group_by")
    if group_by and len(ycols) != 1:
        raise SchemaMismatch("group_by requires a single y column")
    try:
        with open(csv_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise IOFailure(f"cannot read CSV {csv_path}: {exc}") from exc
    header = rows[0].keys() if rows else ()
    needed = [xcol, *ycols] + ([group_by] if group_by else [])
    missing = [c for c in needed if rows and c not in header]
    if missing:
        raise SchemaMismatch(f"CSV {csv_path} is missing columns {missing}")

    series: list[Series] = []
    if group_by:
        order: list[str] = []
        buckets: dict[str, list[tuple[float, float]]] = {}
        for row in rows:
            key = row[group_by]
            if key not in buckets:
                buckets[key] = []
                order.append(key)
            buckets[key].append((float(row[xcol]), float(row[ycols[0]])))
        for key in order:
            pts = buckets[key]
            series.append(
                Series(key, np.array([p[0] for p in pts]), np.array([p[1] for p in pts]))
            )
    else:
        xs = np.array([float(r[xcol]) for r in rows])
        for yc in ycols:
            series.append(Series(yc, xs, np.array([float(r[yc]) for r in rows])))
    render_line_svg(
        series,
        title=plot_spec.get("title", ""),
        xlabel=plot_spec.get("xlabel", xcol),
        ylabel=plot_spec.get("ylabel", ycols[0] if len(ycols) == 1 else ""),
        out_path=out_path,
    )

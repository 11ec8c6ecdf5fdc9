"""Minimal SVG line charts so experiment outputs can be eyeballed without a plotting stack."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def line_chart(series: dict[str, tuple[list[float], list[float]]], path, title: str = "", xlabel: str = "", ylabel: str = "",
               width: int = 480, height: int = 320) -> Path:
    """Write one polyline per named series; axes are scaled to the union of the data."""
    xs = [x for sx, _ in series.values() for x in sx]
    ys = [y for _, sy in series.values() for y in sy]
    if not xs:
        raise ValueError("nothing to plot")
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    m = 48
    pw, ph = width - 2 * m, height - 2 * m

    def px(x):
        return m + (x - x0) / (x1 - x0) * pw

    def py(y):
        return height - m - (y - y0) / (y1 - y0) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<rect x="{m}" y="{m}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{width / 2}" y="{m / 2}" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="{width / 2}" y="{height - 8}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="12" y="{height / 2}" transform="rotate(-90 12 {height / 2})" text-anchor="middle">{escape(ylabel)}</text>',
        f'<text x="{m}" y="{height - m + 14}" text-anchor="middle">{x0:.3g}</text>',
        f'<text x="{m + pw}" y="{height - m + 14}" text-anchor="middle">{x1:.3g}</text>',
        f'<text x="{m - 4}" y="{height - m}" text-anchor="end">{y0:.3g}</text>',
        f'<text x="{m - 4}" y="{m + 4}" text-anchor="end">{y1:.3g}</text>',
    ]
    for i, (name, (sx, sy)) in enumerate(series.items()):
        colour = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(sx, sy))
        parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts}"/>')
        parts.append(f'<text x="{m + pw - 4}" y="{m + 14 + 13 * i}" text-anchor="end" fill="{colour}">{escape(name)}</text>')
    parts.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts) + "\n")
    return path

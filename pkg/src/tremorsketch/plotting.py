"""Tiny SVG writers for training curves and class-count bars."""

from __future__ import annotations

from xml.sax.saxutils import escape

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e")


def _frame(width, height, title):
    return [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
            f'<text x="{width / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>']


def line_plot_svg(series: dict, title: str = "", xlabel: str = "epoch",
                  width: int = 480, height: int = 300) -> str:
    left, right, top, bottom = 50, 110, 30, 40
    pw, ph = width - left - right, height - top - bottom
    values = [v for ys in series.values() for v in ys]
    n = max((len(ys) for ys in series.values()), default=0)
    lo, hi = (min(values), max(values)) if values else (0.0, 1.0)
    if hi == lo:
        hi = lo + 1.0
    out = _frame(width, height, title)
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for frac in (0.0, 0.5, 1.0):
        y = top + ph * (1 - frac)
        out.append(f'<text x="{left - 4}" y="{y + 4:.1f}" text-anchor="end" font-size="10">'
                   f'{lo + frac * (hi - lo):.3g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 8}" text-anchor="middle" font-size="11">'
               f'{escape(xlabel)}</text>')
    for i, (name, ys) in enumerate(series.items()):
        color = COLORS[i % len(COLORS)]
        pts = []
        for j, v in enumerate(ys):
            x = left + (pw * j / (n - 1) if n > 1 else pw / 2)
            y = top + ph * (1 - (v - lo) / (hi - lo))
            pts.append(f"{x:.1f},{y:.1f}")
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(pts)}"/>')
        ly = top + 14 * (i + 1)
        out.append(f'<line x1="{left + pw + 8}" y1="{ly}" x2="{left + pw + 22}" y2="{ly}" stroke="{color}"/>')
        out.append(f'<text x="{left + pw + 26}" y="{ly + 4}" font-size="10">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out)


def bar_chart_svg(counts: dict, title: str = "", width: int = 360, height: int = 260) -> str:
    left, top, bottom = 40, 30, 40
    pw, ph = width - 2 * left, height - top - bottom
    peak = max(counts.values(), default=1) or 1
    slot = pw / max(len(counts), 1)
    out = _frame(width, height, title)
    for i, (name, v) in enumerate(counts.items()):
        h = ph * v / peak
        x = left + i * slot + slot * 0.15
        y = top + ph - h
        out.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{slot * 0.7:.1f}" height="{h:.1f}" '
                   f'fill="{COLORS[i % len(COLORS)]}"/>')
        out.append(f'<text x="{x + slot * 0.35:.1f}" y="{y - 4:.1f}" text-anchor="middle" '
                   f'font-size="10">{v}</text>')
        out.append(f'<text x="{x + slot * 0.35:.1f}" y="{height - 20}" text-anchor="middle" '
                   f'font-size="10">{escape(str(name))}</text>')
    out.append("</svg>")
    return "\n".join(out)


def write_svg(svg: str, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg + "\n")

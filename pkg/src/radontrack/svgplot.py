"""Minimal self-contained SVG plots (no plotting dependency).

Line plots with optional log axes, and blob charts for count tables.
Output is deterministic for identical inputs.
"""

from __future__ import annotations

import math

__all__ = ["line_plot", "blob_plot"]

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _ticks(lo: float, hi: float, n: int = 6):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    for m in (1, 2, 5, 10):
        if raw <= m * mag:
            step = m * mag
            break
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-12 * step:
        out.append(round(t, 12))
        t += step
    return out


def _log_ticks(lo: float, hi: float):
    lo_e = math.floor(math.log10(lo))
    hi_e = math.ceil(math.log10(hi))
    return [10.0**e for e in range(lo_e, hi_e + 1) if lo <= 10.0**e <= hi]


def line_plot(
    path,
    series,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    logx: bool = False,
    logy: bool = False,
    width: int = 640,
    height: int = 440,
):
    """Write a line plot; ``series`` is a list of dicts with x, y, label.

    Optional per-series ``dash`` renders a dashed reference line.
    """
    ml, mr, mt, mb = 64, 16, 36, 52
    pw, ph = width - ml - mr, height - mt - mb

    xs = [float(x) for s in series for x in s["x"]]
    ys = [float(y) for s in series for y in s["y"]]
    if logx:
        xs = [x for x in xs if x > 0]
    if logy:
        ys = [y for y in ys if y > 0]
    if not xs or not ys:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if logx:
        x0, x1 = math.log10(x0), math.log10(x1)
    if logy:
        y0, y1 = math.log10(y0), math.log10(y1)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    padx = 0.03 * (x1 - x0)
    pady = 0.06 * (y1 - y0)
    x0, x1 = x0 - padx, x1 + padx
    y0, y1 = y0 - pady, y1 + pady

    def sx(x):
        v = math.log10(x) if logx else x
        return ml + (v - x0) / (x1 - x0) * pw

    def sy(y):
        v = math.log10(y) if logy else y
        return mt + ph - (v - y0) / (y1 - y0) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width/2}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
    ]

    xticks = (
        _log_ticks(10**x0, 10**x1) if logx else _ticks(x0, x1)
    )
    yticks = (
        _log_ticks(10**y0, 10**y1) if logy else _ticks(y0, y1)
    )
    for t in xticks:
        px = sx(t)
        parts.append(
            f'<line x1="{px:.1f}" y1="{mt}" x2="{px:.1f}" y2="{mt+ph}" '
            f'stroke="#dddddd"/>'
        )
        parts.append(
            f'<text x="{px:.1f}" y="{mt+ph+16}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{_fmt(t)}</text>'
        )
    for t in yticks:
        py = sy(t)
        parts.append(
            f'<line x1="{ml}" y1="{py:.1f}" x2="{ml+pw}" y2="{py:.1f}" '
            f'stroke="#dddddd"/>'
        )
        parts.append(
            f'<text x="{ml-6}" y="{py+4:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{_fmt(t)}</text>'
        )
    parts.append(
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" '
        f'stroke="#333333"/>'
    )
    parts.append(
        f'<text x="{ml+pw/2}" y="{height-12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{xlabel}</text>'
    )
    parts.append(
        f'<text x="16" y="{mt+ph/2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {mt+ph/2})">{ylabel}</text>'
    )

    for k, s in enumerate(series):
        color = s.get("color", _COLORS[k % len(_COLORS)])
        pts = [
            (sx(float(x)), sy(float(y)))
            for x, y in zip(s["x"], s["y"])
            if (not logx or float(x) > 0) and (not logy or float(y) > 0)
        ]
        if not pts:
            continue
        coords = " ".join(f"{px:.2f},{py:.2f}" for px, py in pts)
        dash = ' stroke-dasharray="6,4"' if s.get("dash") else ""
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="1.8"{dash}/>'
        )
        for px, py in pts:
            parts.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="2.4" fill="{color}"/>')
        parts.append(
            f'<text x="{ml+pw-8}" y="{mt+16+14*k}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11" fill="{color}">'
            f'{s.get("label", f"series {k}")}</text>'
        )

    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))


def blob_plot(path, panels, axis_names=("method A", "method B"), width_per=260,
              height: int = 300):
    """Count table as area-coded blobs, one panel per entry of ``panels``.

    ``panels`` is a list of (title, counts) where counts maps
    (outcome_a, outcome_b) in {0, 1}^2 to an integer.
    """
    n = len(panels)
    width = width_per * n
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    labels = {1: "correct", 0: "failed"}
    for p, (title, counts) in enumerate(panels):
        ox = p * width_per
        cx = {1: ox + 90, 0: ox + 190}
        cy = {1: 110, 0: 210}
        total = max(sum(counts.values()), 1)
        parts.append(
            f'<text x="{ox+width_per/2}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{title}</text>'
        )
        for val in (1, 0):
            parts.append(
                f'<text x="{cx[val]}" y="52" text-anchor="middle" '
                f'font-family="sans-serif" font-size="11">{labels[val]}</text>'
            )
            parts.append(
                f'<text x="{ox+22}" y="{cy[val]+4}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="11" '
                f'transform="rotate(-90 {ox+22} {cy[val]})">{labels[val]}</text>'
            )
        parts.append(
            f'<text x="{cx[1]+50}" y="40" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11" font-style="italic">'
            f'{axis_names[0]}</text>'
        )
        parts.append(
            f'<text x="{ox+10}" y="{(cy[0]+cy[1])/2}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11" font-style="italic" '
            f'transform="rotate(-90 {ox+10} {(cy[0]+cy[1])/2})">'
            f'{axis_names[1]}</text>'
        )
        for (a, b), cnt in sorted(counts.items()):
            r = 6 + 40 * math.sqrt(cnt / total)
            parts.append(
                f'<circle cx="{cx[a]}" cy="{cy[b]}" r="{r:.1f}" '
                f'fill="#74c476" stroke="#238b45"/>'
            )
            parts.append(
                f'<text x="{cx[a]}" y="{cy[b]+4}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="11">{cnt}</text>'
            )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))

"""Minimal deterministic SVG line charts (no display, no plotting deps)."""

import math

WIDTH, HEIGHT = 860, 520
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 160, 40, 50
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
          "#17becf", "#7f7f7f"]


class PlotDataError(ValueError):
    pass


def _fmt_tick(v):
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.2e}"
    return f"{v:.4g}"


def _ticks(lo, hi, n=5):
    if hi == lo:
        return [lo]
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def svg_line_chart(series, path, title="", xlabel="", ylabel="", logy=False,
                   annotations=()):
    """Write a line chart; series is [(label, xs, ys), ...].

    With logy, nonpositive values are rejected (callers filter first).
    Single-point series render as markers.
    """
    if not series:
        raise PlotDataError("no series to plot")
    pts = []
    for label, xs, ys in series:
        if len(xs) != len(ys) or not len(xs):
            raise PlotDataError(f"series {label!r}: empty or mismatched data")
        if logy and any(y <= 0 for y in ys):
            raise PlotDataError(f"series {label!r}: log scale needs positive values")
        ys_t = [math.log10(y) for y in ys] if logy else list(ys)
        pts.append((label, list(xs), ys_t))
    x_lo = min(min(xs) for _, xs, _ in pts)
    x_hi = max(max(xs) for _, xs, _ in pts)
    y_lo = min(min(ys) for _, _, ys in pts)
    y_hi = max(max(ys) for _, _, ys in pts)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def sx(x):
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y):
        return MARGIN_T + (y_hi - y) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" '
        f'font-size="16">{title}</text>',
    ]
    # axes and ticks
    out.append(
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" '
        f'fill="none" stroke="black"/>'
    )
    for tv in _ticks(x_lo, x_hi):
        px = sx(tv)
        out.append(f'<line x1="{px:.1f}" y1="{MARGIN_T + ph}" x2="{px:.1f}" '
                   f'y2="{MARGIN_T + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px:.1f}" y="{MARGIN_T + ph + 20}" '
                   f'text-anchor="middle" font-size="11">{_fmt_tick(tv)}</text>')
    for tv in _ticks(y_lo, y_hi):
        py = sy(tv)
        label = f"1e{tv:.2f}" if logy else _fmt_tick(tv)
        out.append(f'<line x1="{MARGIN_L - 5}" y1="{py:.1f}" x2="{MARGIN_L}" '
                   f'y2="{py:.1f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{py + 4:.1f}" '
                   f'text-anchor="end" font-size="11">{label}</text>')
    out.append(f'<text x="{MARGIN_L + pw / 2:.0f}" y="{HEIGHT - 10}" '
               f'text-anchor="middle" font-size="13">{xlabel}</text>')
    ylab = f"log10 {ylabel}" if logy else ylabel
    out.append(f'<text x="18" y="{MARGIN_T + ph / 2:.0f}" text-anchor="middle" '
               f'font-size="13" transform="rotate(-90 18 '
               f'{MARGIN_T + ph / 2:.0f})">{ylab}</text>')
    # series
    for i, (label, xs, ys) in enumerate(pts):
        color = COLORS[i % len(COLORS)]
        if len(xs) == 1:
            out.append(f'<circle cx="{sx(xs[0]):.2f}" cy="{sy(ys[0]):.2f}" '
                       f'r="4" fill="{color}"/>')
        else:
            coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
            out.append(f'<polyline points="{coords}" fill="none" '
                       f'stroke="{color}" stroke-width="1.5"/>')
        ly = MARGIN_T + 16 + 18 * i
        out.append(f'<line x1="{WIDTH - MARGIN_R + 10}" y1="{ly - 4}" '
                   f'x2="{WIDTH - MARGIN_R + 34}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{WIDTH - MARGIN_R + 40}" y="{ly}" '
                   f'font-size="12">{label}</text>')
    for j, text in enumerate(annotations):
        out.append(f'<text x="{MARGIN_L + 10}" y="{MARGIN_T + 18 + 16 * j}" '
                   f'font-size="12" fill="#333">{text}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")

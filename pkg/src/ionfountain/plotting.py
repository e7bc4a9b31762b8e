"""Minimal deterministic SVG 1.1 output: line plots and binary/fraction heatmaps."""

from __future__ import annotations

import csv
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .errors import ConfigurationError

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=20, top=36, bottom=52)
COLORS = ("#1f4e9c", "#b2331c", "#2a7d3a", "#7a4aa0")


def _fmt(x):
    return f"{x:.2f}"


def _frame(title, xlabel, ylabel, x_range, y_range):
    x0, x1 = x_range
    y0, y1 = y_range
    L, R, T, B = MARGIN["left"], WIDTH - MARGIN["right"], MARGIN["top"], HEIGHT - MARGIN["bottom"]
    out = [
        f'<rect x="{L}" y="{T}" width="{R - L}" height="{B - T}" fill="none" stroke="#000" stroke-width="1"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{(L + R) / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="16" y="{(T + B) / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {(T + B) / 2:.1f})">{escape(ylabel)}</text>',
    ]
    for frac in np.linspace(0.0, 1.0, 5):
        xv = x0 + frac * (x1 - x0)
        yv = y0 + frac * (y1 - y0)
        px = L + frac * (R - L)
        py = B - frac * (B - T)
        out.append(f'<text x="{_fmt(px)}" y="{B + 16}" text-anchor="middle" font-size="10">{xv:.4g}</text>')
        out.append(f'<text x="{L - 6}" y="{_fmt(py + 3)}" text-anchor="end" font-size="10">{yv:.4g}</text>')
    return out


def _document(body):
    head = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">\n'
        '<rect width="100%" height="100%" fill="#fff"/>\n'
    )
    return head + "\n".join(body) + "\n</svg>\n"


def _span(values):
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi == lo:
        pad = abs(lo) * 0.05 or 1.0
        return lo - pad, hi + pad
    return lo, hi


def line_plot(x, series, title="", xlabel="", ylabel="", labels=None) -> str:
    """SVG text for one or more ``y`` series against a shared ``x``."""
    x = np.asarray(x, dtype=float)
    series = [np.asarray(s, dtype=float) for s in series]
    if x.size == 0:
        raise ValueError("nothing to plot")
    xr, yr = _span(x), _span(np.concatenate(series))
    L, R, T, B = MARGIN["left"], WIDTH - MARGIN["right"], MARGIN["top"], HEIGHT - MARGIN["bottom"]
    body = _frame(title, xlabel, ylabel, xr, yr)
    for i, y in enumerate(series):
        px = L + (x - xr[0]) / (xr[1] - xr[0]) * (R - L)
        py = B - (y - yr[0]) / (yr[1] - yr[0]) * (B - T)
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(px, py))
        color = COLORS[i % len(COLORS)]
        body.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        if labels:
            body.append(f'<text x="{R - 8}" y="{T + 16 + 14 * i}" text-anchor="end" font-size="11" '
                        f'fill="{color}">{escape(labels[i])}</text>')
    return _document(body)


def heatmap(x, y, values, title="", xlabel="", ylabel="") -> str:
    """SVG heatmap of ``values[iy, ix]`` in [0, 1] (white to dark blue)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != (y.size, x.size):
        raise ValueError("values must have shape (len(y), len(x))")
    L, R, T, B = MARGIN["left"], WIDTH - MARGIN["right"], MARGIN["top"], HEIGHT - MARGIN["bottom"]
    cw, ch = (R - L) / x.size, (B - T) / y.size
    body = _frame(title, xlabel, ylabel, _span(x), _span(y))
    for iy in range(y.size):
        for ix in range(x.size):
            v = min(max(values[iy, ix], 0.0), 1.0)
            shade = int(round(255 * (1.0 - v)))
            color = f"#{shade:02x}{shade:02x}{min(255, shade + 60 * (v > 0)):02x}"
            body.append(
                f'<rect x="{_fmt(L + ix * cw)}" y="{_fmt(B - (iy + 1) * ch)}" '
                f'width="{_fmt(cw)}" height="{_fmt(ch)}" fill="{color}"/>'
            )
    return _document(body)


def _grid(xs, ys, vs):
    ux, uy = np.unique(xs), np.unique(ys)
    grid = np.zeros((uy.size, ux.size))
    ix, iy = np.searchsorted(ux, xs), np.searchsorted(uy, ys)
    grid[iy, ix] = vs
    return ux, uy, grid


def plot_csv(csv_path, svg_path=None) -> Path:
    """Render a trajectory, sweep or acceptance-map CSV to SVG; returns the SVG path."""
    csv_path = Path(csv_path)
    svg_path = Path(svg_path) if svg_path else csv_path.with_suffix(".svg")
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    if header == ["t_s", "z_m", "v_mps"]:
        a = np.array(rows, dtype=float)
        svg = line_plot(a[:, 0] * 1e6, [a[:, 1] * 1e3], "trajectory", "t (us)", "z (mm)")
    elif header == ["param1", "param2", "n", "k", "frac"]:
        p1 = np.array([float(r[0]) for r in rows])
        frac = np.array([float(r[4]) for r in rows])
        if all(r[1] == "" for r in rows):
            svg = line_plot(p1, [frac], "sweep", "param1", "success fraction")
        else:
            p2 = np.array([float(r[1]) for r in rows])
            svg = heatmap(*_grid(p1, p2, frac), "sweep", "param1", "param2")
    elif header == ["ux_v", "uy_v", "success"]:
        a = np.array(rows, dtype=float)
        svg = heatmap(*_grid(a[:, 0], a[:, 1], a[:, 2]), "steering acceptance", "U_x (V)", "U_y (V)")
    else:
        raise ConfigurationError(f"unrecognised CSV header {','.join(header)!r}", "plot.input")
    svg_path.write_text(svg)
    return svg_path

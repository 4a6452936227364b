"""Dependency-free SVG rendering of experiment CSVs.

Output is a pure function of the input rows, so figures can be compared
byte-for-byte.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path
from xml.sax.saxutils import escape

from ..errors import FormatError

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 90, 30, 50
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"]
REQUIRED = {
    "line": ("method", "snr_db", "rmsae"),
    "scatter": ("method", "theta", "phi"),
    "trace": ("iter", "objective", "feasibility_gap"),
}


def _num(x):
    return f"{x:.2f}"


class _Canvas:
    def __init__(self, title):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2:.0f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        ]

    def add(self, s):
        self.parts.append(s)

    def text(self, x, y, s, anchor="middle", size=11, color="black", rotate=None):
        rot = f' transform="rotate({rotate} {_num(x)} {_num(y)})"' if rotate is not None else ""
        self.add(f'<text x="{_num(x)}" y="{_num(y)}" text-anchor="{anchor}" font-size="{size}" '
                 f'fill="{color}"{rot}>{escape(s)}</text>')

    def render(self):
        return "\n".join(self.parts + ["</svg>"]) + "\n"


class _Axis:
    """Maps data values to pixels, optionally on a log10 scale."""

    def __init__(self, lo, hi, p0, p1, log=False):
        if log:
            lo, hi = math.log10(lo), math.log10(hi)
        if hi - lo < 1e-12:
            lo, hi = lo - 0.5, hi + 0.5
        self.lo, self.hi, self.p0, self.p1, self.log = lo, hi, p0, p1, log

    def __call__(self, v):
        if self.log:
            v = math.log10(v)
        return self.p0 + (v - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)

    def ticks(self, n=5):
        if self.log:
            mantissas = (1, 2, 5) if self.hi - self.lo < 2 else (1,)
            return [m * 10.0 ** e for e in range(math.floor(self.lo), math.ceil(self.hi) + 1) for m in mantissas]
        return [self.lo + i * (self.hi - self.lo) / (n - 1) for i in range(n)]


def _frame(c: _Canvas, xaxis, yaxis, xlabel, ylabel, right=None):
    x0, x1, y0, y1 = LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP
    c.add(f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" fill="none" stroke="black"/>')
    for t in xaxis.ticks():
        px = xaxis(t)
        c.add(f'<line x1="{_num(px)}" y1="{y0}" x2="{_num(px)}" y2="{y0 + 5}" stroke="black"/>')
        c.text(px, y0 + 18, f"{t:g}")
    for t in yaxis.ticks():
        if not (min(yaxis.p0, yaxis.p1) - 1e-6 <= yaxis(t) <= max(yaxis.p0, yaxis.p1) + 1e-6):
            continue
        py = yaxis(t)
        c.add(f'<line x1="{x0 - 5}" y1="{_num(py)}" x2="{x0}" y2="{_num(py)}" stroke="black"/>')
        c.text(x0 - 8, py + 4, f"{t:.3g}", anchor="end")
    c.text((x0 + x1) / 2, HEIGHT - 12, xlabel)
    c.text(16, (y0 + y1) / 2, ylabel, rotate=-90)
    if right is not None:
        raxis, rlabel, color = right
        for t in raxis.ticks():
            if not (min(raxis.p0, raxis.p1) - 1e-6 <= raxis(t) <= max(raxis.p0, raxis.p1) + 1e-6):
                continue
            py = raxis(t)
            c.add(f'<line x1="{x1}" y1="{_num(py)}" x2="{x1 + 5}" y2="{_num(py)}" stroke="{color}"/>')
            c.text(x1 + 8, py + 4, f"{t:.3g}", anchor="start", color=color)
        c.text(WIDTH - 14, (y0 + y1) / 2, rlabel, color=color, rotate=90)


def _no_data(c: _Canvas, xlabel, ylabel):
    _frame(c, _Axis(0, 1, LEFT, WIDTH - RIGHT), _Axis(0, 1, HEIGHT - BOTTOM, TOP), xlabel, ylabel)
    c.text(WIDTH / 2, HEIGHT / 2, "no data", size=16)


def _legend(c: _Canvas, names):
    for i, name in enumerate(names):
        y = TOP + 14 + 16 * i
        c.add(f'<rect x="{WIDTH - RIGHT - 110}" y="{y - 8}" width="10" height="10" '
              f'fill="{PALETTE[i % len(PALETTE)]}"/>')
        c.text(WIDTH - RIGHT - 95, y + 1, name, anchor="start")


def _line(rows):
    c = _Canvas("RMSAE versus SNR")
    if not rows:
        _no_data(c, "SNR (dB)", "RMSAE (deg)")
        return c.render()
    floor = 1e-6
    series = {}
    for r in rows:
        series.setdefault(r["method"], []).append((float(r["snr_db"]), max(math.degrees(float(r["rmsae"])), floor)))
    xs = [p[0] for s in series.values() for p in s]
    ys = [p[1] for s in series.values() for p in s]
    xa = _Axis(min(xs), max(xs), LEFT, WIDTH - RIGHT)
    ya = _Axis(min(ys) / 1.5, max(ys) * 1.5, HEIGHT - BOTTOM, TOP, log=True)
    _frame(c, xa, ya, "SNR (dB)", "RMSAE (deg)")
    names = sorted(series)
    for i, name in enumerate(names):
        pts = sorted(series[name])
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{_num(xa(x))},{_num(ya(y))}" for x, y in pts)
        c.add(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in pts:
            c.add(f'<circle cx="{_num(xa(x))}" cy="{_num(ya(y))}" r="3" fill="{color}"/>')
    _legend(c, names)
    return c.render()


def _scatter(rows):
    c = _Canvas("Estimates of two close sources")
    if not rows:
        _no_data(c, "azimuth (deg)", "elevation (deg)")
        return c.render()
    pts = [(r["method"], math.degrees(float(r["theta"])), math.degrees(float(r["phi"]))) for r in rows]
    xs = [p[1] for p in pts]
    ys = [p[2] for p in pts]
    pad_x = max(1.0, 0.1 * (max(xs) - min(xs)))
    pad_y = max(1.0, 0.1 * (max(ys) - min(ys)))
    xa = _Axis(min(xs) - pad_x, max(xs) + pad_x, LEFT, WIDTH - RIGHT)
    ya = _Axis(min(ys) - pad_y, max(ys) + pad_y, HEIGHT - BOTTOM, TOP)
    _frame(c, xa, ya, "azimuth (deg)", "elevation (deg)")
    names = sorted({p[0] for p in pts if p[0] != "truth"})
    for i, name in enumerate(names):
        color = PALETTE[i % len(PALETTE)]
        for m, x, y in pts:
            if m == name:
                c.add(f'<circle cx="{_num(xa(x))}" cy="{_num(ya(y))}" r="2.5" fill="{color}" fill-opacity="0.6"/>')
    for m, x, y in pts:
        if m == "truth":
            px, py = xa(x), ya(y)
            c.add(f'<path d="M{_num(px - 6)},{_num(py - 6)} L{_num(px + 6)},{_num(py + 6)} '
                  f'M{_num(px - 6)},{_num(py + 6)} L{_num(px + 6)},{_num(py - 6)}" stroke="black" stroke-width="2"/>')
    _legend(c, names + (["truth (x)"] if any(p[0] == "truth" for p in pts) else []))
    return c.render()


def _trace(rows):
    c = _Canvas("Solver convergence")
    if not rows:
        _no_data(c, "outer iteration", "objective")
        return c.render()
    it = [float(r["iter"]) for r in rows]
    obj = [float(r["objective"]) for r in rows]
    gap = [max(float(r["feasibility_gap"]), 1e-16) for r in rows]
    xa = _Axis(min(it), max(it), LEFT, WIDTH - RIGHT)
    ya = _Axis(min(obj), max(obj), HEIGHT - BOTTOM, TOP)
    ga = _Axis(min(gap) / 1.5, max(gap) * 1.5, HEIGHT - BOTTOM, TOP, log=True)
    _frame(c, xa, ya, "outer iteration", "objective", right=(ga, "feasibility gap", PALETTE[1]))
    c.add('<polyline points="' + " ".join(f"{_num(xa(x))},{_num(ya(y))}" for x, y in zip(it, obj))
          + f'" fill="none" stroke="{PALETTE[0]}" stroke-width="2"/>')
    c.add('<polyline points="' + " ".join(f"{_num(xa(x))},{_num(ga(y))}" for x, y in zip(it, gap))
          + f'" fill="none" stroke="{PALETTE[1]}" stroke-width="2"/>')
    _legend(c, ["objective", "feasibility gap"])
    return c.render()


def render_svg(rows, kind: str, columns=None) -> str:
    if kind not in REQUIRED:
        raise FormatError(f"unknown plot kind {kind!r}; choose from {sorted(REQUIRED)}")
    columns = list(rows[0].keys()) if rows and columns is None else (columns or [])
    missing = [c for c in REQUIRED[kind] if c not in columns]
    if missing:
        raise FormatError(f"CSV is missing column(s) {missing} required for a {kind} plot")
    return {"line": _line, "scatter": _scatter, "trace": _trace}[kind](rows)


def emit_plot(summary_csv, kind: str, out_svg) -> Path:
    """Render ``summary_csv`` as an SVG figure of the given kind."""
    try:
        with open(summary_csv, newline="") as fh:
            reader = csv.DictReader(fh)
            rows = list(reader)
            columns = reader.fieldnames or []
    except OSError as exc:
        raise FormatError(f"cannot read {summary_csv}: {exc}") from exc
    svg = render_svg(rows, kind, columns)
    out = Path(out_svg)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    return out

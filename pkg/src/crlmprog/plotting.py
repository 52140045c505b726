"""Deterministic SVG figures: Kaplan-Meier panels with a risk table and decision curves.

Output is plain text with fixed-precision coordinates and no timestamps, so identical
inputs give identical files.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .dca import DecisionCurve
from .survival import KmCurve

PALETTE = ("#b2182b", "#ef8a62", "#2166ac", "#4d9221", "#762a83", "#444444")
WIDTH, HEIGHT = 640, 480
LEFT, RIGHT, TOP = 70, 20, 58


def _f(v: float) -> str:
    return f"{v:.2f}"


class _Axes:
    """Linear map from data coordinates to a pixel box."""

    def __init__(self, x0, x1, y0, y1, box):
        self.x0, self.x1, self.y0, self.y1 = x0, x1, y0, y1
        self.left, self.top, self.w, self.h = box

    def px(self, x):
        span = self.x1 - self.x0 or 1.0
        return self.left + (x - self.x0) / span * self.w

    def py(self, y):
        span = self.y1 - self.y0 or 1.0
        return self.top + (1 - (y - self.y0) / span) * self.h


def _header(height: int, comment: str | None = None) -> list[str]:
    head = [f"<!-- {escape(comment)} -->"] if comment else []
    return head + [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
        f'viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{height}" fill="white"/>',
    ]


def _text(x, y, s, anchor="start", size=None, extra="") -> str:
    sz = f' font-size="{size}"' if size else ""
    return f'<text x="{_f(x)}" y="{_f(y)}" text-anchor="{anchor}"{sz}{extra}>{escape(str(s))}</text>'


def _frame(ax: _Axes, xticks, yticks, xlabel, ylabel) -> list[str]:
    out = [f'<rect x="{_f(ax.left)}" y="{_f(ax.top)}" width="{_f(ax.w)}" height="{_f(ax.h)}" '
           'fill="none" stroke="black"/>']
    base = ax.top + ax.h
    for t in xticks:
        x = ax.px(t)
        out.append(f'<line x1="{_f(x)}" y1="{_f(base)}" x2="{_f(x)}" y2="{_f(base + 4)}" stroke="black"/>')
        out.append(_text(x, base + 16, _tick(t), "middle"))
    for t in yticks:
        y = ax.py(t)
        out.append(f'<line x1="{_f(ax.left - 4)}" y1="{_f(y)}" x2="{_f(ax.left)}" y2="{_f(y)}" stroke="black"/>')
        out.append(_text(ax.left - 7, y + 4, _tick(t), "end"))
    out.append(_text(ax.left + ax.w / 2, base + 34, xlabel, "middle"))
    cy = ax.top + ax.h / 2
    out.append(_text(18, cy, ylabel, "middle", extra=f' transform="rotate(-90 18 {_f(cy)})"'))
    return out


def _legend(items, y: float) -> list[str]:
    """One row of (label, colour, dash) entries laid out left to right above the plot."""
    out, x = [], float(LEFT)
    for label, colour, dash in items:
        out.append(f'<line x1="{_f(x)}" y1="{_f(y - 4)}" x2="{_f(x + 20)}" y2="{_f(y - 4)}" '
                   f'stroke="{colour}" stroke-width="2"{dash}/>')
        out.append(_text(x + 25, y, label))
        x += 45 + 6.2 * len(label)
    return out


def _step_ticks(lo: float, hi: float, max_ticks: int = 7) -> tuple[float, float, list[float]]:
    """Round the range outward to a 1-2-2.5-5 step and list the ticks."""
    span = hi - lo
    for step in (0.01, 0.02, 0.025, 0.05, 0.1, 0.2, 0.25, 0.5, 1.0):
        a, b = np.floor(lo / step - 1e-9) * step, np.ceil(hi / step - 1e-9) * step
        if (b - a) / step + 1 <= max_ticks or step == 1.0:
            break
    n = int(round((b - a) / step))
    return float(a), float(b), [round(a + i * step, 6) for i in range(n + 1)]


def _tick(v: float) -> str:
    return f"{v:g}" if abs(v - round(v)) > 1e-9 else str(int(round(v)))


def km_svg(
    curves: dict[str, KmCurve],
    risk_table: dict[str, Sequence[int]],
    risk_times: Sequence[float],
    p_value: float | None = None,
    title: str = "",
    xlabel: str = "months",
    comment: str | None = None,
) -> str:
    """Step curves (one per group) with a number-at-risk table underneath."""
    tmax = max([risk_times[-1] if len(risk_times) else 0.0]
               + [s.time for c in curves.values() for s in c.steps] + [1.0])
    plot_h = HEIGHT - TOP - 110
    height = TOP + plot_h + 58 + 18 * len(curves) + 16
    ax = _Axes(0.0, tmax, 0.0, 1.0, (LEFT, TOP, WIDTH - LEFT - RIGHT, plot_h))
    out = _header(height, comment)
    if title:
        out.append(_text(WIDTH / 2, 22, title, "middle", 13))
    out += _frame(ax, [t for t in risk_times if t <= tmax], [0, 0.25, 0.5, 0.75, 1.0], xlabel, "survival probability")
    legend = []
    for k, (name, c) in enumerate(curves.items()):
        colour = PALETTE[k % len(PALETTE)]
        pts = []
        prev_y = 1.0
        for t, s in c.step_points():
            pts.append((ax.px(t), ax.py(prev_y)))
            pts.append((ax.px(t), ax.py(s)))
            prev_y = s
        pts.append((ax.px(tmax), ax.py(prev_y)))
        path = " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)
        out.append(f'<polyline points="{path}" fill="none" stroke="{colour}" stroke-width="1.8"/>')
        med = "NR" if c.median_survival is None else _tick(round(c.median_survival, 1))
        legend.append((f"{name} (median {med})", colour, ""))
    out += _legend(legend, TOP - 14)
    if p_value is not None:
        out.append(_text(ax.left + 8, ax.top + ax.h - 8, f"log-rank p = {p_value:.3g}"))
    table_top = ax.top + ax.h + 58
    out.append(_text(8, table_top, "at risk", size=10))
    for k, name in enumerate(curves):
        y = table_top + 18 * (k + 1)
        out.append(_text(8, y, name, extra=f' fill="{PALETTE[k % len(PALETTE)]}"'))
        for t, n in zip(risk_times, risk_table[name]):
            out.append(_text(ax.px(t), y, n, "middle"))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def dca_svg(curve: DecisionCurve, title: str = "", label: str = "model", comment: str | None = None) -> str:
    """Net benefit of the model against treat-all and treat-none over the threshold grid."""
    pts = list(curve.thresholds)
    lo = min(0.0, float(min(curve.net_benefit_model)))
    hi = max(curve.prevalence, float(max(curve.net_benefit_model)), 0.01)
    lo = max(lo, -hi)  # keep the informative range visible when treat-all plunges
    lo, hi, yticks = _step_ticks(lo, hi)
    ax = _Axes(0.0, 1.0, lo, hi, (LEFT, TOP, WIDTH - LEFT - RIGHT, HEIGHT - TOP - 60))
    out = _header(HEIGHT, comment)
    if title:
        out.append(_text(WIDTH / 2, 22, title, "middle", 13))
    out += _frame(ax, [0, 0.2, 0.4, 0.6, 0.8, 1.0], yticks, "threshold probability", "net benefit")
    out.append(f'<clipPath id="plot"><rect x="{_f(ax.left)}" y="{_f(ax.top)}" width="{_f(ax.w)}" '
               f'height="{_f(ax.h)}"/></clipPath>')
    series = [
        (label, curve.net_benefit_model, PALETTE[0], ""),
        ("treat all", curve.net_benefit_treat_all, PALETTE[5], ' stroke-dasharray="6 3"'),
        ("treat none", curve.net_benefit_treat_none, PALETTE[2], ' stroke-dasharray="2 2"'),
    ]
    out += _legend([(name, colour, dash) for name, _, colour, dash in series], TOP - 14)
    for name, ys, colour, dash in series:
        path = " ".join(f"{_f(ax.px(x))},{_f(ax.py(y))}" for x, y in zip(pts, ys))
        out.append(f'<polyline points="{path}" fill="none" stroke="{colour}" stroke-width="1.8"{dash} '
                   'clip-path="url(#plot)"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(svg: str, path: str | Path) -> None:
    Path(path).write_text(svg, encoding="utf-8")

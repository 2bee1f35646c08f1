"""Deterministic SVG plots: bifurcation diagrams, profiles and spectra.

Output depends only on the inputs: fixed 800×600 view box, fixed number
formatting, no timestamps or random ids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from .continuation import Branch, _constants
from .model import Parameters

WIDTH, HEIGHT = 800, 600
MARGIN = dict(left=80, right=30, top=40, bottom=60)
PALETTE = ("#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f")
EVENT_MARKS = {
    "turning_point": ("#000000", "T"),
    "trivial_return": ("#555555", "R"),
    "secondary_bif_candidate": ("#9467bd", "S"),
    "step_limit": ("#ff0000", "X"),
}


def _num(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def _nice_ticks(lo: float, hi: float, count: int = 6) -> list[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    x = first
    while x <= hi + 1e-9 * span:
        ticks.append(round(x, 12))
        x += step
    return ticks


def _tick_label(v: float) -> str:
    s = f"{v:.6g}"
    return "0" if s in ("-0", "0") else s


class Axes:
    """Linear data-to-pixel mapping with frame, ticks and labels."""

    def __init__(self, xlim, ylim, xlabel: str, ylabel: str, title: str = ""):
        self.xlim = (float(xlim[0]), float(xlim[1]))
        self.ylim = (float(ylim[0]), float(ylim[1]))
        self.x0, self.x1 = MARGIN["left"], WIDTH - MARGIN["right"]
        self.y0, self.y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
        self.parts: list[str] = []
        self.xlabel, self.ylabel, self.title = xlabel, ylabel, title

    def px(self, x):
        lo, hi = self.xlim
        return self.x0 + (np.asarray(x, dtype=float) - lo) / (hi - lo) * (self.x1 - self.x0)

    def py(self, y):
        lo, hi = self.ylim
        return self.y0 + (np.asarray(y, dtype=float) - lo) / (hi - lo) * (self.y1 - self.y0)

    def polyline(self, x, y, color: str, width: float = 1.5, dash: str | None = None) -> None:
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        # split at gaps so non-finite samples do not join segments
        runs, cur = [], []
        for xi, yi, good in zip(self.px(x), self.py(y), ok):
            if good:
                cur.append(f"{_num(xi)},{_num(yi)}")
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        for run in runs:
            if len(run) > 1:
                self.parts.append(
                    f'<polyline clip-path="url(#plot)" fill="none" stroke="{color}" stroke-width="{width}"{extra} points="{" ".join(run)}"/>'
                )

    def marker(self, x: float, y: float, color: str, text: str = "") -> None:
        cx, cy = float(self.px(x)), float(self.py(y))
        self.parts.append(f'<circle clip-path="url(#plot)" cx="{_num(cx)}" cy="{_num(cy)}" r="4" fill="{color}"/>')
        if text:
            self.parts.append(
                f'<text x="{_num(cx + 6)}" y="{_num(cy - 6)}" font-size="11" fill="{color}">{escape(text)}</text>'
            )

    def render(self, legend: list[tuple[str, str]] | None = None) -> str:
        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">',
            f'<defs><clipPath id="plot"><rect x="{self.x0}" y="{self.y1}" width="{self.x1 - self.x0}" height="{self.y0 - self.y1}"/></clipPath></defs>',
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
            f'<rect x="{self.x0}" y="{self.y1}" width="{self.x1 - self.x0}" height="{self.y0 - self.y1}" fill="none" stroke="#000000"/>',
        ]
        for t in _nice_ticks(*self.xlim):
            x = _num(float(self.px(t)))
            out.append(f'<line x1="{x}" y1="{self.y0}" x2="{x}" y2="{self.y0 + 5}" stroke="#000000"/>')
            out.append(f'<text x="{x}" y="{self.y0 + 20}" font-size="12" text-anchor="middle">{_tick_label(t)}</text>')
        for t in _nice_ticks(*self.ylim):
            y = _num(float(self.py(t)))
            out.append(f'<line x1="{self.x0 - 5}" y1="{y}" x2="{self.x0}" y2="{y}" stroke="#000000"/>')
            out.append(f'<text x="{self.x0 - 8}" y="{y}" font-size="12" text-anchor="end" dominant-baseline="middle">{_tick_label(t)}</text>')
        cx = (self.x0 + self.x1) / 2
        cy = (self.y0 + self.y1) / 2
        out.append(f'<text x="{_num(cx)}" y="{HEIGHT - 15}" font-size="14" text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(
            f'<text x="20" y="{_num(cy)}" font-size="14" text-anchor="middle" transform="rotate(-90 20 {_num(cy)})">{escape(self.ylabel)}</text>'
        )
        if self.title:
            out.append(f'<text x="{_num(cx)}" y="25" font-size="15" text-anchor="middle">{escape(self.title)}</text>')
        out.extend(self.parts)
        for i, (color, text) in enumerate(legend or []):
            y = self.y1 + 15 + 16 * i
            out.append(f'<line x1="{self.x1 - 150}" y1="{y}" x2="{self.x1 - 130}" y2="{y}" stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{self.x1 - 125}" y="{y + 4}" font-size="11">{escape(text)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"


def _padded(lo: float, hi: float, frac: float = 0.05) -> tuple[float, float]:
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return (lo - 1.0, lo + 1.0) if math.isfinite(lo) else (0.0, 1.0)
    pad = (hi - lo) * frac
    return lo - pad, hi + pad


def trivial_curve(mode: str, p: Parameters, xlim: tuple[float, float], samples: int = 4000):
    """Active parameter and L² norm along the constant solutions inside ``xlim``.

    Returns one ``(param, norm)`` pair of arrays; points outside ``xlim`` are NaN.
    """
    if mode == "hat":
        top = math.asinh(max(abs(xlim[0]), abs(xlim[1])) + p.f * p.f + 10.0) + 1.0
        coords = np.tanh(np.linspace(-top, top, samples))
    else:
        top = (max(abs(xlim[0]), abs(xlim[1])) + 1.0) ** (1.0 / 3.0) + math.sqrt(abs(p.zeta)) + 2.0
        coords = np.linspace(0.0, top, samples)
    a1, a2, lam = _constants(mode, coords, p)
    norm = np.sqrt(math.pi * (a1 * a1 + a2 * a2))
    out = (lam < xlim[0]) | (lam > xlim[1])
    lam = np.where(out, np.nan, lam)
    return lam, norm


@dataclass
class DiagramSpec:
    """What to draw in a bifurcation diagram."""

    branches: list[Branch] = field(default_factory=list)
    mode: str | None = None
    params: Parameters | None = None
    trivial: bool = True
    colors: list[str] | None = None
    labels: list[str] | None = None
    xlim: tuple[float, float] | None = None
    ylim: tuple[float, float] | None = None
    title: str = ""


def default_xlim(mode: str, p: Parameters) -> tuple[float, float]:
    if mode == "hat":
        return (-2.0, p.f * p.f + 3.0)
    return (0.0, max(4.0, 2.0 * math.sqrt(abs(p.zeta)) ** 3 + 2.0))


def bifurcation_diagram(spec: DiagramSpec) -> str:
    """Active parameter against L² norm for all branches, optionally with the trivial curve."""
    mode = spec.mode or (spec.branches[0].mode if spec.branches else None)
    p = spec.params or (spec.branches[0].parameters(0.0) if spec.branches else None)
    if mode is None or p is None:
        raise ValueError("a diagram needs a mode and parameters or at least one branch")
    xs = [b.params for b in spec.branches if b.points]
    ys = [b.l2norms for b in spec.branches if b.points]
    if spec.xlim is not None:
        xlim = spec.xlim
    elif xs:
        allx = np.concatenate(xs)
        xlim = _padded(float(allx.min()), float(allx.max()))
    else:
        xlim = default_xlim(mode, p)
    tx = ty = None
    if spec.trivial:
        tx, ty = trivial_curve(mode, p, xlim)
    if spec.ylim is not None:
        ylim = spec.ylim
    else:
        cand = [y for y in ys]
        if ty is not None and np.isfinite(tx).any():
            cand.append(ty[np.isfinite(tx)])
        ally = np.concatenate(cand) if cand else np.array([0.0, 1.0])
        ylim = _padded(min(0.0, float(np.nanmin(ally))), float(np.nanmax(ally)))
    xlabel = "zeta" if mode == "hat" else "f"
    fixed = f"f = {p.f:g}" if mode == "hat" else f"zeta = {p.zeta:g}"
    ax = Axes(xlim, ylim, xlabel, "L2 norm", spec.title or f"{fixed}, d = {p.d:g}")
    legend = []
    if tx is not None:
        ax.polyline(tx, ty, "#000000", 1.5)
        legend.append(("#000000", "constant solutions"))
    colors = spec.colors or []
    for i, b in enumerate(spec.branches):
        color = colors[i] if i < len(colors) else PALETTE[i % len(PALETTE)]
        ax.polyline(b.params, b.l2norms, color, 1.5)
        if spec.labels and i < len(spec.labels):
            legend.append((color, spec.labels[i]))
        for e in b.events:
            if 0 <= e.index < len(b.points):
                mcolor, tag = EVENT_MARKS[e.kind]
                ax.marker(b.points[e.index].param, b.points[e.index].l2norm, mcolor, tag)
    return ax.render(legend)


def profile_plot(x, amp, title: str = "", ylabel: str = "|a|") -> str:
    x, amp = np.asarray(x, dtype=float), np.asarray(amp, dtype=float)
    ax = Axes(_padded(float(x.min()), float(x.max()), 0.0), _padded(0.0, float(amp.max())), "x", ylabel, title)
    ax.polyline(x, amp, "#1f77b4")
    return ax.render()


def spectrum_plot(spec: list[tuple[int, float]], title: str = "", floor: float = -40.0) -> str:
    k = np.array([s[0] for s in spec], dtype=float)
    v = np.maximum(np.array([s[1] for s in spec], dtype=float), floor)
    ax = Axes(_padded(float(k.min()), float(k.max()), 0.02), _padded(floor, float(v.max())), "k", "log|a_k|", title)
    for ki, vi in zip(k, v):
        x = _num(float(ax.px(ki)))
        ax.parts.append(
            f'<line clip-path="url(#plot)" x1="{x}" y1="{_num(float(ax.py(floor)))}" x2="{x}" y2="{_num(float(ax.py(vi)))}" stroke="#1f77b4"/>'
        )
    return ax.render()


def trajectory_plot(t, l2norm, title: str = "") -> str:
    t, y = np.asarray(t, dtype=float), np.asarray(l2norm, dtype=float)
    ax = Axes(_padded(float(t.min()), float(t.max()), 0.0), _padded(0.0, float(np.nanmax(y))), "t", "L2 norm", title)
    ax.polyline(t, y, "#7f7f7f")
    return ax.render()

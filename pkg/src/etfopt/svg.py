"""Small self-contained SVG chart writer.

Output depends only on the data passed in: no timestamps, no file paths,
fixed number formatting, so reruns produce identical bytes.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31",
)
HIGHLIGHT = "#000000"


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".") if math.isfinite(v) else "0"


def nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi <= lo:
        hi = lo + (abs(lo) or 1.0)
    raw = (hi - lo) / max(n, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    ticks = []
    x = first
    while x <= hi + 1e-12 * step:
        ticks.append(round(x, 12))
        x += step
    return ticks


def _label(v: float) -> str:
    if v == 0:
        return "0"
    a = abs(v)
    if a >= 1e4 or a < 1e-3:
        return f"{v:.2e}"
    return f"{v:.4g}"


class Chart:
    """One plotting area with linear axes."""

    def __init__(self, title: str = "", xlabel: str = "", ylabel: str = "",
                 width: int = 800, height: int = 480, date_axis: bool = False):
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.width, self.height = width, height
        self.date_axis = date_axis
        self.margin = (70, 30, 50, 60)  # left, right, top, bottom
        self.items: list = []
        self.legend: list = []
        self.categories: Optional[list] = None

    # data -> pixels
    def _frame(self):
        xs, ys = [], []
        for kind, data in self.items:
            xs.extend(data.get("x", []))
            ys.extend(data.get("y", []))
            ys.extend(data.get("y2", []))
        xs = np.asarray([v for v in xs if math.isfinite(v)], dtype=float)
        ys = np.asarray([v for v in ys if math.isfinite(v)], dtype=float)
        x0, x1 = (xs.min(), xs.max()) if xs.size else (0.0, 1.0)
        y0, y1 = (ys.min(), ys.max()) if ys.size else (0.0, 1.0)
        if x1 <= x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 <= y0:
            pad = abs(y0) * 0.1 or 1.0
            y0, y1 = y0 - pad, y1 + pad
        pad = 0.04 * (y1 - y0)
        xpad = 0.0 if (self.categories is not None or self.date_axis) else 0.04 * (x1 - x0)
        return x0 - xpad, x1 + xpad, y0 - pad, y1 + pad

    def _maps(self):
        x0, x1, y0, y1 = self._frame()
        left, right, top, bottom = self.margin
        pw = self.width - left - right
        ph = self.height - top - bottom
        fx = lambda v: left + (v - x0) / (x1 - x0) * pw
        fy = lambda v: top + (1.0 - (v - y0) / (y1 - y0)) * ph
        return fx, fy, (x0, x1, y0, y1)

    def line(self, x, y, label: str = "", color: Optional[str] = None, width: float = 1.2,
             highlight: bool = False, dash: str = ""):
        color = HIGHLIGHT if highlight else (color or PALETTE[len(self.legend) % len(PALETTE)])
        self.items.append(("line", {"x": list(map(float, x)), "y": list(map(float, y)), "color": color,
                                    "width": 2.6 if highlight else width, "dash": dash}))
        if label:
            self.legend.append((label, color))
        return self

    def band(self, x, lo, hi, color: str = "#1f77b4", opacity: float = 0.2):
        self.items.insert(0, ("band", {"x": list(map(float, x)), "y": list(map(float, lo)),
                                       "y2": list(map(float, hi)), "color": color, "opacity": opacity}))
        return self

    def scatter(self, x, y, labels: Sequence[str] = (), color: str = "#555555", size: float = 3.5,
                legend: str = ""):
        self.items.append(("scatter", {"x": list(map(float, x)), "y": list(map(float, y)),
                                       "labels": list(labels), "color": color, "size": size}))
        if legend:
            self.legend.append((legend, color))
        return self

    def hline(self, y: float, color: str = "#999999"):
        self.items.append(("hline", {"y": [float(y)], "color": color}))
        return self

    def errorbars(self, categories: Sequence[str], est, lo, hi, color: str = "#1f77b4"):
        self.categories = list(categories)
        n = len(categories)
        self.items.append(("errorbar", {"x": [float(i) for i in range(n)] + [-0.6, n - 0.4],
                                        "y": list(map(float, est)), "y2": list(map(float, lo)) + list(map(float, hi)),
                                        "lo": list(map(float, lo)), "hi": list(map(float, hi)), "color": color}))
        return self

    def bars(self, categories: Sequence[str], groups: dict):
        """Grouped bar chart: ``groups`` maps series name -> values per category."""
        self.categories = list(categories)
        n = len(categories)
        vals = [v for vs in groups.values() for v in vs if math.isfinite(v)]
        self.items.append(("bars", {"x": [-0.6, n - 0.4], "y": vals + [0.0], "groups": groups}))
        for i, name in enumerate(groups):
            self.legend.append((name, PALETTE[i % len(PALETTE)]))
        return self

    # rendering
    def _axes(self, fx, fy, box):
        x0, x1, y0, y1 = box
        left, right, top, bottom = self.margin
        out = [f'<rect x="{left}" y="{top}" width="{self.width - left - right}" '
               f'height="{self.height - top - bottom}" fill="none" stroke="#333333" stroke-width="1"/>']
        for t in nice_ticks(y0, y1):
            y = fy(t)
            out.append(f'<line x1="{left}" y1="{_fmt(y)}" x2="{self.width - right}" y2="{_fmt(y)}" '
                       'stroke="#e5e5e5" stroke-width="1"/>')
            out.append(f'<text x="{left - 6}" y="{_fmt(y + 4)}" text-anchor="end">{escape(_label(t))}</text>')
        base = self.height - bottom
        if self.categories is not None:
            for i, c in enumerate(self.categories):
                x = fx(i)
                out.append(f'<text x="{_fmt(x)}" y="{base + 14}" text-anchor="end" '
                           f'transform="rotate(-35 {_fmt(x)} {base + 14})">{escape(str(c))}</text>')
        else:
            for t in nice_ticks(x0, x1, 6):
                x = fx(t)
                text = str(np.datetime64(int(round(t)), "D")) if self.date_axis else _label(t)
                out.append(f'<line x1="{_fmt(x)}" y1="{base}" x2="{_fmt(x)}" y2="{base + 4}" stroke="#333333"/>')
                out.append(f'<text x="{_fmt(x)}" y="{base + 18}" text-anchor="middle">{escape(text)}</text>')
        if self.xlabel:
            out.append(f'<text x="{_fmt((left + self.width - right) / 2)}" y="{self.height - 8}" '
                       f'text-anchor="middle">{escape(self.xlabel)}</text>')
        if self.ylabel:
            cy = (top + self.height - bottom) / 2
            out.append(f'<text x="16" y="{_fmt(cy)}" text-anchor="middle" '
                       f'transform="rotate(-90 16 {_fmt(cy)})">{escape(self.ylabel)}</text>')
        if self.title:
            out.append(f'<text x="{_fmt(self.width / 2)}" y="24" text-anchor="middle" '
                       f'font-size="15">{escape(self.title)}</text>')
        return out

    def _item(self, kind, d, fx, fy):
        if kind in ("line", "band"):
            pts = [(fx(a), fy(b)) for a, b in zip(d["x"], d["y"]) if math.isfinite(a) and math.isfinite(b)]
            if kind == "band":
                upper = [(fx(a), fy(b)) for a, b in zip(d["x"], d["y2"]) if math.isfinite(a) and math.isfinite(b)]
                poly = pts + upper[::-1]
                coords = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in poly)
                return [f'<polygon points="{coords}" fill="{d["color"]}" fill-opacity="{d["opacity"]}" stroke="none"/>']
            coords = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)
            dash = f' stroke-dasharray="{d["dash"]}"' if d["dash"] else ""
            return [f'<polyline points="{coords}" fill="none" stroke="{d["color"]}" '
                    f'stroke-width="{d["width"]}"{dash}/>']
        if kind == "scatter":
            out = []
            for i, (a, b) in enumerate(zip(d["x"], d["y"])):
                if not (math.isfinite(a) and math.isfinite(b)):
                    continue
                out.append(f'<circle cx="{_fmt(fx(a))}" cy="{_fmt(fy(b))}" r="{d["size"]}" fill="{d["color"]}"/>')
                if i < len(d["labels"]) and d["labels"][i]:
                    out.append(f'<text x="{_fmt(fx(a) + 5)}" y="{_fmt(fy(b) - 4)}" font-size="10">'
                               f'{escape(d["labels"][i])}</text>')
            return out
        if kind == "hline":
            left, right = self.margin[0], self.width - self.margin[1]
            y = _fmt(fy(d["y"][0]))
            return [f'<line x1="{left}" y1="{y}" x2="{right}" y2="{y}" stroke="{d["color"]}" stroke-dasharray="4 3"/>']
        if kind == "errorbar":
            out = []
            for i, (e, lo, hi) in enumerate(zip(d["y"], d["lo"], d["hi"])):
                x = _fmt(fx(i))
                out.append(f'<line x1="{x}" y1="{_fmt(fy(lo))}" x2="{x}" y2="{_fmt(fy(hi))}" stroke="{d["color"]}"/>')
                out.append(f'<circle cx="{x}" cy="{_fmt(fy(e))}" r="3" fill="{d["color"]}"/>')
            return out
        if kind == "bars":
            groups = d["groups"]
            g = max(len(groups), 1)
            span = (fx(1) - fx(0)) * 0.8 if self.categories and len(self.categories) > 1 else 40.0
            bw = span / g
            out = []
            for k, (name, vals) in enumerate(groups.items()):
                color = PALETTE[k % len(PALETTE)]
                for i, v in enumerate(vals):
                    if not math.isfinite(v):
                        continue
                    x = fx(i) - span / 2 + k * bw
                    y_top, y_bot = sorted((fy(v), fy(0.0)))
                    out.append(f'<rect x="{_fmt(x)}" y="{_fmt(y_top)}" width="{_fmt(bw)}" '
                               f'height="{_fmt(max(y_bot - y_top, 0.5))}" fill="{color}"/>')
            return out
        raise ValueError(kind)

    def render(self) -> str:
        fx, fy, box = self._maps()
        body = self._axes(fx, fy, box)
        for kind, d in self.items:
            body.extend(self._item(kind, d, fx, fy))
        lx = self.width - self.margin[1] - 150
        for i, (name, color) in enumerate(self.legend):
            y = self.margin[2] + 14 + 14 * i
            body.append(f'<rect x="{lx}" y="{y - 8}" width="10" height="10" fill="{color}"/>')
            body.append(f'<text x="{lx + 14}" y="{y + 1}" font-size="10">{escape(name)}</text>')
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}" font-family="sans-serif" font-size="11">')
        bg = f'<rect width="{self.width}" height="{self.height}" fill="#ffffff"/>'
        return "\n".join([head, bg, *body, "</svg>"]) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.render(), encoding="utf-8")
        return path


def dates_to_days(dates) -> np.ndarray:
    return np.asarray(dates, dtype="datetime64[D]").astype(np.int64).astype(float)

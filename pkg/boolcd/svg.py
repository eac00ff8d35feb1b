"""
Static SVG charts for reports and benchmarks.

Three kinds:
- line: one polyline (plus point marks) per series over shared categories
- stacked-bar: one bar per category, series stacked bottom-up
- diverging-bar: one bar per category growing up (positive) or down

Output is self-contained SVG 1.1. Coordinates use two decimals and elements
are emitted in input order, so equal input gives byte-identical text. Every
series sits in its own ``<g class="series">`` group.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from html import escape as html_escape
from typing import List, Sequence, Tuple

from .errors import InputError


WIDTH = 720
HEIGHT = 400
MARGIN = {"top": 50, "right": 150, "bottom": 60, "left": 70}
FONT = "sans-serif"

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)
GAIN_COLOR = "#2ca02c"
LOSS_COLOR = "#d62728"
AXIS_COLOR = "#444444"
GRID_COLOR = "#dddddd"


class ChartKind(Enum):
    LINE = "line"
    STACKED_BAR = "stacked-bar"
    DIVERGING_BAR = "diverging-bar"


@dataclass(frozen=True)
class Series:
    name: str
    values: Tuple[float, ...]


@dataclass(frozen=True)
class ChartData:
    """Series of values over shared categories (x positions)."""

    title: str
    categories: Tuple[str, ...]
    series: Tuple[Series, ...] = field(default_factory=tuple)
    x_label: str = ""
    y_label: str = ""

    def validate(self) -> None:
        if not self.categories or not self.series:
            raise InputError(f"Chart {self.title!r} has no data to draw")
        for s in self.series:
            if len(s.values) != len(self.categories):
                raise InputError(
                    f"Series {s.name!r} has {len(s.values)} values for "
                    f"{len(self.categories)} categories"
                )


def _f(v: float) -> str:
    return f"{v:.2f}"


def _header(title: str) -> str:
    return (
        f'<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'font-family="{FONT}">\n'
        f"<title>{html_escape(title)}</title>\n"
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>\n'
        f'<text x="{_f(WIDTH / 2)}" y="28" text-anchor="middle" font-size="15">'
        f"{html_escape(title)}</text>\n"
    )


def _footer() -> str:
    return "</svg>\n"


class _Frame:
    """Plot-area geometry for a value range."""

    def __init__(self, n_categories: int, lo: float, hi: float):
        if hi <= lo:
            hi = lo + 1.0
        self.lo, self.hi = lo, hi
        self.left = MARGIN["left"]
        self.top = MARGIN["top"]
        self.width = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.height = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
        self.slot = self.width / n_categories

    def x_center(self, i: int) -> float:
        return self.left + (i + 0.5) * self.slot

    def y(self, value: float) -> float:
        return self.top + self.height * (1.0 - (value - self.lo) / (self.hi - self.lo))


def _axes(frame: _Frame, data: ChartData) -> List[str]:
    parts = []
    bottom = frame.top + frame.height
    for k in range(5):
        value = frame.lo + (frame.hi - frame.lo) * k / 4
        y = frame.y(value)
        parts.append(
            f'<line x1="{_f(frame.left)}" y1="{_f(y)}" x2="{_f(frame.left + frame.width)}" '
            f'y2="{_f(y)}" stroke="{GRID_COLOR}"/>\n'
            f'<text x="{_f(frame.left - 8)}" y="{_f(y + 4)}" text-anchor="end" '
            f'font-size="11">{_f(value)}</text>\n'
        )
    parts.append(
        f'<line x1="{_f(frame.left)}" y1="{_f(frame.top)}" x2="{_f(frame.left)}" '
        f'y2="{_f(bottom)}" stroke="{AXIS_COLOR}"/>\n'
        f'<line x1="{_f(frame.left)}" y1="{_f(bottom)}" x2="{_f(frame.left + frame.width)}" '
        f'y2="{_f(bottom)}" stroke="{AXIS_COLOR}"/>\n'
    )
    for i, label in enumerate(data.categories):
        parts.append(
            f'<text x="{_f(frame.x_center(i))}" y="{_f(bottom + 18)}" text-anchor="middle" '
            f'font-size="11">{html_escape(label)}</text>\n'
        )
    if data.x_label:
        parts.append(
            f'<text x="{_f(frame.left + frame.width / 2)}" y="{_f(HEIGHT - 12)}" '
            f'text-anchor="middle" font-size="12">{html_escape(data.x_label)}</text>\n'
        )
    if data.y_label:
        cy = frame.top + frame.height / 2
        parts.append(
            f'<text x="16" y="{_f(cy)}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 16 {_f(cy)})">{html_escape(data.y_label)}</text>\n'
        )
    return parts


def _legend(names: Sequence[Tuple[str, str]]) -> List[str]:
    parts = []
    x = WIDTH - MARGIN["right"] + 16
    for i, (name, color) in enumerate(names):
        y = MARGIN["top"] + 18 * i
        parts.append(
            f'<rect x="{x}" y="{y}" width="12" height="12" fill="{color}"/>\n'
            f'<text x="{x + 18}" y="{y + 10}" font-size="11">{html_escape(name)}</text>\n'
        )
    return parts


def _color(i: int) -> str:
    return PALETTE[i % len(PALETTE)]


def line_chart(data: ChartData) -> str:
    data.validate()
    values = [v for s in data.series for v in s.values]
    frame = _Frame(len(data.categories), min(0.0, min(values)), max(values))
    parts = [_header(data.title), *_axes(frame, data)]
    for si, s in enumerate(data.series):
        color = _color(si)
        points = [(frame.x_center(i), frame.y(v)) for i, v in enumerate(s.values)]
        parts.append(f'<g class="series" data-name="{html_escape(s.name)}">\n')
        if len(points) > 1:
            coords = " ".join(f"{_f(x)},{_f(y)}" for x, y in points)
            parts.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>\n'
            )
        for (x, y), v in zip(points, s.values):
            parts.append(
                f'<circle cx="{_f(x)}" cy="{_f(y)}" r="3" fill="{color}">'
                f"<title>{html_escape(s.name)}: {_f(v)}</title></circle>\n"
            )
        parts.append("</g>\n")
    parts.extend(_legend([(s.name, _color(i)) for i, s in enumerate(data.series)]))
    parts.append(_footer())
    return "".join(parts)


def stacked_bar_chart(data: ChartData) -> str:
    data.validate()
    n = len(data.categories)
    totals = [sum(max(s.values[i], 0.0) for s in data.series) for i in range(n)]
    frame = _Frame(n, 0.0, max(totals))
    bar_width = frame.slot * 0.7
    parts = [_header(data.title), *_axes(frame, data)]
    base = [0.0] * n
    for si, s in enumerate(data.series):
        color = _color(si)
        parts.append(f'<g class="series" data-name="{html_escape(s.name)}">\n')
        for i, v in enumerate(s.values):
            v = max(v, 0.0)
            y_top = frame.y(base[i] + v)
            height = frame.y(base[i]) - y_top
            parts.append(
                f'<rect x="{_f(frame.x_center(i) - bar_width / 2)}" y="{_f(y_top)}" '
                f'width="{_f(bar_width)}" height="{_f(height)}" fill="{color}">'
                f"<title>{html_escape(s.name)} @ {html_escape(data.categories[i])}: "
                f"{_f(v)}</title></rect>\n"
            )
            base[i] += v
        parts.append("</g>\n")
    parts.extend(_legend([(s.name, _color(i)) for i, s in enumerate(data.series)]))
    parts.append(_footer())
    return "".join(parts)


def diverging_bar_chart(data: ChartData) -> str:
    """Positive values grow upward in the gain color, negative downward in the loss color."""
    data.validate()
    values = [v for s in data.series for v in s.values]
    extent = max(abs(v) for v in values) or 1.0
    frame = _Frame(len(data.categories), -extent, extent)
    bar_width = frame.slot * 0.7 / len(data.series)
    parts = [_header(data.title), *_axes(frame, data)]
    zero = frame.y(0.0)
    for si, s in enumerate(data.series):
        parts.append(f'<g class="series" data-name="{html_escape(s.name)}">\n')
        for i, v in enumerate(s.values):
            x = frame.x_center(i) - frame.slot * 0.35 + si * bar_width
            y = frame.y(max(v, 0.0))
            height = abs(frame.y(v) - zero)
            color = GAIN_COLOR if v >= 0 else LOSS_COLOR
            parts.append(
                f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(bar_width)}" '
                f'height="{_f(height)}" fill="{color}">'
                f"<title>{html_escape(data.categories[i])}: {_f(v)}</title></rect>\n"
            )
        parts.append("</g>\n")
    parts.append(
        f'<line x1="{_f(frame.left)}" y1="{_f(zero)}" x2="{_f(frame.left + frame.width)}" '
        f'y2="{_f(zero)}" stroke="{AXIS_COLOR}"/>\n'
    )
    parts.extend(_legend([("gain", GAIN_COLOR), ("loss", LOSS_COLOR)]))
    parts.append(_footer())
    return "".join(parts)


_BUILDERS = {
    ChartKind.LINE: line_chart,
    ChartKind.STACKED_BAR: stacked_bar_chart,
    ChartKind.DIVERGING_BAR: diverging_bar_chart,
}


def emit_svg(data: ChartData, kind: ChartKind) -> str:
    """
    Render a chart.

    Raises:
        InputError: no categories, no series, or ragged series
    """
    return _BUILDERS[ChartKind(kind)](data)

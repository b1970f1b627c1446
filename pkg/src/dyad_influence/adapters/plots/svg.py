"""Plain-text SVG line charts of causality spectra."""

from __future__ import annotations

from typing import List, NamedTuple, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

WIDTH = 720
HEIGHT = 420
MARGIN_LEFT = 70
MARGIN_RIGHT = 20
MARGIN_TOP = 40
MARGIN_BOTTOM = 50
BAND_FILLS = ("#dde8f5", "#f5e6d8", "#e3f2e1", "#f2e1ef")


class Series(NamedTuple):
    label: str
    values: np.ndarray
    color: str
    dashed: bool = False


class SvgCanvas:
    def __init__(self, width: int = WIDTH, height: int = HEIGHT) -> None:
        self.width = width
        self.height = height
        self.parts: List[str] = []

    def rect(self, x: float, y: float, w: float, h: float, fill: str, extra: str = "") -> None:
        self.parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" fill="{fill}" {extra}/>')

    def line(self, x1: float, y1: float, x2: float, y2: float, stroke: str = "#000", extra: str = "") -> None:
        self.parts.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" stroke="{stroke}" {extra}/>')

    def polyline(self, points: Sequence[Tuple[float, float]], stroke: str, dashed: bool = False) -> None:
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        self.parts.append(f'<polyline points="{coords}" fill="none" stroke="{stroke}" stroke-width="1.5"{dash}/>')

    def text(self, x: float, y: float, content: str, anchor: str = "start", size: int = 12) -> None:
        self.parts.append(
            f'<text x="{x:.2f}" y="{y:.2f}" font-family="sans-serif" font-size="{size}" '
            f'text-anchor="{anchor}">{escape(content)}</text>'
        )

    def render(self) -> str:
        header = (
            '<?xml version="1.0" standalone="no"?>\n'
            f'<svg version="1.1" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}" xmlns="http://www.w3.org/2000/svg">'
        )
        return "\n".join([header, *self.parts, "</svg>"]) + "\n"


def _ticks(upper: float, count: int = 5) -> np.ndarray:
    return np.linspace(0.0, upper, count + 1)


def spectrum_plot(
    freqs: np.ndarray,
    series: Sequence[Series],
    bands: Sequence[Tuple[float, float]] = (),
    title: str = "",
    y_label: str = "GGC",
) -> str:
    """Curves over frequency with shaded bands; every value drawn comes from the arguments."""
    freqs = np.asarray(freqs, dtype=float)
    canvas = SvgCanvas()
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    x_max = float(freqs[-1]) if freqs.size else 1.0
    y_max = max([float(np.max(s.values)) for s in series if np.size(s.values)] + [0.0])
    y_max = y_max * 1.05 if y_max > 0 else 1.0

    def x_of(f: float) -> float:
        return MARGIN_LEFT + plot_w * f / x_max

    def y_of(v: float) -> float:
        return MARGIN_TOP + plot_h * (1.0 - v / y_max)

    canvas.rect(0, 0, WIDTH, HEIGHT, "#ffffff")
    for index, (f_lo, f_hi) in enumerate(bands):
        canvas.rect(x_of(f_lo), MARGIN_TOP, x_of(f_hi) - x_of(f_lo), plot_h, BAND_FILLS[index % len(BAND_FILLS)])
        canvas.text((x_of(f_lo) + x_of(f_hi)) / 2, MARGIN_TOP + 14, f"{f_lo:.2f}-{f_hi:.2f} Hz", "middle", 10)

    canvas.line(MARGIN_LEFT, MARGIN_TOP + plot_h, MARGIN_LEFT + plot_w, MARGIN_TOP + plot_h)
    canvas.line(MARGIN_LEFT, MARGIN_TOP, MARGIN_LEFT, MARGIN_TOP + plot_h)
    for tick in _ticks(x_max):
        canvas.line(x_of(tick), MARGIN_TOP + plot_h, x_of(tick), MARGIN_TOP + plot_h + 5)
        canvas.text(x_of(tick), MARGIN_TOP + plot_h + 18, f"{tick:.1f}", "middle", 10)
    for tick in _ticks(y_max, 4):
        canvas.line(MARGIN_LEFT - 5, y_of(tick), MARGIN_LEFT, y_of(tick))
        canvas.text(MARGIN_LEFT - 8, y_of(tick) + 4, f"{tick:.3g}", "end", 10)
    canvas.text(MARGIN_LEFT + plot_w / 2, HEIGHT - 12, "Frequency (Hz)", "middle")
    canvas.text(16, MARGIN_TOP + plot_h / 2, y_label, "middle")
    if title:
        canvas.text(WIDTH / 2, 22, title, "middle", 14)

    for index, curve in enumerate(series):
        canvas.polyline([(x_of(f), y_of(v)) for f, v in zip(freqs, curve.values)], curve.color, curve.dashed)
        legend_y = MARGIN_TOP + 30 + 16 * index
        canvas.line(MARGIN_LEFT + plot_w - 150, legend_y - 4, MARGIN_LEFT + plot_w - 125, legend_y - 4, curve.color)
        canvas.text(MARGIN_LEFT + plot_w - 120, legend_y, curve.label, size=11)
    return canvas.render()


def dyad_spectrum_plot(
    freqs: np.ndarray,
    I_ab: np.ndarray,
    I_ba: np.ndarray,
    q99: Optional[np.ndarray] = None,
    bands: Sequence[Tuple[float, float]] = (),
    title: str = "",
) -> str:
    series = [Series("A to B", np.asarray(I_ab), "#1f77b4"), Series("B to A", np.asarray(I_ba), "#d62728")]
    if q99 is not None:
        series.append(Series("null q99", np.asarray(q99), "#555555", dashed=True))
    return spectrum_plot(freqs, series, bands, title)

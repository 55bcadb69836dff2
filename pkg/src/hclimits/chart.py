"""Control-chart rendering: deterministic SVG plus a companion CSV.

Charts draw the historical counts in file order, a dashed center line, and
one or two limit bands. Bands with per-cluster limits (varying target
offsets) are drawn as horizontal segments per point; scalar bands as full
width lines. Points strictly above a band's upper limit are classified
`above-<label>`; exceeding the wider band implies exceeding the narrower one.

The SVG is assembled from fixed-precision strings in stable order, so
identical inputs give byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import fmt6
from .errors import ParameterError
from .estimation import HistoricalData

_WIDTH, _HEIGHT = 720.0, 440.0
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 60.0, 20.0, 30.0, 50.0

_POINT_STYLE = {
    "within": "#9a9a9a",
    0: "#e08214",  # above the narrower band (e.g. 95%)
    1: "#d73027",  # above the wider band (e.g. 99%)
}


def expected_exceedance(n_clusters: int, alpha: float) -> float:
    """Expected number of observations outside the central band: H * alpha."""
    if n_clusters < 0:
        raise ParameterError("cluster count must be >= 0")
    if alpha < 0.0 or alpha > 1.0:
        raise ParameterError("alpha must be in [0, 1]")
    return n_clusters * alpha


@dataclass(frozen=True)
class ChartBand:
    """One limit band on the response scale.

    lower/upper are scalars or per-point arrays; lower may be None for
    upper-only bands. label names the level, e.g. "95".
    """

    label: str
    upper: np.ndarray
    lower: np.ndarray | None
    alpha: float

    @staticmethod
    def build(label, upper, lower, alpha, n_points) -> "ChartBand":
        up = np.broadcast_to(np.asarray(upper, dtype=float), (n_points,)).copy()
        low = None
        if lower is not None and np.all(np.isfinite(np.asarray(lower, dtype=float))):
            low = np.broadcast_to(np.asarray(lower, dtype=float), (n_points,)).copy()
        return ChartBand(str(label), up, low, float(alpha))

    @property
    def per_point(self) -> bool:
        return bool(np.ptp(self.upper) > 0.0) or (
            self.lower is not None and bool(np.ptp(self.lower) > 0.0)
        )


@dataclass(frozen=True)
class ChartResult:
    """Counters reported alongside the written SVG/CSV pair."""

    n_points: int
    exceedances: dict[str, int]
    expected: dict[str, float]
    classifications: tuple[str, ...]


def classify_points(y: np.ndarray, bands: list[ChartBand]) -> list[str]:
    """Per-point class: 'within' or 'above-<label>' of the widest band exceeded."""
    labels = []
    for i, value in enumerate(y):
        cls = "within"
        for band in bands:  # bands ordered narrow -> wide
            if value > band.upper[i]:
                cls = f"above-{band.label}"
        labels.append(cls)
    return labels


def _fx(x: float) -> str:
    return f"{x:.2f}"


class _Svg:
    def __init__(self) -> None:
        self.parts: list[str] = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH:g}" '
            f'height="{_HEIGHT:g}" viewBox="0 0 {_WIDTH:g} {_HEIGHT:g}">',
            f'<rect x="0" y="0" width="{_WIDTH:g}" height="{_HEIGHT:g}" fill="white"/>',
        ]

    def line(self, x1, y1, x2, y2, stroke, width="1", dash=None) -> None:
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{_fx(x1)}" y1="{_fx(y1)}" x2="{_fx(x2)}" y2="{_fx(y2)}" '
            f'stroke="{stroke}" stroke-width="{width}"{dash_attr}/>'
        )

    def circle(self, cx, cy, r, fill) -> None:
        self.parts.append(f'<circle cx="{_fx(cx)}" cy="{_fx(cy)}" r="{r}" fill="{fill}"/>')

    def text(self, x, y, content, size=12, anchor="start", fill="#222222") -> None:
        self.parts.append(
            f'<text x="{_fx(x)}" y="{_fx(y)}" font-family="sans-serif" '
            f'font-size="{size}" text-anchor="{anchor}" fill="{fill}">{content}</text>'
        )

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def render_control_chart(
    data: HistoricalData,
    center: np.ndarray,
    bands: list[ChartBand],
    title: str = "",
) -> tuple[str, str, ChartResult]:
    """Build the SVG document and companion CSV text for one chart.

    center is a scalar or per-point array of expected counts; bands must be
    ordered from the narrowest (smallest coverage) to the widest.
    """
    if data.n_clusters < 1:
        raise ParameterError("chart needs at least one observation")
    n = data.n_clusters
    y = data.y.astype(float)
    center = np.broadcast_to(np.asarray(center, dtype=float), (n,)).copy()
    classes = classify_points(y, bands)

    # y-axis range over everything drawn
    values = [y, center] + [b.upper for b in bands] + [b.lower for b in bands if b.lower is not None]
    y_max = max(float(np.max(v)) for v in values) * 1.08 + 1e-9
    y_min = min(0.0, min(float(np.min(v)) for v in values))
    span = y_max - y_min

    def sx(i: int) -> float:
        usable = _WIDTH - _MARGIN_L - _MARGIN_R
        return _MARGIN_L + usable * (i + 0.5) / n

    def sy(v: float) -> float:
        usable = _HEIGHT - _MARGIN_T - _MARGIN_B
        return _MARGIN_T + usable * (1.0 - (v - y_min) / span)

    svg = _Svg()
    if title:
        svg.text(_WIDTH / 2.0, _MARGIN_T - 10.0, title, size=14, anchor="middle")
    # axes
    svg.line(_MARGIN_L, _MARGIN_T, _MARGIN_L, _HEIGHT - _MARGIN_B, "#222222")
    svg.line(_MARGIN_L, _HEIGHT - _MARGIN_B, _WIDTH - _MARGIN_R, _HEIGHT - _MARGIN_B, "#222222")
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = y_min + frac * span
        svg.line(_MARGIN_L - 4.0, sy(v), _MARGIN_L, sy(v), "#222222")
        svg.text(_MARGIN_L - 8.0, sy(v) + 4.0, f"{v:.1f}", size=10, anchor="end")

    band_styles = [("#000000", None), ("#777777", "6,4")]
    for band, (color, dash) in zip(bands, band_styles):
        lines = [band.upper] + ([band.lower] if band.lower is not None else [])
        for arr in lines:
            if band.per_point:
                half = 0.5 * (_WIDTH - _MARGIN_L - _MARGIN_R) / n * 0.9
                for i in range(n):
                    svg.line(sx(i) - half, sy(arr[i]), sx(i) + half, sy(arr[i]), color, dash=dash)
            else:
                svg.line(_MARGIN_L, sy(arr[0]), _WIDTH - _MARGIN_R, sy(arr[0]), color, dash=dash)
    # center line, dashed
    if float(np.ptp(center)) > 0.0:
        half = 0.5 * (_WIDTH - _MARGIN_L - _MARGIN_R) / n * 0.9
        for i in range(n):
            svg.line(sx(i) - half, sy(center[i]), sx(i) + half, sy(center[i]), "#222222", dash="3,3")
    else:
        svg.line(_MARGIN_L, sy(center[0]), _WIDTH - _MARGIN_R, sy(center[0]), "#222222", dash="3,3")

    labels = [f"above-{b.label}" for b in bands]
    for i in range(n):
        cls = classes[i]
        fill = _POINT_STYLE["within"]
        if cls != "within":
            fill = _POINT_STYLE[min(labels.index(cls), 1)]
        svg.circle(sx(i), sy(y[i]), 3.5, fill)

    counts = {lab: sum(c == lab for c in classes) for lab in labels}
    expected = {b.label: expected_exceedance(n, b.alpha) for b in bands}
    note = "; ".join(
        f"above {b.label}%: {counts[f'above-{b.label}']} (expected outside central band: {expected[b.label]:.2f})"
        for b in bands
    )
    svg.text(_MARGIN_L, _HEIGHT - 12.0, note, size=11)

    csv_lines = [_companion_header(bands)]
    ids = data.cluster_ids or tuple(f"c{i+1:03d}" for i in range(n))
    for i in range(n):
        row = [ids[i], str(i + 1), str(int(data.y[i])), fmt6(center[i])]
        for b in bands:
            row.append(fmt6(b.lower[i]) if b.lower is not None else "")
            row.append(fmt6(b.upper[i]))
        row.append(classes[i])
        csv_lines.append(",".join(row))
    csv_text = "\n".join(csv_lines) + "\n"

    result = ChartResult(
        n_points=n, exceedances=counts, expected=expected, classifications=tuple(classes)
    )
    return svg.render(), csv_text, result


def _companion_header(bands: list[ChartBand]) -> str:
    cols = ["cluster_id", "x", "y", "center"]
    for b in bands:
        cols += [f"lower_{b.label}", f"upper_{b.label}"]
    cols.append("classification")
    return ",".join(cols)

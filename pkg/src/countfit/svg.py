"""Static SVG rendering for rootograms and residual diagnostics.

Pure string assembly with fixed float formatting, so a given input always
produces byte-identical output.  Bars are ``<rect>`` elements and the
expected curve is the only ``<polyline>`` in a plain rootogram; axes,
reference and warning-limit lines are ``<line>`` elements, bootstrap bands
are extra ``<polyline>`` overlays, scatter points are ``<circle>``s.
"""

from __future__ import annotations

import numpy as np

from .diagnostics import BootstrapBand, DiagnosticSeries, QQCoordinates, warning_limits
from .families import DomainError
from .rootogram import RootogramCoords

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 56, 16, 28, 44


def _fmt(x: float) -> str:
    return f"{x:.3f}"


class _Frame:
    """Maps data coordinates onto the fixed SVG viewport."""

    def __init__(self, x_min, x_max, y_min, y_max):
        pad_x = 0.04 * (x_max - x_min) or 1.0
        pad_y = 0.06 * (y_max - y_min) or 1.0
        self.x0, self.x1 = x_min - pad_x, x_max + pad_x
        self.y0, self.y1 = y_min - pad_y, y_max + pad_y

    def x(self, v) -> float:
        span = self.x1 - self.x0
        return MARGIN_L + (v - self.x0) / span * (WIDTH - MARGIN_L - MARGIN_R)

    def y(self, v) -> float:
        span = self.y1 - self.y0
        return HEIGHT - MARGIN_B - (v - self.y0) / span * (HEIGHT - MARGIN_T - MARGIN_B)


def _header(title: str) -> list[str]:
    # no background rect: in a rootogram every <rect> is a bar
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'style="background:white">',
    ]
    if title:
        parts.append(
            f'<text x="{WIDTH // 2}" y="18" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{title}</text>'
        )
    return parts


def _axes(frame: _Frame, parts: list[str], x_ticks, y_ticks, x_label, y_label):
    x_axis_y = frame.y(frame.y0)
    parts.append(
        f'<line x1="{_fmt(frame.x(frame.x0))}" y1="{_fmt(x_axis_y)}" '
        f'x2="{_fmt(frame.x(frame.x1))}" y2="{_fmt(x_axis_y)}" stroke="black"/>'
    )
    parts.append(
        f'<line x1="{_fmt(frame.x(frame.x0))}" y1="{_fmt(frame.y(frame.y0))}" '
        f'x2="{_fmt(frame.x(frame.x0))}" y2="{_fmt(frame.y(frame.y1))}" stroke="black"/>'
    )
    for value, label in x_ticks:
        px = frame.x(value)
        parts.append(
            f'<line x1="{_fmt(px)}" y1="{_fmt(x_axis_y)}" x2="{_fmt(px)}" '
            f'y2="{_fmt(x_axis_y + 4)}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_fmt(px)}" y="{_fmt(x_axis_y + 16)}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{label}</text>'
        )
    for value, label in y_ticks:
        py = frame.y(value)
        px = frame.x(frame.x0)
        parts.append(
            f'<line x1="{_fmt(px - 4)}" y1="{_fmt(py)}" x2="{_fmt(px)}" '
            f'y2="{_fmt(py)}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_fmt(px - 7)}" y="{_fmt(py + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{label}</text>'
        )
    parts.append(
        f'<text x="{WIDTH // 2}" y="{HEIGHT - 8}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{x_label}</text>'
    )
    parts.append(
        f'<text x="14" y="{HEIGHT // 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 14 {HEIGHT // 2})">{y_label}</text>'
    )


def _sqrt_scale_ticks(lo: float, hi: float):
    """Ticks at +/- sqrt(v) for perfect squares v, labeled with v."""
    ticks = []
    k = 0
    while True:
        pos = float(k)
        if pos > max(hi, -lo) and k > 1:
            break
        if lo <= pos <= hi:
            ticks.append((pos, str(k * k)))
        if k > 0 and lo <= -pos <= hi:
            ticks.append((-pos, str(k * k)))
        k += 1
        if k > 40:
            break
    return sorted(ticks)


def _linear_ticks(lo: float, hi: float, n: int = 6):
    span = hi - lo
    if span <= 0:
        return [(lo, f"{lo:g}")]
    raw = span / n
    mag = 10 ** np.floor(np.log10(raw))
    step = float(min(s * mag for s in (1, 2, 5, 10) if s * mag >= raw))
    start = np.ceil(lo / step) * step
    values = np.arange(start, hi + step / 2, step)
    return [(float(v), f"{v:g}") for v in values]


def render_rootogram_svg(coords: RootogramCoords, band: BootstrapBand | None = None,
                         show_warning_limits: bool = False, title: str = "") -> str:
    """Rootogram as a standalone SVG document.

    ``band`` adds solid lower/upper bootstrap overlays; warning limits are
    dashed horizontal lines at +/-1.
    """
    m = coords.bin_centers.size
    if m == 0:
        raise DomainError("empty frequency table")
    y_lo = float(min(coords.bar_bottom.min(), 0.0))
    y_hi = float(max(coords.bar_top.max(), coords.expected_curve.max()))
    if band is not None:
        y_lo = min(y_lo, float(band.lower.min()))
        y_hi = max(y_hi, float(band.upper.max()))
    if show_warning_limits:
        lo_lim, hi_lim = warning_limits()
        y_lo = min(y_lo, lo_lim)
        y_hi = max(y_hi, hi_lim)
    half = coords.bar_width / 2.0
    frame = _Frame(float(coords.bin_centers.min() - half),
                   float(coords.bin_centers.max() + half), y_lo, y_hi)

    parts = _header(title)
    if coords.scale == "sqrt":
        y_ticks = _sqrt_scale_ticks(frame.y0, frame.y1)
        y_label = "frequency (square-root scale)"
    else:
        y_ticks = _linear_ticks(frame.y0, frame.y1)
        y_label = "frequency"
    x_ticks = [
        (float(c), f"{c:g}")
        for c in coords.bin_centers
        if m <= 25 or int(c) % 5 == 0
    ]
    _axes(frame, parts, x_ticks, y_ticks, "count", y_label)

    for c, b, t in zip(coords.bin_centers, coords.bar_bottom, coords.bar_top):
        y_top = frame.y(max(b, t))
        h = abs(frame.y(b) - frame.y(t))
        parts.append(
            f'<rect x="{_fmt(frame.x(c - half))}" y="{_fmt(y_top)}" '
            f'width="{_fmt(frame.x(c + half) - frame.x(c - half))}" '
            f'height="{_fmt(h)}" fill="#b0b0b0" stroke="#555555"/>'
        )

    ref_y = frame.y(coords.reference_line)
    parts.append(
        f'<line x1="{_fmt(frame.x(frame.x0))}" y1="{_fmt(ref_y)}" '
        f'x2="{_fmt(frame.x(frame.x1))}" y2="{_fmt(ref_y)}" stroke="black"/>'
    )

    if show_warning_limits:
        for lim in warning_limits():
            py = frame.y(lim)
            parts.append(
                f'<line x1="{_fmt(frame.x(frame.x0))}" y1="{_fmt(py)}" '
                f'x2="{_fmt(frame.x(frame.x1))}" y2="{_fmt(py)}" '
                f'stroke="#2040c0" stroke-dasharray="6 4"/>'
            )
    if band is not None:
        for series in (band.lower, band.upper):
            pts = " ".join(
                f"{_fmt(frame.x(c))},{_fmt(frame.y(v))}"
                for c, v in zip(coords.bin_centers, series)
            )
            parts.append(
                f'<polyline points="{pts}" fill="none" stroke="#2040c0" '
                f'stroke-width="1.5"/>'
            )

    curve = " ".join(
        f"{_fmt(frame.x(c))},{_fmt(frame.y(v))}"
        for c, v in zip(coords.bin_centers, coords.expected_curve)
    )
    parts.append(
        f'<polyline points="{curve}" fill="none" stroke="#c03020" stroke-width="2"/>'
    )
    for c, v in zip(coords.bin_centers, coords.expected_curve):
        parts.append(
            f'<circle cx="{_fmt(frame.x(c))}" cy="{_fmt(frame.y(v))}" r="2.5" '
            f'fill="#c03020" stroke="none"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_qq_svg(qq: QQCoordinates, title: str = "") -> str:
    """Q-Q plot of randomized quantile residuals with its 5%-95% envelope."""
    x = qq.theoretical
    lo = float(min(x.min(), qq.sample.min(), qq.envelope_lower.min()))
    hi = float(max(x.max(), qq.sample.max(), qq.envelope_upper.max()))
    frame = _Frame(lo, hi, lo, hi)
    parts = _header(title)
    _axes(frame, parts, _linear_ticks(frame.x0, frame.x1),
          _linear_ticks(frame.y0, frame.y1),
          "theoretical quantiles", "sample quantiles")
    poly = [f"{_fmt(frame.x(v))},{_fmt(frame.y(e))}" for v, e in zip(x, qq.envelope_upper)]
    poly += [
        f"{_fmt(frame.x(v))},{_fmt(frame.y(e))}"
        for v, e in zip(x[::-1], qq.envelope_lower[::-1])
    ]
    parts.append(
        f'<path d="M {" L ".join(poly)} Z" fill="#d8d8d8" stroke="none"/>'
    )
    parts.append(
        f'<line x1="{_fmt(frame.x(lo))}" y1="{_fmt(frame.y(lo))}" '
        f'x2="{_fmt(frame.x(hi))}" y2="{_fmt(frame.y(hi))}" '
        f'stroke="#888888" stroke-dasharray="4 3"/>'
    )
    for v, s in zip(x, qq.sample):
        parts.append(
            f'<circle cx="{_fmt(frame.x(v))}" cy="{_fmt(frame.y(s))}" r="2.2" '
            f'fill="black" stroke="none"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_pearson_svg(series: DiagnosticSeries, title: str = "") -> str:
    """Scatter of Pearson residuals against fitted means."""
    x = np.asarray(series.fitted_means, dtype=float)
    r = np.asarray(series.values, dtype=float)
    frame = _Frame(float(x.min()), float(x.max()),
                   float(min(r.min(), 0.0)), float(max(r.max(), 0.0)))
    parts = _header(title)
    _axes(frame, parts, _linear_ticks(frame.x0, frame.x1),
          _linear_ticks(frame.y0, frame.y1),
          "fitted mean", "Pearson residual")
    zero_y = frame.y(0.0)
    parts.append(
        f'<line x1="{_fmt(frame.x(frame.x0))}" y1="{_fmt(zero_y)}" '
        f'x2="{_fmt(frame.x(frame.x1))}" y2="{_fmt(zero_y)}" '
        f'stroke="#888888" stroke-dasharray="4 3"/>'
    )
    for xv, rv in zip(x, r):
        parts.append(
            f'<circle cx="{_fmt(frame.x(xv))}" cy="{_fmt(frame.y(rv))}" r="2.2" '
            f'fill="black" stroke="none"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_svg(obj, **options) -> str:
    """Render any plot object this package produces to an SVG document."""
    if isinstance(obj, RootogramCoords):
        return render_rootogram_svg(obj, **options)
    if isinstance(obj, QQCoordinates):
        return render_qq_svg(obj, **options)
    if isinstance(obj, DiagnosticSeries):
        return render_pearson_svg(obj, **options)
    raise DomainError(f"cannot render {type(obj).__name__} as SVG")

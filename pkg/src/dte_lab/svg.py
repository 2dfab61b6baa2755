"""Hand-rolled SVG rendering for effect curves.

Output is a pure function of the curve: fixed canvas, fixed two-decimal
coordinate formatting, no timestamps, so identical runs produce byte
identical files. DTE renders as a solid curve with a shaded pointwise
band; PTE as interval bars with error whiskers. The probability change
of an exactly-zero outcome is drawn as a distinct filled marker.
"""
from __future__ import annotations

import math

from .dataset import EffectCurve

__all__ = ["render_effect_svg"]

_W, _H = 720, 480
_ML, _MR, _MT, _MB = 70, 22, 46, 58

_AXIS = "#57606a"
_TEXT = "#24292f"
_GRID = "#d8dee4"
_CURVE = "#1f6feb"
_BAND = "#1f6feb"
_BAR = "#6cb6ff"
_WHISKER = "#24292f"
_ATOM = "#cf222e"


def _f(v: float) -> str:
    # fixed decimals keep the output byte-stable
    return f"{v:.2f}"


def _label(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return f"{v:.4g}"


def _value_ticks(lo: float, hi: float, want: int = 5) -> list[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / max(1, want - 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(c * mag for c in (1.0, 2.0, 2.5, 5.0, 10.0) if c * mag >= raw)
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * max(1.0, abs(hi)):
        ticks.append(0.0 if abs(t) < step * 1e-9 else t)
        t += step
    return ticks


class _Canvas:
    def __init__(self, x_lo, x_hi, y_lo, y_hi):
        self.x_lo, self.x_hi = x_lo, x_hi
        self.y_lo, self.y_hi = y_lo, y_hi
        self.parts: list[str] = []

    def px(self, x):
        frac = (x - self.x_lo) / (self.x_hi - self.x_lo)
        return _ML + frac * (_W - _ML - _MR)

    def py(self, y):
        frac = (y - self.y_lo) / (self.y_hi - self.y_lo)
        return _H - _MB - frac * (_H - _MT - _MB)

    def add(self, part: str):
        self.parts.append(part)


def _frame(c: _Canvas, title: str, x_ticks, x_title: str, y_title: str):
    c.add(f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="#ffffff"/>')
    c.add(
        f'<text x="{_f(_W / 2)}" y="24" text-anchor="middle" font-size="16" '
        f'fill="{_TEXT}" font-family="sans-serif">{title}</text>'
    )
    for t in _value_ticks(c.y_lo, c.y_hi):
        y = c.py(t)
        c.add(
            f'<line x1="{_f(_ML)}" y1="{_f(y)}" x2="{_f(_W - _MR)}" y2="{_f(y)}" '
            f'stroke="{_GRID}" stroke-width="1"/>'
        )
        c.add(
            f'<text x="{_f(_ML - 8)}" y="{_f(y + 4)}" text-anchor="end" '
            f'font-size="11" fill="{_TEXT}" font-family="sans-serif">{_label(t)}</text>'
        )
    if c.y_lo < 0.0 < c.y_hi:
        y0 = c.py(0.0)
        c.add(
            f'<line x1="{_f(_ML)}" y1="{_f(y0)}" x2="{_f(_W - _MR)}" y2="{_f(y0)}" '
            f'stroke="{_AXIS}" stroke-width="1" stroke-dasharray="4 3"/>'
        )
    for t in x_ticks:
        x = c.px(t)
        c.add(
            f'<line x1="{_f(x)}" y1="{_f(_H - _MB)}" x2="{_f(x)}" y2="{_f(_H - _MB + 5)}" '
            f'stroke="{_AXIS}" stroke-width="1"/>'
        )
        c.add(
            f'<text x="{_f(x)}" y="{_f(_H - _MB + 18)}" text-anchor="middle" '
            f'font-size="11" fill="{_TEXT}" font-family="sans-serif">{_label(t)}</text>'
        )
    c.add(
        f'<line x1="{_f(_ML)}" y1="{_f(_MT)}" x2="{_f(_ML)}" y2="{_f(_H - _MB)}" '
        f'stroke="{_AXIS}" stroke-width="1"/>'
    )
    c.add(
        f'<line x1="{_f(_ML)}" y1="{_f(_H - _MB)}" x2="{_f(_W - _MR)}" y2="{_f(_H - _MB)}" '
        f'stroke="{_AXIS}" stroke-width="1"/>'
    )
    c.add(
        f'<text x="{_f((_ML + _W - _MR) / 2)}" y="{_f(_H - 14)}" text-anchor="middle" '
        f'font-size="12" fill="{_TEXT}" font-family="sans-serif">{x_title}</text>'
    )
    c.add(
        f'<text x="18" y="{_f((_MT + _H - _MB) / 2)}" text-anchor="middle" font-size="12" '
        f'fill="{_TEXT}" font-family="sans-serif" '
        f'transform="rotate(-90 18 {_f((_MT + _H - _MB) / 2)})">{y_title}</text>'
    )


def _x_ticks(locations) -> list[float]:
    locs = [float(v) for v in locations]
    if len(locs) <= 9:
        return locs
    stride = math.ceil(len(locs) / 9)
    ticks = locs[::stride]
    if ticks[-1] != locs[-1]:
        ticks.append(locs[-1])
    return ticks


def _values_range(curve: EffectCurve):
    vals = [0.0]
    vals.extend(float(v) for v in curve.point)
    if curve.ci_lo is not None:
        vals.extend(float(v) for v in curve.ci_lo)
        vals.extend(float(v) for v in curve.ci_hi)
    if curve.atom_at_zero is not None:
        vals.append(float(curve.atom_at_zero))
    lo, hi = min(vals), max(vals)
    pad = 0.08 * (hi - lo) if hi > lo else 0.05
    return lo - pad, hi + pad


def _legend(c: _Canvas, entries):
    x = _W - _MR - 10
    y = _MT + 6
    for text, color, shape in reversed(entries):
        width = 9 * len(text) + 24
        x -= width
        if shape == "line":
            c.add(
                f'<line x1="{_f(x)}" y1="{_f(y)}" x2="{_f(x + 14)}" y2="{_f(y)}" '
                f'stroke="{color}" stroke-width="2"/>'
            )
        elif shape == "box":
            c.add(
                f'<rect x="{_f(x)}" y="{_f(y - 5)}" width="14" height="10" '
                f'fill="{color}" fill-opacity="0.35"/>'
            )
        else:
            c.add(f'<circle cx="{_f(x + 7)}" cy="{_f(y)}" r="4" fill="{color}"/>')
        c.add(
            f'<text x="{_f(x + 18)}" y="{_f(y + 4)}" font-size="11" fill="{_TEXT}" '
            f'font-family="sans-serif">{text}</text>'
        )


def _render_dte(curve: EffectCurve) -> list[str]:
    grid_top = float(curve.grid.top)
    y_lo, y_hi = _values_range(curve)
    c = _Canvas(-0.02 * grid_top if grid_top else -0.5, grid_top * 1.02, y_lo, y_hi)
    _frame(
        c,
        "Distributional treatment effect",
        _x_ticks(curve.locations),
        "outcome level y",
        "F1(y) - F0(y)",
    )
    xs = [c.px(float(v)) for v in curve.locations]
    ys = [c.py(float(v)) for v in curve.point]
    entries = [("DTE", _CURVE, "line")]
    if curve.ci_lo is not None:
        upper = " ".join(f"{_f(x)},{_f(c.py(float(h)))}" for x, h in zip(xs, curve.ci_hi))
        lower = " ".join(
            f"{_f(x)},{_f(c.py(float(l)))}"
            for x, l in zip(reversed(xs), reversed(curve.ci_lo))
        )
        c.add(f'<polygon points="{upper} {lower}" fill="{_BAND}" fill-opacity="0.18"/>')
        entries.append(("pointwise band", _BAND, "box"))
    pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in zip(xs, ys))
    c.add(
        f'<polyline points="{pts}" fill="none" stroke="{_CURVE}" stroke-width="2"/>'
    )
    for x, y in zip(xs[1:], ys[1:]):
        c.add(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="2.5" fill="{_CURVE}"/>')
    # mass-point change at exactly zero, drawn apart from the curve dots
    c.add(
        f'<circle cx="{_f(xs[0])}" cy="{_f(ys[0])}" r="5" fill="{_ATOM}" '
        f'stroke="#ffffff" stroke-width="1.5"/>'
    )
    entries.append(("zero atom", _ATOM, "dot"))
    _legend(c, entries)
    return c.parts


def _render_pte(curve: EffectCurve) -> list[str]:
    grid_top = float(curve.grid.top)
    span = float(curve.span if curve.span is not None else curve.grid.step_h)
    y_lo, y_hi = _values_range(curve)
    c = _Canvas(-0.02 * grid_top if grid_top else -0.5, grid_top * 1.02, y_lo, y_hi)
    _frame(
        c,
        f"Probability treatment effect over (y, y+{_label(span)}]",
        _x_ticks(curve.locations),
        "interval start y",
        "change in interval probability",
    )
    y_zero = c.py(max(c.y_lo, min(c.y_hi, 0.0)))
    for loc, val in zip(curve.locations, curve.point):
        x0 = c.px(float(loc) + 0.12 * span)
        x1 = c.px(float(loc) + 0.88 * span)
        y = c.py(float(val))
        top, height = (y, y_zero - y) if y <= y_zero else (y_zero, y - y_zero)
        c.add(
            f'<rect x="{_f(x0)}" y="{_f(top)}" width="{_f(x1 - x0)}" '
            f'height="{_f(max(height, 0.5))}" fill="{_BAR}" fill-opacity="0.85"/>'
        )
    entries = [("PTE", _BAR, "box")]
    if curve.ci_lo is not None:
        for loc, lo_v, hi_v in zip(curve.locations, curve.ci_lo, curve.ci_hi):
            x = c.px(float(loc) + 0.5 * span)
            yl, yh = c.py(float(lo_v)), c.py(float(hi_v))
            c.add(
                f'<line x1="{_f(x)}" y1="{_f(yl)}" x2="{_f(x)}" y2="{_f(yh)}" '
                f'stroke="{_WHISKER}" stroke-width="1.2"/>'
            )
            for yy in (yl, yh):
                c.add(
                    f'<line x1="{_f(x - 4)}" y1="{_f(yy)}" x2="{_f(x + 4)}" y2="{_f(yy)}" '
                    f'stroke="{_WHISKER}" stroke-width="1.2"/>'
                )
        entries.append(("95% whisker", _WHISKER, "line"))
    if curve.atom_at_zero is not None:
        c.add(
            f'<circle cx="{_f(c.px(0.0))}" cy="{_f(c.py(float(curve.atom_at_zero)))}" '
            f'r="5" fill="{_ATOM}" stroke="#ffffff" stroke-width="1.5"/>'
        )
        entries.append(("zero atom", _ATOM, "dot"))
    _legend(c, entries)
    return c.parts


def render_effect_svg(curve: EffectCurve) -> str:
    """Render one effect curve to a standalone SVG string."""
    parts = _render_dte(curve) if curve.effect_kind == "DTE" else _render_pte(curve)
    body = "\n".join(parts)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">\n{body}\n</svg>\n'
    )

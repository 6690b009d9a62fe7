"""Static SVG renderers for pipeline reports.

Hand-rolled string assembly, no scripting, fixed two-decimal pixel
coordinates: identical inputs produce identical bytes. Every quantity drawn
here is also written to a CSV/TSV by the pipeline; plots are views.
"""

from __future__ import annotations

import numpy as np

# Tol bright palette (colorblind-safe), cycled when classes exceed it
PALETTE = (
    "#4477aa",
    "#ee6677",
    "#228833",
    "#ccbb44",
    "#66ccee",
    "#aa3377",
    "#bbbbbb",
)

_W, _H = 640, 480
_ML, _MR, _MT, _MB = 64, 24, 44, 52


def _f(x: float) -> str:
    s = "%.2f" % float(x)
    return "0.00" if s == "-0.00" else s


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def color_for(label: str, classes: list[str]) -> str:
    return PALETTE[classes.index(label) % len(PALETTE)]


class _Frame:
    """Affine map from data space to the plot rectangle."""

    def __init__(self, xlo, xhi, ylo, yhi, equal_aspect=False):
        if xhi == xlo:
            xlo, xhi = xlo - 0.5, xhi + 0.5
        if yhi == ylo:
            ylo, yhi = ylo - 0.5, yhi + 0.5
        pw, ph = _W - _ML - _MR, _H - _MT - _MB
        if equal_aspect:
            scale = min(pw / (xhi - xlo), ph / (yhi - ylo))
            xpad = (pw / scale - (xhi - xlo)) / 2
            ypad = (ph / scale - (yhi - ylo)) / 2
            xlo, xhi = xlo - xpad, xhi + xpad
            ylo, yhi = ylo - ypad, yhi + ypad
        self.xlo, self.xhi, self.ylo, self.yhi = xlo, xhi, ylo, yhi

    def x(self, v: float) -> float:
        return _ML + (v - self.xlo) / (self.xhi - self.xlo) * (_W - _ML - _MR)

    def y(self, v: float) -> float:
        return _H - _MB - (v - self.ylo) / (self.yhi - self.ylo) * (_H - _MT - _MB)


def _header() -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif">',
        f'<rect width="{_W}" height="{_H}" fill="#ffffff"/>',
    ]


def _title(text: str) -> str:
    return (
        f'<text x="{_W // 2}" y="24" text-anchor="middle" font-size="15" '
        f'fill="#222222">{_esc(text)}</text>'
    )


def _axes(frame: _Frame, xlabel: str = "", ylabel: str = "") -> list[str]:
    parts = [
        f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
        f'height="{_H - _MT - _MB}" fill="none" stroke="#888888"/>'
    ]
    for v in np.linspace(frame.xlo, frame.xhi, 5):
        px = frame.x(v)
        parts.append(
            f'<line x1="{_f(px)}" y1="{_H - _MB}" x2="{_f(px)}" '
            f'y2="{_H - _MB + 4}" stroke="#888888"/>'
        )
        parts.append(
            f'<text x="{_f(px)}" y="{_H - _MB + 16}" text-anchor="middle" '
            f'font-size="10" fill="#444444">{"%.4g" % v}</text>'
        )
    for v in np.linspace(frame.ylo, frame.yhi, 5):
        py = frame.y(v)
        parts.append(
            f'<line x1="{_ML - 4}" y1="{_f(py)}" x2="{_ML}" '
            f'y2="{_f(py)}" stroke="#888888"/>'
        )
        parts.append(
            f'<text x="{_ML - 7}" y="{_f(py + 3)}" text-anchor="end" '
            f'font-size="10" fill="#444444">{"%.4g" % v}</text>'
        )
    if xlabel:
        parts.append(
            f'<text x="{_W // 2}" y="{_H - 12}" text-anchor="middle" '
            f'font-size="12" fill="#222222">{_esc(xlabel)}</text>'
        )
    if ylabel:
        parts.append(
            f'<text x="16" y="{_H // 2}" text-anchor="middle" font-size="12" '
            f'fill="#222222" transform="rotate(-90 16 {_H // 2})">{_esc(ylabel)}</text>'
        )
    return parts


def _legend(entries: list[tuple[str, str, str]]) -> list[str]:
    # entries: (label, color, kind) with kind "dot" | "line" | "dash"
    parts = []
    x0, y0 = _W - _MR - 150, _MT + 12
    for i, (label, color, kind) in enumerate(entries):
        y = y0 + 16 * i
        if kind == "dot":
            parts.append(f'<circle cx="{x0 + 6}" cy="{y}" r="4" fill="{color}"/>')
        else:
            dash = ' stroke-dasharray="4 3"' if kind == "dash" else ""
            parts.append(
                f'<line x1="{x0}" y1="{y}" x2="{x0 + 14}" y2="{y}" '
                f'stroke="{color}" stroke-width="2"{dash}/>'
            )
        parts.append(
            f'<text x="{x0 + 20}" y="{y + 4}" font-size="11" '
            f'fill="#222222">{_esc(label)}</text>'
        )
    return parts


def svg_scatter(xs, ys, labels: list[str], title: str = "") -> str:
    """Scatter plot colored by class label, with legend."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    classes = sorted(set(labels))
    frame = _Frame(xs.min(), xs.max(), ys.min(), ys.max())
    parts = _header()
    parts.append(_title(title))
    parts += _axes(frame)
    for x, y, lab in zip(xs, ys, labels):
        parts.append(
            f'<circle cx="{_f(frame.x(x))}" cy="{_f(frame.y(y))}" r="4" '
            f'fill="{color_for(lab, classes)}" fill-opacity="0.85"/>'
        )
    parts += _legend([(c, color_for(c, classes), "dot") for c in classes])
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def svg_line_chart(
    xs, series: list[tuple[str, list[float]]], title="", xlabel="", ylabel=""
) -> str:
    """One polyline per (name, values) series over shared x positions."""
    xs = np.asarray(xs, dtype=float)
    ally = np.concatenate([np.asarray(ys, dtype=float) for _, ys in series])
    frame = _Frame(xs.min(), xs.max(), ally.min(), ally.max())
    parts = _header()
    parts.append(_title(title))
    parts += _axes(frame, xlabel, ylabel)
    names = [name for name, _ in series]
    for name, ys in series:
        color = color_for(name, names)
        pts = " ".join(
            f"{_f(frame.x(x))},{_f(frame.y(y))}" for x, y in zip(xs, ys)
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        for x, y in zip(xs, ys):
            parts.append(
                f'<circle cx="{_f(frame.x(x))}" cy="{_f(frame.y(y))}" r="3" '
                f'fill="{color}"/>'
            )
    parts += _legend([(n, color_for(n, names), "line") for n in names])
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def pca_project(points: np.ndarray) -> np.ndarray:
    """Orthographic projection onto the top-2 principal-component plane.

    Deterministic: component sign fixed so the largest-magnitude loading of
    each axis is positive.
    """
    pts = np.asarray(points, dtype=float)
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered
    _, vecs = np.linalg.eigh(cov)
    basis = vecs[:, ::-1][:, :2]
    for c in range(2):
        pivot = np.argmax(np.abs(basis[:, c]))
        if basis[pivot, c] < 0:
            basis[:, c] = -basis[:, c]
    return centered @ basis


def svg_backbone(
    points2d: np.ndarray,
    cycle_edges: list[tuple[int, int, bool]],
    core_span: tuple[int, int] | None = None,
    title: str = "",
) -> str:
    """Projected backbone polyline with a cycle representative drawn on top.

    `cycle_edges` holds (u, v, on_backbone) point-index triples; `core_span`
    is an inclusive cloud-index range highlighted as the knot core.
    """
    pts = np.asarray(points2d, dtype=float)
    frame = _Frame(
        pts[:, 0].min(), pts[:, 0].max(), pts[:, 1].min(), pts[:, 1].max(),
        equal_aspect=True,
    )
    px = [frame.x(v) for v in pts[:, 0]]
    py = [frame.y(v) for v in pts[:, 1]]
    parts = _header()
    parts.append(_title(title))
    chain = " ".join(f"{_f(x)},{_f(y)}" for x, y in zip(px, py))
    parts.append(
        f'<polyline points="{chain}" fill="none" stroke="#999999" stroke-width="1"/>'
    )
    if core_span is not None:
        lo, hi = core_span
        seg = " ".join(
            f"{_f(px[i])},{_f(py[i])}" for i in range(lo, hi + 1)
        )
        parts.append(
            f'<polyline points="{seg}" fill="none" stroke="#333333" '
            f'stroke-width="2.5"/>'
        )
    for u, v, on_bb in cycle_edges:
        style = (
            'stroke="#ee6677" stroke-width="2"'
            if on_bb
            else 'stroke="#aa3377" stroke-width="1.5" stroke-dasharray="4 3"'
        )
        parts.append(
            f'<line x1="{_f(px[u])}" y1="{_f(py[u])}" '
            f'x2="{_f(px[v])}" y2="{_f(py[v])}" {style}/>'
        )
    legend = [
        ("backbone", "#999999", "line"),
        ("cycle (backbone edge)", "#ee6677", "line"),
        ("cycle (shortcut edge)", "#aa3377", "dash"),
    ]
    if core_span is not None:
        legend.insert(1, ("knot core", "#333333", "line"))
    parts += _legend(legend)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _lerp_color(t: float) -> str:
    # white -> dark blue
    lo, hi = (255, 255, 255), (8, 81, 156)
    rgb = tuple(round(a + (b - a) * t) for a, b in zip(lo, hi))
    return "#%02x%02x%02x" % rgb


def svg_heatmap(values: np.ndarray, ids: list[str], title: str = "") -> str:
    """n-by-n matrix as shaded cells; labels drawn when they fit."""
    vals = np.asarray(values, dtype=float)
    n = vals.shape[0]
    vmin, vmax = float(vals.min()), float(vals.max())
    span = vmax - vmin
    cell_w = (_W - _ML - _MR) / n
    cell_h = (_H - _MT - _MB) / n
    parts = _header()
    parts.append(_title(title))
    for i in range(n):
        for j in range(n):
            t = 0.0 if span == 0 else (vals[i, j] - vmin) / span
            parts.append(
                f'<rect x="{_f(_ML + j * cell_w)}" y="{_f(_MT + i * cell_h)}" '
                f'width="{_f(cell_w)}" height="{_f(cell_h)}" '
                f'fill="{_lerp_color(t)}"/>'
            )
    if n <= 24:
        for i, sid in enumerate(ids):
            cy = _MT + (i + 0.5) * cell_h
            parts.append(
                f'<text x="{_ML - 6}" y="{_f(cy + 3)}" text-anchor="end" '
                f'font-size="9" fill="#444444">{_esc(sid)}</text>'
            )
            cx = _ML + (i + 0.5) * cell_w
            parts.append(
                f'<text x="{_f(cx)}" y="{_f(_H - _MB + 10)}" '
                f'text-anchor="end" font-size="9" fill="#444444" '
                f'transform="rotate(-60 {_f(cx)} {_f(_H - _MB + 10)})">{_esc(sid)}</text>'
            )
    parts.append(
        f'<text x="{_ML}" y="{_H - 8}" font-size="10" fill="#444444">'
        f"min={'%.6g' % vmin}, max={'%.6g' % vmax}</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"

"""Footfall diagrams and simple line charts written as plain SVG."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .gait import LEG_NAMES, GaitSpec
from .symmetry import expected_indicators

LEG_COLORS = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a")


@dataclass(frozen=True)
class FootfallDiagram:
    """Stance intervals per leg in stride units, legs in LH, LF, RF, RH order."""

    intervals: tuple[tuple[tuple[float, float], ...], ...]
    strides: float

    def __post_init__(self) -> None:
        if len(self.intervals) != 4:
            raise ValueError("a footfall diagram has exactly four legs")
        for leg in self.intervals:
            prev = 0.0
            for a, b in leg:
                if not (0.0 <= a < b <= self.strides + 1e-12) or a < prev - 1e-12:
                    raise ValueError(f"bad or overlapping stance interval ({a}, {b})")
                prev = b

    @classmethod
    def from_spec(cls, spec: GaitSpec, duty: float, strides: int = 2, forward: bool = True) -> FootfallDiagram:
        """Ideal bars: a leg stands while its phase lies in ``[1 - β, 1)``."""
        if not 0.0 < duty < 1.0:
            raise ValueError("duty factor must lie in (0, 1)")
        legs = []
        for theta in spec.offsets:
            # forward: mod(s + θ, 1) >= 1 - β; backward: mod(s + θ, 1) in (0, β]
            start = (1.0 - duty - theta) % 1.0 if forward else (-theta) % 1.0
            spans = []
            for k in range(-1, strides + 1):
                a, b = max(k + start, 0.0), min(k + start + duty, float(strides))
                if b > a + 1e-12:
                    spans.append((a, b))
            legs.append(tuple(_merge(spans)))
        return cls(tuple(legs), float(strides))

    @classmethod
    def from_contacts(cls, cycles: np.ndarray, contact: np.ndarray) -> FootfallDiagram:
        """Measured bars from stride coordinates ``cycles`` (K,) and contacts (K, 4).

        Sample ``k`` covers ``[cycles[k-1], cycles[k])``, with ``cycles[-1]`` taken as 0.
        """
        cycles = np.asarray(cycles, dtype=float)
        contact = np.asarray(contact, dtype=bool)
        edges = np.concatenate([[0.0], cycles])
        legs = []
        for j in range(4):
            spans = [(edges[k], edges[k + 1]) for k in range(len(cycles)) if contact[k, j]]
            legs.append(tuple(_merge(spans)))
        return cls(tuple(legs), float(edges[-1]))

    def stance_fractions(self) -> np.ndarray:
        return np.array([sum(b - a for a, b in leg) for leg in self.intervals]) / self.strides

    def to_svg(self, title: str = "") -> str:
        svg = Svg(720, 60 + 40 * 4)
        left, right, top = 60.0, 700.0, 40.0
        scale = (right - left) / self.strides
        if title:
            svg.text(left, 22, title, size=14)
        for j, (name, leg) in enumerate(zip(LEG_NAMES, self.intervals)):
            y = top + 40 * j
            svg.text(10, y + 20, name)
            svg.rect(left, y + 4, right - left, 24, fill="#f2f2f2")
            for a, b in leg:
                svg.rect(left + a * scale, y + 4, (b - a) * scale, 24, fill=LEG_COLORS[j])
        for k in range(int(np.floor(self.strides)) + 1):
            x = left + k * scale
            svg.line(x, top, x, top + 160, stroke="#444", width=0.5)
        return svg.render()


def _merge(spans):
    out: list[list[float]] = []
    for a, b in sorted(spans):
        if out and a <= out[-1][1] + 1e-12:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [tuple(s) for s in out]


class Svg:
    """Tiny SVG builder: rectangles, lines, polylines and text."""

    def __init__(self, width: float, height: float):
        self.width, self.height = width, height
        self.items: list[str] = []

    def rect(self, x, y, w, h, fill="#000") -> None:
        self.items.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" fill="{fill}"/>')

    def line(self, x1, y1, x2, y2, stroke="#000", width=1.0) -> None:
        self.items.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
                          f'stroke="{stroke}" stroke-width="{width}"/>')

    def polyline(self, xs, ys, stroke="#000", width=1.0, dash: str | None = None) -> None:
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(f'<polyline points="{pts}" fill="none" stroke="{stroke}" '
                          f'stroke-width="{width}"{extra}/>')

    def text(self, x, y, s, size=12) -> None:
        self.items.append(f'<text x="{x:.2f}" y="{y:.2f}" font-family="sans-serif" '
                          f'font-size="{size}">{escape(str(s))}</text>')

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">')
        return "\n".join([head, f'<rect width="100%" height="100%" fill="white"/>', *self.items, "</svg>"]) + "\n"


def _panel(svg: Svg, box, x, series, label: str) -> None:
    """Draw ``series`` of (values, color, dash) inside ``box`` = (left, top, w, h), each scaled to [0, 1]."""
    left, top, w, h = box
    svg.rect(left, top, w, h, fill="#fafafa")
    svg.text(left - 55, top + h / 2, label)
    x = np.asarray(x, dtype=float)
    span = max(x[-1] - x[0], 1e-12) if x.size else 1.0
    for values, color, dash in series:
        v = np.asarray(values, dtype=float)
        lo, hi = (0.0, 1.0) if v.size == 0 else (min(v.min(), 0.0), max(v.max(), 1e-12))
        xs = left + (x - x[0]) / span * w
        ys = top + h - (v - lo) / max(hi - lo, 1e-12) * h
        svg.polyline(xs, ys, stroke=color, width=1.2, dash=dash)


def coefficient_curves_svg(duty: float, kappa: float, samples: int = 400) -> str:
    """``E[I_swing]`` and ``E[I_stance]`` over one stride."""
    phi = np.arange(samples) / samples
    swing, stance = expected_indicators(phi, duty, kappa)
    svg = Svg(720, 260)
    svg.text(60, 22, f"reward coefficients, duty {duty:.3f}, kappa {kappa:g}", size=14)
    _panel(svg, (60, 40, 640, 180), phi, [(swing, "#d95f02", None), (stance, "#1b9e77", "4 2")], "E[I]")
    svg.text(60, 245, "phase 0 .. 1; solid swing, dashed stance")
    return svg.render()


def read_trace(path) -> dict[str, np.ndarray]:
    """Columns of a trace CSV as float arrays; raises ValueError on malformed input."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty trace") from None
        rows = list(reader)
    need = ["time", "period", "v_cmd", "v_x"] + [f"contact_{leg}" for leg in LEG_NAMES]
    missing = [c for c in need if c not in header]
    if missing:
        raise ValueError(f"{path}: missing trace columns {missing}")
    if not rows:
        raise ValueError(f"{path}: trace has no rows")
    try:
        data = np.array([[float(x) for x in row] for row in rows])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric trace entry ({exc})") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ValueError(f"{path}: ragged trace rows")
    return {name: data[:, i] for i, name in enumerate(header)}


def trace_cycles(trace: dict[str, np.ndarray]) -> np.ndarray:
    """Stride coordinate at the end of each trace row."""
    t = trace["time"]
    dt = np.diff(np.concatenate([[0.0], t]))
    return np.cumsum(dt / trace["period"])


def trace_footfall(trace: dict[str, np.ndarray]) -> FootfallDiagram:
    contact = np.stack([trace[f"contact_{leg}"] for leg in LEG_NAMES], -1) > 0.5
    return FootfallDiagram.from_contacts(trace_cycles(trace), contact)


def trace_overlay_svg(trace: dict[str, np.ndarray], title: str = "") -> str:
    """Per leg: measured GRF and foot speed against the E[I] coefficients, then the velocity trace."""
    t = trace["time"]
    svg = Svg(760, 60 + 5 * 120)
    if title:
        svg.text(70, 22, title, size=14)
    for j, leg in enumerate(LEG_NAMES):
        top = 40 + 120 * j
        series = []
        if f"grf_{leg}" in trace:
            series.append((trace[f"grf_{leg}"], "#1b9e77", None))
        if f"foot_speed_{leg}" in trace:
            series.append((trace[f"foot_speed_{leg}"], "#d95f02", None))
        if f"stance_weight_{leg}" in trace:
            w = trace[f"stance_weight_{leg}"]
            series += [(w, "#1b9e77", "4 2"), (1.0 - w, "#d95f02", "4 2")]
        series.append((trace[f"contact_{leg}"] * 0.1, "#444", None))
        _panel(svg, (70, top, 660, 100), t, series, leg)
    top = 40 + 120 * 4
    _panel(svg, (70, top, 660, 100), t, [(trace["v_cmd"], "#444", "4 2"), (trace["v_x"], "#7570b3", None)], "v_x")
    svg.text(70, top + 118, "solid: GRF (green), foot speed (orange), v_x; dashed: E[I_stance], E[I_swing], v_cmd")
    return svg.render()


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path

"""Standalone SVG plots: the kappa plane and eigenvalue trajectories."""
from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError
from .fileio import write_text_atomic

W, H, PAD = 640, 640, 48
BRANCH_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
                 "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939")
CUT_COLOR = "#c00000"
LOOP_COLOR = "#1f4fd0"


def _fmt(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


class _Canvas:
    def __init__(self, xmin, xmax, ymin, ymax, title: str, xlabel: str, ylabel: str):
        if not (xmax > xmin and ymax > ymin):
            xmin, xmax, ymin, ymax = -1.0, 1.0, -1.0, 1.0
        self.box = (xmin, xmax, ymin, ymax)
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
            f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
            f'<text x="{W // 2}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{title}</text>',
        ]
        self._axes(xlabel, ylabel)

    def xy(self, z: complex):
        xmin, xmax, ymin, ymax = self.box
        x = PAD + (z.real - xmin) / (xmax - xmin) * (W - 2 * PAD)
        y = H - PAD - (z.imag - ymin) / (ymax - ymin) * (H - 2 * PAD)
        return x, y

    def _axes(self, xlabel, ylabel):
        xmin, xmax, ymin, ymax = self.box
        self.parts.append(
            f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" fill="none" stroke="black"/>'
        )
        for k in range(5):
            xv = xmin + k * (xmax - xmin) / 4
            yv = ymin + k * (ymax - ymin) / 4
            px, _ = self.xy(complex(xv, ymin))
            _, py = self.xy(complex(xmin, yv))
            self.parts.append(f'<text x="{_fmt(px)}" y="{H - PAD + 16}" font-family="sans-serif" font-size="10" '
                              f'text-anchor="middle">{xv:.3g}</text>')
            self.parts.append(f'<text x="{PAD - 6}" y="{_fmt(py + 3)}" font-family="sans-serif" font-size="10" '
                              f'text-anchor="end">{yv:.3g}</text>')
        self.parts.append(f'<text x="{W // 2}" y="{H - 8}" font-family="sans-serif" font-size="12" '
                          f'text-anchor="middle">{xlabel}</text>')
        self.parts.append(f'<text x="14" y="{H // 2}" font-family="sans-serif" font-size="12" text-anchor="middle" '
                          f'transform="rotate(-90 14 {H // 2})">{ylabel}</text>')

    def polyline(self, pts: Sequence[complex], color: str, width: float = 1.5, cls: str = ""):
        if len(pts) < 2:
            return
        coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in (self.xy(complex(z)) for z in pts))
        c = f' class="{cls}"' if cls else ""
        self.parts.append(f'<polyline{c} points="{coords}" fill="none" stroke="{color}" stroke-width="{width}"/>')

    def dots(self, pts: Sequence[complex], color: str, r: float = 1.6, cls: str = ""):
        c = f' class="{cls}"' if cls else ""
        body = "".join(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{r}"/>' for x, y in (self.xy(complex(z)) for z in pts))
        self.parts.append(f'<g{c} fill="{color}">{body}</g>')

    def mark(self, z: complex, label: str):
        x, y = self.xy(complex(z))
        self.parts.append(
            f'<g class="ep"><path d="M{_fmt(x - 5)},{_fmt(y - 5)} L{_fmt(x + 5)},{_fmt(y + 5)} '
            f'M{_fmt(x - 5)},{_fmt(y + 5)} L{_fmt(x + 5)},{_fmt(y - 5)}" stroke="black" stroke-width="2"/>'
            f'<text x="{_fmt(x + 7)}" y="{_fmt(y - 7)}" font-family="sans-serif" font-size="11">{label}</text></g>'
        )

    def svg(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def atlas_svg(atlas=None, loops: Sequence = (), title: str = "kappa plane") -> str:
    """EP marks, cut point clouds and optional loop polylines."""
    if atlas is not None:
        r = atlas.region
        box = (r.xmin, r.xmax, r.ymin, r.ymax)
    else:
        pts = np.concatenate([p.polyline() for p in loops]) if loops else np.array([0j])
        box = (pts.real.min() - 0.5, pts.real.max() + 0.5, pts.imag.min() - 0.5, pts.imag.max() + 0.5)
    cv = _Canvas(*box, title, "Re kappa", "Im kappa")
    if atlas is not None:
        for cut in atlas.cuts:
            cv.dots(cut.points, CUT_COLOR, cls=f"cut cut{cut.cut_id}")
        for k, ep in enumerate(atlas.eps, start=1):
            cv.mark(ep.location, f"EP {k}")
    for p in loops:
        cv.polyline(p.polyline(per_unit=100.0), LOOP_COLOR, 2.0, cls="loop")
        x, y = cv.xy(p.basepoint)
        cv.parts.append(f'<circle class="basepoint" cx="{_fmt(x)}" cy="{_fmt(y)}" r="4" fill="gray"/>')
    return cv.svg()


def trajectory_svg(traj=None, title: str = "eigenvalue trajectories") -> str:
    """Re lambda vs Im lambda per state, coloured by the branch it sits on."""
    if traj is None or traj.t.size == 0:
        return _Canvas(-1, 1, -1, 1, title, "Re lambda", "Im lambda").svg()
    v = traj.state_values
    pad = 0.05 * max(np.ptp(v.real), np.ptp(v.imag), 1e-3)
    cv = _Canvas(v.real.min() - pad, v.real.max() + pad, v.imag.min() - pad, v.imag.max() + pad,
                 title, "Re lambda", "Im lambda")
    for j in range(traj.n):
        b = traj.branch_of_state[:, j]
        cuts = np.nonzero(np.diff(b))[0] + 1
        start = 0
        for stop in list(cuts) + [b.size]:
            seg = v[start:stop, j]
            if stop < b.size:
                seg = np.append(seg, v[stop, j])
            cv.polyline(seg, BRANCH_COLORS[(b[start] - 1) % len(BRANCH_COLORS)], 2.0, cls=f"state{j + 1}")
            start = stop
        cv.dots([v[0, j]], "gray", r=4.0, cls="start")
    return cv.svg()


def emit_plot(kind: str, data, out_path, **kw) -> str:
    if kind == "atlas":
        text = atlas_svg(data, **kw)
    elif kind == "trajectory":
        text = trajectory_svg(data, **kw)
    else:
        raise InvalidInputError(f"unknown plot kind {kind!r}")
    write_text_atomic(out_path, text)
    return str(out_path)

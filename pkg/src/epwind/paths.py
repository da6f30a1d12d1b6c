"""Piecewise parametric loops in the complex kappa-plane.

A path is a chain of segments. The global parameter ``t`` in [0, 1] advances
with the swept angle on arcs and with length on straight pieces, which is
the same clock as the ``omega * t`` parametrisations used for slow
encircling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError

JOIN_TOL = 1e-12


@dataclass(frozen=True)
class EllipseArc:
    center: complex
    a: float
    b: float
    tilt: float
    start: float
    end: float

    @property
    def span(self) -> float:
        return abs(self.end - self.start)

    def _angle(self, u):
        return self.start + np.asarray(u, dtype=float) * (self.end - self.start)

    def point(self, u):
        phi = self._angle(u)
        return self.center + (self.a * np.cos(phi) + 1j * self.b * np.sin(phi)) * np.exp(1j * self.tilt)

    def velocity(self, u):
        phi = self._angle(u)
        d = self.end - self.start
        return d * (-self.a * np.sin(phi) + 1j * self.b * np.cos(phi)) * np.exp(1j * self.tilt)

    def reversed(self):
        return type(self)(**{**self._fields(), "start": self.end, "end": self.start})

    def split(self, u: float):
        mid = self.start + u * (self.end - self.start)
        return (
            type(self)(**{**self._fields(), "end": mid}),
            type(self)(**{**self._fields(), "start": mid}),
        )

    def _fields(self):
        return {"center": self.center, "a": self.a, "b": self.b, "tilt": self.tilt, "start": self.start, "end": self.end}

    def primitive(self):
        return 0, [self.center.real, self.center.imag, self.a, self.b, self.tilt, self.start, self.end]

    def to_json(self):
        return {"type": "ellipse_arc", "center": [self.center.real, self.center.imag], "a": self.a, "b": self.b,
                "tilt": self.tilt, "start": self.start, "end": self.end}


class CircleArc(EllipseArc):
    def __init__(self, center, radius, start, end):
        super().__init__(complex(center), float(radius), float(radius), 0.0, float(start), float(end))

    @property
    def radius(self):
        return self.a

    def _fields(self):
        return {"center": self.center, "radius": self.a, "start": self.start, "end": self.end}

    def to_json(self):
        return {"type": "circle_arc", "center": [self.center.real, self.center.imag], "radius": self.a,
                "start": self.start, "end": self.end}


@dataclass(frozen=True)
class Line:
    z_start: complex
    z_end: complex

    @property
    def span(self) -> float:
        return abs(self.z_end - self.z_start)

    def point(self, u):
        u = np.asarray(u, dtype=float)
        return self.z_start + u * (self.z_end - self.z_start)

    def velocity(self, u):
        return np.zeros(np.shape(u)) + (self.z_end - self.z_start)

    def reversed(self):
        return Line(self.z_end, self.z_start)

    def split(self, u: float):
        mid = complex(self.point(u))
        return Line(self.z_start, mid), Line(mid, self.z_end)

    def primitive(self):
        return 1, [self.z_start.real, self.z_start.imag, self.z_end.real, self.z_end.imag, 0.0, 0.0, 0.0]

    def to_json(self):
        return {"type": "line", "start": [self.z_start.real, self.z_start.imag], "end": [self.z_end.real, self.z_end.imag]}


@dataclass(frozen=True)
class Samples:
    """Explicit polyline; parametrised by arc length."""

    points: tuple

    def __post_init__(self):
        pts = tuple(complex(z) for z in self.points)
        if len(pts) < 2:
            raise InvalidInputError("a Samples segment needs at least two points")
        object.__setattr__(self, "points", pts)

    def _lines(self):
        return [Line(a, b) for a, b in zip(self.points[:-1], self.points[1:])]

    @property
    def span(self) -> float:
        return float(sum(ln.span for ln in self._lines()))

    def _locate(self, u):
        lines = self._lines()
        spans = np.array([ln.span for ln in lines])
        cum = np.concatenate([[0.0], np.cumsum(spans)])
        total = cum[-1]
        s = np.asarray(u, dtype=float) * total
        idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(lines) - 1)
        with np.errstate(invalid="ignore", divide="ignore"):
            local = np.where(spans[idx] > 0, (s - cum[idx]) / np.where(spans[idx] > 0, spans[idx], 1.0), 0.0)
        return lines, idx, local, total

    def point(self, u):
        lines, idx, local, _ = self._locate(u)
        a = np.array([ln.z_start for ln in lines])[idx]
        b = np.array([ln.z_end for ln in lines])[idx]
        return a + local * (b - a)

    def velocity(self, u):
        lines, idx, _, total = self._locate(u)
        d = np.array([ln.z_end - ln.z_start for ln in lines])[idx]
        spans = np.array([ln.span for ln in lines])[idx]
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(spans > 0, d / np.where(spans > 0, spans, 1.0) * total, 0.0)

    def reversed(self):
        return Samples(self.points[::-1])

    def split(self, u: float):
        lines, idx, local, _ = self._locate(np.array([u]))
        k = int(idx[0])
        mid = complex(self.point(np.array([u]))[0])
        first = self.points[: k + 1] + (mid,)
        second = (mid,) + self.points[k + 1:]
        return Samples(first), Samples(second)

    def primitives(self):
        return [ln.primitive() for ln in self._lines()]

    def to_json(self):
        return {"type": "samples", "points": [[z.real, z.imag] for z in self.points]}


def segment_from_json(doc) -> object:
    def cz(v):
        return complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)

    kind = doc.get("type")
    try:
        if kind == "circle_arc":
            return CircleArc(cz(doc["center"]), doc["radius"], doc["start"], doc["end"])
        if kind == "ellipse_arc":
            return EllipseArc(cz(doc["center"]), float(doc["a"]), float(doc["b"]), float(doc.get("tilt", 0.0)),
                              float(doc["start"]), float(doc["end"]))
        if kind == "line":
            return Line(cz(doc["start"]), cz(doc["end"]))
        if kind == "samples":
            return Samples(tuple(cz(p) for p in doc["points"]))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise InvalidInputError(f"malformed {kind} segment: {exc}") from None
    raise InvalidInputError(f"unknown segment type {kind!r}")


class Path:
    """Continuous chain of segments; closed paths return to ``basepoint``."""

    def __init__(self, segments: Sequence, name: str = ""):
        segs = tuple(segments)
        if not segs:
            raise InvalidInputError("a path needs at least one segment")
        for s1, s2 in zip(segs[:-1], segs[1:]):
            a = complex(np.asarray(s1.point(1.0)).reshape(()))
            b = complex(np.asarray(s2.point(0.0)).reshape(()))
            if abs(a - b) > JOIN_TOL * (1 + abs(a)):
                raise InvalidInputError(f"segments do not join: gap {abs(a - b):.3g} at {a}")
        self.segments = segs
        self.name = name
        spans = np.array([s.span for s in segs], dtype=float)
        self._spans = spans
        self._cum = np.concatenate([[0.0], np.cumsum(spans)])

    # -- basic geometry ----------------------------------------------------
    @property
    def total_phase(self) -> float:
        return float(self._cum[-1])

    @property
    def basepoint(self) -> complex:
        return complex(np.asarray(self.segments[0].point(0.0)).reshape(()))

    @property
    def endpoint(self) -> complex:
        return complex(np.asarray(self.segments[-1].point(1.0)).reshape(()))

    @property
    def is_closed(self) -> bool:
        b = self.basepoint
        return abs(self.endpoint - b) <= JOIN_TOL * (1 + abs(b))

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        total = self.total_phase
        if total == 0:
            return np.zeros(t.shape, dtype=int), np.zeros(t.shape)
        s = np.clip(t, 0.0, 1.0) * total
        idx = np.clip(np.searchsorted(self._cum, s, side="right") - 1, 0, len(self.segments) - 1)
        span = self._spans[idx]
        local = np.where(span > 0, (s - self._cum[idx]) / np.where(span > 0, span, 1.0), 0.0)
        return idx, np.clip(local, 0.0, 1.0)

    def point(self, t):
        t = np.asarray(t, dtype=float)
        idx, local = self._locate(t)
        out = np.empty(t.shape, dtype=complex)
        for k, seg in enumerate(self.segments):
            m = idx == k
            if np.any(m):
                out[m] = seg.point(local[m])
        return out if out.ndim else complex(out)

    def velocity(self, t):
        """d kappa / d t for the global parameter."""
        t = np.asarray(t, dtype=float)
        idx, local = self._locate(t)
        out = np.empty(t.shape, dtype=complex)
        for k, seg in enumerate(self.segments):
            m = idx == k
            if np.any(m):
                span = self._spans[k]
                scale = self.total_phase / span if span > 0 else 0.0
                out[m] = seg.velocity(local[m]) * scale
        return out if out.ndim else complex(out)

    def polyline(self, per_unit: float = 200.0, min_per_segment: int = 8) -> np.ndarray:
        """Dense point list along the path, including every segment joint."""
        pts = []
        for seg in self.segments:
            geo = seg.span if isinstance(seg, (Line, Samples)) else seg.span * max(seg.a, seg.b)
            if isinstance(seg, Samples):
                sub = np.array(seg.points)
            else:
                k = max(min_per_segment, int(math.ceil(geo * per_unit)))
                sub = seg.point(np.linspace(0.0, 1.0, k + 1))
            pts.append(sub if not pts else sub[1:])
        return np.concatenate(pts)

    def signed_area(self) -> float:
        z = self.polyline()
        x, y = z.real, z.imag
        return 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))

    @property
    def orientation(self) -> str:
        return "CCW" if self.signed_area() >= 0 else "CW"

    # -- transformations ---------------------------------------------------
    def reversed(self) -> "Path":
        return Path([s.reversed() for s in self.segments[::-1]], self.name + "~rev" if self.name else "")

    def rebased(self, t0: float) -> "Path":
        """Same closed loop, started at global parameter t0."""
        if not self.is_closed:
            raise InvalidInputError("only closed paths can be rebased")
        if t0 <= 0.0 or t0 >= 1.0:
            return self
        idx, local = self._locate(np.array([t0]))
        k, u = int(idx[0]), float(local[0])
        segs = list(self.segments)
        if u <= 0.0:
            new = segs[k:] + segs[:k]
        elif u >= 1.0:
            new = segs[k + 1:] + segs[: k + 1]
        else:
            first, second = segs[k].split(u)
            new = [second] + segs[k + 1:] + segs[:k] + [first]
        return Path(new, self.name)

    def then(self, other: "Path") -> "Path":
        return Path(list(self.segments) + list(other.segments), self.name)

    def parameter_of(self, z: complex, grid: int = 20001) -> float:
        """Global parameter of the point on the path closest to z."""
        ts = np.linspace(0.0, 1.0, grid)
        d = np.abs(self.point(ts) - z)
        k = int(np.argmin(d))
        lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, grid - 1)]
        for _ in range(60):
            m1 = lo + (hi - lo) / 3
            m2 = hi - (hi - lo) / 3
            if abs(self.point(m1) - z) < abs(self.point(m2) - z):
                hi = m2
            else:
                lo = m1
        return 0.5 * (lo + hi)

    # -- serialisation -----------------------------------------------------
    def primitives(self):
        """(kinds, params, spans) arrays for compiled evaluation."""
        kinds, params, spans = [], [], []
        for seg in self.segments:
            if isinstance(seg, Samples):
                for ln in seg._lines():
                    k, p = ln.primitive()
                    kinds.append(k)
                    params.append(p)
                    spans.append(ln.span)
            else:
                k, p = seg.primitive()
                kinds.append(k)
                params.append(p)
                spans.append(seg.span)
        return np.array(kinds, dtype=np.int64), np.array(params, dtype=float), np.array(spans, dtype=float)

    def to_json(self) -> dict:
        return {"segments": [s.to_json() for s in self.segments]}

    @classmethod
    def from_json(cls, doc, name: str = "") -> "Path":
        if isinstance(doc, list):
            doc = {"segments": doc}
        segs = doc.get("segments")
        if not segs:
            raise InvalidInputError(f"path {name!r} has no segments")
        path = cls([segment_from_json(s) for s in segs], name)
        if "basepoint" in doc:
            bp = doc["basepoint"]
            z = complex(bp[0], bp[1]) if isinstance(bp, (list, tuple)) else complex(bp)
            path = path.rebased(path.parameter_of(z))
        return path

    def __repr__(self):
        return f"Path({self.name!r}, {len(self.segments)} segments, basepoint={self.basepoint:.6g})"


def circle(center: complex, radius: float, start_angle: float = 0.0, ccw: bool = True, name: str = "") -> Path:
    end = start_angle + (2 * math.pi if ccw else -2 * math.pi)
    return Path([CircleArc(center, radius, start_angle, end)], name)


def polygon(points: Sequence[complex], name: str = "") -> Path:
    pts = [complex(z) for z in points]
    if pts[0] != pts[-1]:
        pts.append(pts[0])
    return Path([Line(a, b) for a, b in zip(pts[:-1], pts[1:])], name)


def constant(z: complex) -> Path:
    return Path([Line(complex(z), complex(z))], "const")

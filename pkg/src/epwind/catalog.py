"""Named loops and reference values for the four-site model.

Loop numbering follows the worked example of the four-site chain: a blue
loop around EP1 and EP2, the pair (1)/(2) that differ by the EP3 pair, and
the pair (3)/(4) used for the slow-encircling runs.
"""
from __future__ import annotations

import math

import numpy as np

from .paths import CircleArc, EllipseArc, Line, Path, circle, polygon

SQ3 = math.sqrt(3.0)
EP1 = 1.0 + 0j
EP2 = complex(math.sqrt(2 * SQ3 - 3), 0.0)
EP3 = complex(0.0, math.sqrt(2 * SQ3 + 3))
PAPER_EPS = (EP1, -EP1, EP2, -EP2, EP3, -EP3)

KAPPA0 = complex(0.4, -0.15)

# semicircle chain
C1, C2, C3 = 0.7, 0.4, 1.0
R1, R2 = 0.45, 0.15

# tilted ellipse
ELL_A = 0.3782
ELL_C = ELL_A - 0.002
ELL_B = math.sqrt(ELL_A ** 2 - ELL_C ** 2)
ELL_TILT = math.atan(0.25)
ELL_CENTER = KAPPA0 + ELL_A * complex(math.cos(ELL_TILT), math.sin(ELL_TILT))


def _kappa0_prime() -> complex:
    """Where the ray from KAPPA0 through EP1 meets the large upper semicircle."""
    d = EP1 - KAPPA0
    p = KAPPA0 - C1
    qa = abs(d) ** 2
    qb = 2 * (p.real * d.real + p.imag * d.imag)
    qc = abs(p) ** 2 - R1 ** 2
    s = (-qb + math.sqrt(qb * qb - 4 * qa * qc)) / (2 * qa)
    return KAPPA0 + s * d


KAPPA0_PRIME = _kappa0_prime()

# M matrices of the four-site model in the branch frame
M1 = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=int)
M2 = np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=int)
M3 = np.array([[0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0], [1, 0, 0, 0]], dtype=int)


def loop4(base: str = "k0") -> Path:
    """One large upper semicircle followed by three small alternating ones."""
    full = Path(
        [
            CircleArc(C1, R1, 0.0, math.pi),
            CircleArc(C2, R2, math.pi, 2 * math.pi),
            # c1 - r2 cos(phi) + i r2 sin(phi) is the angle pi - phi on the circle about c1
            CircleArc(C1, R2, -math.pi, -2 * math.pi),
            CircleArc(C3, R2, math.pi, 2 * math.pi),
        ],
        "loop4",
    )
    if base == "k0":
        return full.rebased(1.5 * math.pi / (4 * math.pi))
    if base == "k0p":
        phi = math.atan2(KAPPA0_PRIME.imag, KAPPA0_PRIME.real - C1)
        return full.rebased(phi / (4 * math.pi))
    if base == "start":
        return full
    raise ValueError(f"unknown basepoint {base!r}")


def _ellipse(start: float) -> EllipseArc:
    return EllipseArc(ELL_CENTER, ELL_A, ELL_B, ELL_TILT, start, start + 2 * math.pi)


def loop3(base: str = "k0") -> Path:
    """Thin tilted ellipse around EP1 with KAPPA0 at the end of its major axis.

    The far vertex falls about 0.015 short of KAPPA0_PRIME; ``base="k0p"``
    joins it to KAPPA0_PRIME with a short straight spur so that the loop is
    based exactly there, while ``base="vertex"`` starts at the vertex itself.
    """
    if base == "k0":
        return Path([_ellipse(math.pi)], "loop3")
    if base == "vertex":
        return Path([_ellipse(0.0)], "loop3")
    if base == "k0p":
        vertex = complex(_ellipse(0.0).point(0.0))
        return Path([Line(KAPPA0_PRIME, vertex), _ellipse(0.0), Line(vertex, KAPPA0_PRIME)], "loop3")
    raise ValueError(f"unknown basepoint {base!r}")


BLUE_CENTER = 0.84 + 0j
BLUE_RADIUS = 0.4


def blue_loop(base: str = "k0") -> Path:
    """Circle around EP1 and EP2 only; from 'k0' it meets the M2 cut first."""
    angle = {"k0": 0.75 * math.pi, "k0p": 1.75 * math.pi}[base]
    return circle(BLUE_CENTER, BLUE_RADIUS, angle, ccw=True, name="blue")


def blue_basepoint(base: str = "k0") -> complex:
    return blue_loop(base).basepoint


def _box_loop(height: float, name: str) -> Path:
    # clockwise box through KAPPA0 around EP1, EP2 and their mirror images
    return polygon(
        [KAPPA0, complex(0.4, -height), complex(-1.6, -height), complex(-1.6, height),
         complex(1.6, height), complex(1.6, -0.15)],
        name,
    )


def loop1() -> Path:
    """Passes between the origin and the EP3 pair."""
    return _box_loop(1.5, "loop1")


def loop2() -> Path:
    """Same shape as loop1 but reaching around EP3 and EP3'."""
    return _box_loop(2.9, "loop2")


def named_paths() -> dict:
    return {
        "blue@k0": blue_loop("k0"),
        "blue@k0p": blue_loop("k0p"),
        "loop1": loop1(),
        "loop2": loop2(),
        "loop3@k0": loop3("k0"),
        "loop3@k0p": loop3("k0p"),
        "loop3@vertex": loop3("vertex"),
        "loop4@k0": loop4("k0"),
        "loop4@k0p": loop4("k0p"),
    }

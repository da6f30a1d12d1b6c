"""Permutations, their matrices, crossing words and loop homotopy invariants.

Conventions (b-frame, branches numbered 1..n):

* a Perm ``pi`` maps an old branch to the branch it is carried onto;
* ``perm_matrix_of(pi)`` is P with P(m, l) = 1 iff l = pi(m), and the
  crossing matrix is M = P^-1 = P^T;
* a crossing word (s_1, ..., s_m) multiplies as M_{s_m} ... M_{s_1};
* the exchange relation of a net matrix N sends state s_m to s_l where
  N(l, m) = 1, so that M1 M2 gives {s1,s2,s3,s4} -> {s3,s1,s4,s2}.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    BasepointMismatchError,
    InvalidInputError,
    RayConstructionError,
    RefinementError,
)


# --------------------------------------------------------------------------
# permutations
# --------------------------------------------------------------------------

class Perm:
    """Bijection of {0..n-1}; printed 1-based in cycle notation."""

    __slots__ = ("images",)

    def __init__(self, images: Iterable[int]):
        img = tuple(int(i) for i in images)
        if sorted(img) != list(range(len(img))):
            raise InvalidInputError(f"not a permutation: {img}")
        self.images = img

    @classmethod
    def identity(cls, n: int) -> "Perm":
        return cls(range(n))

    @classmethod
    def from_cycles(cls, n: int, cycles: Sequence[Sequence[int]]) -> "Perm":
        """Cycles given 1-based, e.g. ``from_cycles(4, [(2, 3)])``."""
        img = list(range(n))
        seen = set()
        for cyc in cycles:
            c = [int(x) - 1 for x in cyc]
            if any(x < 0 or x >= n or x in seen for x in c):
                raise InvalidInputError(f"bad cycle {cyc} for n={n}")
            seen.update(c)
            for a, b in zip(c, c[1:] + c[:1]):
                img[a] = b
        return cls(img)

    @classmethod
    def parse(cls, n: int, text: str) -> "Perm":
        cycles = [tuple(int(x) for x in grp.replace(",", " ").split()) for grp in re.findall(r"\(([^)]*)\)", text)]
        return cls.from_cycles(n, [c for c in cycles if c])

    @property
    def n(self) -> int:
        return len(self.images)

    def __call__(self, i: int) -> int:
        return self.images[i]

    def __mul__(self, other: "Perm") -> "Perm":
        """Composition: (self * other)(i) = self(other(i))."""
        if self.n != other.n:
            raise InvalidInputError("size mismatch")
        return Perm(self.images[j] for j in other.images)

    def inverse(self) -> "Perm":
        inv = [0] * self.n
        for i, j in enumerate(self.images):
            inv[j] = i
        return Perm(inv)

    def __pow__(self, k: int) -> "Perm":
        out = Perm.identity(self.n)
        base = self if k >= 0 else self.inverse()
        for _ in range(abs(k)):
            out = base * out
        return out

    def is_identity(self) -> bool:
        return all(i == j for i, j in enumerate(self.images))

    def cycles(self, include_fixed: bool = False) -> list:
        """1-based cycles, each starting at its smallest element."""
        seen, out = set(), []
        for start in range(self.n):
            if start in seen:
                continue
            cyc, i = [], start
            while i not in seen:
                seen.add(i)
                cyc.append(i + 1)
                i = self.images[i]
            if len(cyc) > 1 or include_fixed:
                out.append(tuple(cyc))
        return out

    def order(self) -> int:
        return math.lcm(*[len(c) for c in self.cycles(True)])

    def __eq__(self, other):
        return isinstance(other, Perm) and self.images == other.images

    def __hash__(self):
        return hash(self.images)

    def __str__(self):
        cyc = self.cycles()
        return "".join("(" + " ".join(map(str, c)) + ")" for c in cyc) if cyc else "()"

    def __repr__(self):
        return f"Perm({str(self)}, n={self.n})"


def perm_matrix_of(pi: Perm) -> np.ndarray:
    """P with P[m, l] = 1 iff l = pi(m)."""
    p = np.zeros((pi.n, pi.n), dtype=int)
    p[np.arange(pi.n), list(pi.images)] = 1
    return p


def m_matrix_of(pi: Perm) -> np.ndarray:
    """Crossing matrix M = P^-1 = P^T."""
    return perm_matrix_of(pi).T.copy()


def perm_of_m_matrix(m) -> Perm:
    m = _check_perm_matrix(m)
    # M[l, m] = 1 iff l = pi(m)
    return Perm(int(np.argmax(m[:, j])) for j in range(m.shape[0]))


def _check_perm_matrix(m) -> np.ndarray:
    a = np.asarray(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError("permutation matrix must be square")
    ai = np.rint(a.real if np.iscomplexobj(a) else a).astype(int)
    if not (np.all((ai == 0) | (ai == 1)) and np.all(ai.sum(0) == 1) and np.all(ai.sum(1) == 1)):
        raise InvalidInputError("not a permutation matrix")
    return ai


def commutator(a, b) -> np.ndarray:
    a, b = np.asarray(a), np.asarray(b)
    return a @ b - b @ a


# --------------------------------------------------------------------------
# words
# --------------------------------------------------------------------------

Letter = tuple  # (generator id, sign)


@dataclass(frozen=True)
class Word:
    letters: tuple = ()
    prefix: str = "g"

    def __post_init__(self):
        for g, s in self.letters:
            if s not in (1, -1):
                raise InvalidInputError(f"letter sign must be +1 or -1, got {s}")

    def __len__(self):
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def inverse(self) -> "Word":
        return Word(tuple((g, -s) for g, s in reversed(self.letters)), self.prefix)

    def __add__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters, self.prefix)

    def __str__(self):
        return " ".join(f"{self.prefix}{g}" + ("" if s == 1 else "^-1") for g, s in self.letters)

    @classmethod
    def parse(cls, text: str, prefix: str = "g") -> "Word":
        letters = []
        for tok in text.split():
            m = re.fullmatch(re.escape(prefix) + r"(\d+)(\^(-?1))?", tok)
            if not m:
                raise InvalidInputError(f"bad word letter {tok!r}")
            letters.append((int(m.group(1)), int(m.group(3) or 1)))
        return cls(tuple(letters), prefix)


def reduce_word(w: Word) -> Word:
    """Free reduction with a stack; the result is the free-group normal form."""
    stack = []
    for g, s in w.letters:
        if stack and stack[-1][0] == g and stack[-1][1] == -s:
            stack.pop()
        else:
            stack.append((g, s))
    return Word(tuple(stack), w.prefix)


def cyclically_reduce(w: Word) -> Word:
    letters = list(reduce_word(w).letters)
    while len(letters) >= 2 and letters[0][0] == letters[-1][0] and letters[0][1] == -letters[-1][1]:
        letters = letters[1:-1]
    return Word(tuple(letters), w.prefix)


def conjugate_words(w1: Word, w2: Word) -> bool:
    """Free-group conjugacy: cyclic reductions agree up to rotation."""
    a = cyclically_reduce(w1).letters
    b = cyclically_reduce(w2).letters
    if len(a) != len(b):
        return False
    if not a:
        return True
    return any(b == a[k:] + a[:k] for k in range(len(a)))


def ordered_product(word, assign: Mapping) -> np.ndarray:
    """M_{s_m} ... M_{s_1} for the word s_1 .. s_m; a -1 sign uses the inverse."""
    letters = word.letters if isinstance(word, Word) else tuple(word)
    if not assign and not letters:
        raise InvalidInputError("empty word needs a dimension; pass at least one generator")
    n = next(iter(assign.values())).shape[0]
    out = np.eye(n, dtype=int)
    for g, s in letters:
        if g not in assign:
            raise InvalidInputError(f"generator {g} has no matrix")
        m = np.asarray(assign[g])
        out = (m if s == 1 else m.T) @ out
    return out


# --------------------------------------------------------------------------
# exchange relations
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExchangeRelation:
    mapping: tuple  # 1-based: state s_i ends as s_{mapping[i-1]}

    def __str__(self):
        return ", ".join(f"s{i + 1}->s{j}" for i, j in enumerate(self.mapping))

    def images_of_list(self) -> str:
        """Bracketed right-hand side {s_e(1), ..., s_e(n)}."""
        return "{" + ",".join(f"s{j}" for j in self.mapping) + "}"

    def __getitem__(self, state: int) -> int:
        return self.mapping[state - 1]


def exchange_relation(net) -> ExchangeRelation:
    n = _check_perm_matrix(net)
    return ExchangeRelation(tuple(int(np.argmax(n[:, m])) + 1 for m in range(n.shape[0])))


def power_exchange(net, k: int) -> ExchangeRelation:
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    n = _check_perm_matrix(net)
    return exchange_relation(np.linalg.matrix_power(n, k))


# --------------------------------------------------------------------------
# winding numbers and homotopy words
# --------------------------------------------------------------------------

def _loc(ep) -> complex:
    return complex(getattr(ep, "location", ep))


def _dense(path, per_unit: float) -> np.ndarray:
    return path.polyline(per_unit=per_unit, min_per_segment=64)


def winding_numbers(path, eps, per_unit: float = 400.0, max_doublings: int = 8) -> list:
    """Signed winding number of a closed path about each EP."""
    if not path.is_closed:
        raise InvalidInputError("winding numbers need a closed path")
    locs = [_loc(e) for e in eps]
    if not locs:
        return []
    for _ in range(max_doublings):
        z = _dense(path, per_unit)
        rel = z[:, None] - np.array(locs)[None, :]
        if np.any(np.abs(rel) == 0):
            raise InvalidInputError("path passes through an exceptional point")
        darg = np.angle(rel[1:] / rel[:-1])
        if np.max(np.abs(darg)) < math.pi / 4:
            return [int(round(x)) for x in darg.sum(axis=0) / (2 * math.pi)]
        per_unit *= 2
    raise RefinementError("argument increments stay too large; the path is too close to an EP",
                          interval=(0.0, 1.0))


@dataclass(frozen=True)
class Ray:
    origin: complex
    direction: complex  # unit vector

    def hits(self, a: complex, b: complex):
        """Parameter u in [0, 1) where segment a->b crosses the ray, and the sign, or None."""
        d = self.direction
        # solve a + u (b - a) = origin + s d, s >= 0
        ab = b - a
        den = (np.conj(d) * ab).imag
        if den == 0:
            return None
        u = (np.conj(d) * (self.origin - a)).imag / den
        if not (0.0 <= u < 1.0):
            return None
        s = (np.conj(d) * (a + u * ab - self.origin)).real
        if s < 0:
            return None
        return u, (1 if den > 0 else -1)


def _segments_cross(p: Ray, q: Ray, reach: float) -> bool:
    """Whether two rays (cut at length ``reach``) meet or pass too close."""
    a0, a1 = p.origin, p.origin + reach * p.direction
    b0, b1 = q.origin, q.origin + reach * q.direction

    def orient(x, y, z):
        return (np.conj(y - x) * (z - x)).imag

    def dist_point_seg(z, s0, s1):
        v = s1 - s0
        t = min(1.0, max(0.0, ((z - s0) * np.conj(v)).real / abs(v) ** 2))
        return abs(s0 + t * v - z)

    o1, o2 = orient(a0, a1, b0), orient(a0, a1, b1)
    o3, o4 = orient(b0, b1, a0), orient(b0, b1, a1)
    if (o1 * o2 < 0) and (o3 * o4 < 0):
        return True
    tol = 1e-6 * reach
    return min(dist_point_seg(b0, a0, a1), dist_point_seg(b1, a0, a1),
               dist_point_seg(a0, b0, b1), dist_point_seg(a1, b0, b1)) < tol


def default_rays(eps, delta: float = 0.1, max_tries: int = 64) -> list:
    """Pairwise disjoint rays, one per EP, pointing away from the EP centroid.

    EPs are handled in the given order; each ray is turned by +delta, -delta,
    +2 delta, ... until it misses every ray already placed and every other EP.
    """
    locs = [_loc(e) for e in eps]
    if not locs:
        return []
    centre = complex(np.mean(locs))
    span = max([abs(z - centre) for z in locs] + [1.0])
    reach = 1e3 * span  # long enough to act as a half-line for any path we trace
    rays = []
    for k, z in enumerate(locs):
        base = math.atan2((z - centre).imag, (z - centre).real) if abs(z - centre) > 1e-12 else 0.0
        for t in range(max_tries):
            step = (t + 1) // 2 * (1 if t % 2 else -1) if t else 0
            ang = base + step * delta
            r = Ray(z, complex(math.cos(ang), math.sin(ang)))
            if any(_segments_cross(r, q, reach) for q in rays):
                continue
            if any(j != k and _point_near_ray(w, r, 1e-9 * span) for j, w in enumerate(locs)):
                continue
            rays.append(r)
            break
        else:
            raise RayConstructionError(f"no disjoint ray for EP at {z:.6g} after {max_tries} tries")
    return rays


def _point_near_ray(w: complex, r: Ray, tol: float) -> bool:
    s = (np.conj(r.direction) * (w - r.origin)).real
    if s < 0:
        return abs(w - r.origin) < tol
    return abs((np.conj(r.direction) * (w - r.origin)).imag) < tol


def homotopy_word(path, eps, rays=None, per_unit: float = 400.0) -> Word:
    """Signed sequence of ray crossings; generator k is the k-th EP (1-based).

    A counterclockwise turn around EP k reads g_k.
    """
    if not path.is_closed:
        raise InvalidInputError("homotopy words need a closed path")
    locs = [_loc(e) for e in eps]
    if rays is None:
        rays = default_rays(locs)
    z = _dense(path, per_unit)
    for zk in z:
        if any(abs(zk - w) == 0 for w in locs):
            raise InvalidInputError("path passes through an exceptional point")
    hits = []
    for k, ray in enumerate(rays):
        a, b = z[:-1], z[1:]
        d = ray.direction
        ab = b - a
        den = (np.conj(d) * ab).imag
        with np.errstate(divide="ignore", invalid="ignore"):
            u = (np.conj(d) * (ray.origin - a)).imag / den
            s = (np.conj(d) * (a + u * ab - ray.origin)).real
        ok = (den != 0) & (u >= 0) & (u < 1) & (s >= 0)
        for i in np.nonzero(ok)[0]:
            hits.append((i + float(u[i]), k + 1, 1 if den[i] > 0 else -1))
    hits.sort()
    return Word(tuple((g, s) for _, g, s in hits))


def _net(f, path, atlas, key):
    from .tracker import trace_path

    tr = trace_path(f, path, key or atlas.key, atlas)
    return tr.net_matrix(), tr


def based_equivalent(f, p1, p2, atlas, key=None, rays=None) -> str:
    """'homotopic', 'accidental' or 'inequivalent' for two loops with one basepoint."""
    if not (p1.is_closed and p2.is_closed):
        raise InvalidInputError("both loops must be closed")
    if abs(p1.basepoint - p2.basepoint) > 1e-9:
        raise BasepointMismatchError(f"basepoints differ: {p1.basepoint:.6g} vs {p2.basepoint:.6g}")
    if rays is None:
        rays = default_rays(atlas.eps)
    w1 = reduce_word(homotopy_word(p1, atlas.eps, rays))
    w2 = reduce_word(homotopy_word(p2, atlas.eps, rays))
    n1, _ = _net(f, p1, atlas, key)
    n2, _ = _net(f, p2, atlas, key)
    same = bool(np.array_equal(n1, n2))
    if w1 == w2:
        assert same, "homotopic loops with different net permutations"
        return "homotopic"
    return "accidental" if same else "inequivalent"


def freely_conjugate(p1, p2, atlas, rays=None) -> bool:
    if rays is None:
        rays = default_rays(atlas.eps)
    return conjugate_words(homotopy_word(p1, atlas.eps, rays), homotopy_word(p2, atlas.eps, rays))

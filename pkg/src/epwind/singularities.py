"""Exceptional points and the branch-cut atlas of a matrix family."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .braidgroup import Perm, m_matrix_of
from .branches import ReAsc, SortKey, min_gap_batch, sort_values
from .errors import (
    AmbiguityError,
    AtlasInconsistencyError,
    ClassificationError,
    InvalidInputError,
    ProbeError,
    RefinementError,
)
from .matrix_core import char_poly_coeffs, eigvals_batch
from .model_dsl import MatrixFamily, eval_family
from .paths import circle
from .tracker import DEFAULT_OPTIONS, TrackOptions, assign_batch, crossing_permutation, path_perm

EP_TOL = 1e-12
DEDUP_TOL = 1e-6
R_CLS_CAP = 0.05
CLS_START_ANGLE = 0.9  # keeps classification circles off axis-aligned cuts


@dataclass(frozen=True)
class Region:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise InvalidInputError(f"empty region {self}")

    @classmethod
    def parse(cls, spec) -> "Region":
        if isinstance(spec, Region):
            return spec
        if isinstance(spec, str):
            spec = [float(x) for x in spec.replace(",", " ").split()]
        if isinstance(spec, dict):
            spec = [spec["xmin"], spec["xmax"], spec["ymin"], spec["ymax"]]
        if len(spec) != 4:
            raise InvalidInputError("region needs xmin xmax ymin ymax")
        return cls(*map(float, spec))

    def contains(self, z: complex, pad: float = 0.0) -> bool:
        return (self.xmin - pad <= z.real <= self.xmax + pad) and (self.ymin - pad <= z.imag <= self.ymax + pad)

    def boundary_distance(self, z: complex) -> float:
        return min(z.real - self.xmin, self.xmax - z.real, z.imag - self.ymin, self.ymax - z.imag)

    def axes(self, grid_n: int):
        return np.linspace(self.xmin, self.xmax, grid_n), np.linspace(self.ymin, self.ymax, grid_n)

    def to_json(self):
        return [self.xmin, self.xmax, self.ymin, self.ymax]


# --------------------------------------------------------------------------
# discriminant
# --------------------------------------------------------------------------

def sylvester_discriminant(coeffs) -> np.ndarray:
    """Discriminant from ascending coefficients (..., n+1) via the Sylvester resultant of p and p'."""
    c = np.asarray(coeffs, dtype=complex)
    n = c.shape[-1] - 1
    if n < 1:
        raise InvalidInputError("degree must be at least 1")
    if n == 1:
        return np.ones(c.shape[:-1], dtype=complex)
    lead = c[..., -1]
    desc = c[..., ::-1]
    dp = (c[..., 1:] * np.arange(1, n + 1))[..., ::-1]
    size = 2 * n - 1
    syl = np.zeros(c.shape[:-1] + (size, size), dtype=complex)
    for r in range(n - 1):
        syl[..., r, r:r + n + 1] = desc
    for r in range(n):
        syl[..., n - 1 + r, r:r + n] = dp
    res = np.linalg.det(syl)
    return (-1) ** (n * (n - 1) // 2) * res / lead


def discriminant_at(f: MatrixFamily, kappa) -> np.ndarray | complex:
    out = sylvester_discriminant(char_poly_coeffs(eval_family(f, kappa)))
    return complex(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# exceptional points
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExceptionalPoint:
    location: complex
    order: int
    cycle: Perm
    residual: float
    radius: float = 0.0

    def to_json(self) -> dict:
        return {
            "re": self.location.real,
            "im": self.location.imag,
            "order": self.order,
            "cycle": str(self.cycle),
            "residual": self.residual,
        }


class EPList(list):
    """List of ExceptionalPoint plus the warnings gathered while finding them."""

    def __init__(self, items=(), warnings=()):
        super().__init__(items)
        self.warnings = list(warnings)


def _newton_disc(f, z0: complex, max_iter: int = 200):
    z = complex(z0)
    d = discriminant_at(f, z)
    for _ in range(max_iter):
        h = 1e-6 * max(1.0, abs(z))
        dd = (discriminant_at(f, z + h) - discriminant_at(f, z - h)) / (2 * h)
        if dd == 0:
            break
        step = d / dd
        z_new = z - step
        d_new = discriminant_at(f, z_new)
        # damp if the residual grows
        lam = 1.0
        while abs(d_new) > abs(d) and lam > 1e-4:
            lam *= 0.5
            z_new = z - lam * step
            d_new = discriminant_at(f, z_new)
        if abs(d_new) > abs(d):
            break
        z, d = z_new, d_new
        if abs(lam * step) <= 1e-15 * max(1.0, abs(z)) or d == 0:
            break
    return z, abs(d)


def _poly_and_derivs(coeffs: np.ndarray, lam: complex):
    """p, p', p'' at lam for ascending coefficients."""
    p = dp = d2p = 0j
    for c in coeffs[::-1]:
        d2p = d2p * lam + 2 * dp
        dp = dp * lam + p
        p = p * lam + c
    return p, dp, d2p


def _polish(f, z: complex, iters: int = 40):
    """Newton on p(kappa, lam) = dp/dlam(kappa, lam) = 0 near a double eigenvalue."""
    vals = eigvals_batch(eval_family(f, z))
    n = vals.size
    d = np.abs(vals[:, None] - vals[None, :]) + np.diag(np.full(n, np.inf))
    i, j = np.unravel_index(np.argmin(d), d.shape)
    lam = 0.5 * (vals[i] + vals[j])
    zk = z
    for _ in range(iters):
        c = char_poly_coeffs(eval_family(f, zk))
        h = 1e-6 * max(1.0, abs(zk))
        cdz = (char_poly_coeffs(eval_family(f, zk + h)) - char_poly_coeffs(eval_family(f, zk - h))) / (2 * h)
        p, p1, p2 = _poly_and_derivs(c, lam)
        pk, pk1, _ = _poly_and_derivs(cdz, lam)
        jac = np.array([[pk, p1], [pk1, p2]])
        if abs(np.linalg.det(jac)) < 1e-14:
            return None
        dz, dl = np.linalg.solve(jac, -np.array([p, p1]))
        zk += dz
        lam += dl
        if abs(zk - z) > 1e-3:
            return None
        if abs(dz) <= 1e-16 * max(1.0, abs(zk)):
            break
    return zk


def classify_ep(f: MatrixFamily, ep: complex, key: SortKey = ReAsc, others: Sequence[complex] = (),
                radius: Optional[float] = None, opts: TrackOptions = DEFAULT_OPTIONS) -> ExceptionalPoint:
    """Order and branch cycle of ``ep`` from a small encircling loop."""
    z = complex(ep)
    if radius is None:
        dists = [abs(z - complex(o)) for o in others if abs(z - complex(o)) > DEDUP_TOL]
        radius = min(R_CLS_CAP, 0.5 * min(dists)) if dists else R_CLS_CAP
    loop = circle(z, radius, CLS_START_ANGLE, ccw=True, name="classify")
    try:
        perm = path_perm(f, loop, key, opts)
    except (RefinementError, AmbiguityError) as exc:
        raise ClassificationError(f"classification loop around {z:.6g} failed: {exc}") from exc
    order = max((len(c) for c in perm.cycles(True)), default=1)
    return ExceptionalPoint(z, order, perm, float(abs(discriminant_at(f, z))), radius)


def find_eps(f: MatrixFamily, region, grid_n: int = 200, key: SortKey = ReAsc,
             opts: TrackOptions = DEFAULT_OPTIONS) -> EPList:
    """Exceptional points inside ``region``.

    Seeds are grid local minima of |discriminant|; each is refined by Newton
    on the discriminant and then on the (kappa, lambda) double-root system.
    Zeros whose classification loop gives the identity (diabolic points) are
    dropped.
    """
    region = Region.parse(region)
    if grid_n < 16:
        raise InvalidInputError("grid_n must be at least 16")
    xs, ys = region.axes(grid_n)
    kap = xs[None, :] + 1j * ys[:, None]
    mag = np.abs(discriminant_at(f, kap))
    pad = np.pad(mag, 1, constant_values=np.inf)
    is_min = np.ones_like(mag, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_min &= mag <= pad[1 + di:1 + di + grid_n, 1 + dj:1 + dj + grid_n]
    seeds = kap[is_min]
    h = max(xs[1] - xs[0], ys[1] - ys[0])
    warnings, found = [], []
    for s in seeds:
        z, res = _newton_disc(f, s)
        if not np.isfinite(z) or abs(z - s) > 10 * h:
            warnings.append(f"seed {s:.6g}: Newton left the seed neighbourhood")
            continue
        zp = _polish(f, z)
        if zp is not None and abs(discriminant_at(f, zp)) <= max(res, EP_TOL):
            z = zp
        res = abs(discriminant_at(f, z))
        if res > EP_TOL:
            warnings.append(f"seed {s:.6g}: converged only to |disc|={res:.2e} at {z:.10g}")
            continue
        if not region.contains(z):
            continue
        if any(abs(z - o) <= DEDUP_TOL for o in found):
            continue
        found.append(z)
    found.sort(key=lambda z: (round(z.real, 9), round(z.imag, 9)))
    out = EPList(warnings=warnings)
    for z in found:
        ep = classify_ep(f, z, key, found, opts=opts)
        if ep.cycle.is_identity():
            out.warnings.append(f"{z:.10g}: degeneracy without branch exchange (diabolic), dropped")
            continue
        out.append(ep)
    return out


# --------------------------------------------------------------------------
# branch-cut atlas
# --------------------------------------------------------------------------

@dataclass
class BranchCut:
    cut_id: int
    points: np.ndarray  # ordered along the cut
    normals: np.ndarray  # unit normals; perm describes crossing along them
    perm: Perm

    @property
    def matrix(self) -> np.ndarray:
        return m_matrix_of(self.perm)

    def to_json(self) -> dict:
        return {
            "id": self.cut_id,
            "perm": str(self.perm),
            "matrix": self.matrix.tolist(),
            "points": [[float(z.real), float(z.imag)] for z in self.points],
        }


@dataclass
class Atlas:
    region: Region
    eps: list
    cuts: list
    key: SortKey
    grid_n: int
    match_radius: float
    junctions: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.cuts[0].perm.n if self.cuts else 0

    def assign(self) -> dict:
        """cut id -> crossing matrix M_k."""
        return {c.cut_id: c.matrix for c in self.cuts}

    def _distances(self, z: complex):
        out = []
        for c in self.cuts:
            p = c.points
            if p.size == 1:
                d = abs(z - p[0])
                out.append((d, c, 0))
                continue
            a, b = p[:-1], p[1:]
            ab = b - a
            u = np.clip(((z - a) * ab.conj()).real / np.maximum(np.abs(ab) ** 2, 1e-300), 0.0, 1.0)
            d = np.abs(a + u * ab - z)
            k = int(np.argmin(d))
            out.append((float(d[k]), c, k if u[k] < 0.5 else k + 1))
        out.sort(key=lambda x: x[0])
        return out

    def match(self, z: complex, velocity: complex, perm: Optional[Perm] = None):
        """(cut_id, sign) of the cut crossed at z moving along ``velocity``; (None, 0) if none fits."""
        for d, cut, k in self._distances(complex(z)):
            if d > self.match_radius:
                break
            sign = 1 if (np.conj(cut.normals[k]) * velocity).real >= 0 else -1
            expected = cut.perm if sign == 1 else cut.perm.inverse()
            if perm is None or perm == expected:
                return cut.cut_id, sign
        return None, 0

    def to_json(self) -> dict:
        return {
            "region": self.region.to_json(),
            "key": self.key.name,
            "grid_n": self.grid_n,
            "eps": [e.to_json() for e in self.eps],
            "cuts": [c.to_json() for c in self.cuts],
        }

    @classmethod
    def from_json(cls, doc) -> "Atlas":
        n = None
        cuts = []
        for c in doc["cuts"]:
            pts = np.array([complex(x, y) for x, y in c["points"]])
            n = n or len(c["matrix"])
            cuts.append(BranchCut(int(c["id"]), pts, _chain_normals(pts), Perm.parse(n, c["perm"])))
        eps = [
            ExceptionalPoint(complex(e["re"], e["im"]), int(e["order"]), Perm.parse(n or 1, e["cycle"]),
                             float(e.get("residual", 0.0)))
            for e in doc["eps"]
        ]
        region = Region.parse(doc["region"])
        grid_n = int(doc.get("grid_n", 200))
        h = max((region.xmax - region.xmin), (region.ymax - region.ymin)) / (grid_n - 1)
        return cls(region, eps, cuts, SortKey.parse(doc.get("key", "re_asc")), grid_n, max(1e-2, 1.5 * h))


def _edge_scan(f, region: Region, grid_n: int, key: SortKey, eps, exclusion: float):
    """Refined crossing points of grid edges: (points, perms, edge directions)."""
    xs, ys = region.axes(grid_n)
    kap = xs[None, :] + 1j * ys[:, None]
    vals = eigvals_batch(eval_family(f, kap))  # (ny, nx, n)
    n = vals.shape[-1]
    a_idx, b_idx = [], []
    ny, nx = kap.shape
    # scan order: rows bottom to top, horizontal edges then vertical edges of that row
    for i in range(ny):
        for j in range(nx - 1):
            a_idx.append((i, j))
            b_idx.append((i, j + 1))
        if i + 1 < ny:
            for j in range(nx):
                a_idx.append((i, j))
                b_idx.append((i + 1, j))
    a_idx = np.array(a_idx)
    b_idx = np.array(b_idx)
    za = kap[a_idx[:, 0], a_idx[:, 1]]
    zb = kap[b_idx[:, 0], b_idx[:, 1]]
    va = vals[a_idx[:, 0], a_idx[:, 1]]
    vb = vals[b_idx[:, 0], b_idx[:, 1]]
    keep = np.ones(za.size, dtype=bool)
    for ep in eps:
        loc = complex(getattr(ep, "location", ep))
        keep &= (np.abs(za - loc) > exclusion) & (np.abs(zb - loc) > exclusion)
    za, zb, va, vb = za[keep], zb[keep], va[keep], vb[keep]

    def changed(v0, v1):
        p, best, second = assign_batch(v0, v1)
        r0 = np.argsort(sort_values(v0, key), axis=1)
        r1 = np.argsort(sort_values(v1, key), axis=1)
        b1 = np.take_along_axis(r1, p, axis=1)
        disp = np.max(np.abs(np.take_along_axis(v1, p, axis=1) - v0), axis=1)
        ok = disp < 0.5 * np.minimum(min_gap_batch(v0), min_gap_batch(v1))
        return np.any(r0 != b1, axis=1), ok, r0, b1

    hit, ok, _, _ = changed(va, vb)
    # edges too close to a degeneracy for a one-step match are left out
    sel = hit & ok
    za, zb, va, vb = za[sel], zb[sel], va[sel], vb[sel]
    lo, hi = za.copy(), zb.copy()
    vlo, vhi = va.copy(), vb.copy()
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        vm = eigvals_batch(eval_family(f, mid))
        left, _, _, _ = changed(vlo, vm)
        hi = np.where(left, mid, hi)
        vhi = np.where(left[:, None], vm, vhi)
        lo = np.where(left, lo, mid)
        vlo = np.where(left[:, None], vlo, vm)
    # the permutation comes from the whole edge: a midpoint exactly on a
    # cut would otherwise split one crossing in two
    _, _, r0, b1 = changed(va, vb)
    perms = []
    for k in range(lo.size):
        img = [0] * n
        for j in range(n):
            img[r0[k, j]] = b1[k, j]
        perms.append(Perm(img))
    pts = 0.5 * (lo + hi)
    return pts, perms, (zb - za) / np.abs(zb - za)


def _chain_order(pts: np.ndarray) -> np.ndarray:
    """Greedy nearest-neighbour ordering starting from an end of the principal axis."""
    if pts.size <= 2:
        return np.argsort(pts.real + 1e-9 * pts.imag)
    c = pts - pts.mean()
    cov = np.cov(np.vstack([c.real, c.imag]))
    w, v = np.linalg.eigh(cov)
    axis = complex(v[0, -1], v[1, -1])
    if axis.real < -1e-12 or (abs(axis.real) <= 1e-12 and axis.imag < 0):
        axis = -axis
    proj = (c * np.conj(axis)).real
    start = int(np.argmin(proj))
    left = set(range(pts.size))
    order = [start]
    left.remove(start)
    while left:
        cur = pts[order[-1]]
        rest = np.fromiter(left, dtype=int)
        nxt = int(rest[np.argmin(np.abs(pts[rest] - cur))])
        order.append(nxt)
        left.remove(nxt)
    return np.array(order)


def _chain_normals(pts: np.ndarray) -> np.ndarray:
    if pts.size < 2:
        return np.ones(pts.size, dtype=complex)
    tan = np.gradient(pts)
    tan = tan / np.where(np.abs(tan) > 0, np.abs(tan), 1.0)
    return 1j * tan


def _split_junctions(idx: np.ndarray, pts: np.ndarray, h: float, linked):
    """Split a cluster at points where several arms meet; returns (groups, junction centres)."""
    if idx.size < 8:
        return [idx], []
    P = pts[idx]
    tree = cKDTree(np.c_[P.real, P.imag])
    R = 3.0 * h
    iso = np.zeros(idx.size, dtype=bool)
    for k, nb in enumerate(tree.query_ball_point(np.c_[P.real, P.imag], R)):
        if len(nb) < 5:
            continue
        q = P[nb] - P[nb].mean()
        ev = np.linalg.eigvalsh(np.cov(np.vstack([q.real, q.imag])))
        iso[k] = ev[0] > 0.2 * ev[1]
    if not np.any(iso):
        return [idx], []
    # junction centres: connected groups of isotropic points
    cand = np.nonzero(iso)[0]
    ctree = cKDTree(np.c_[P[cand].real, P[cand].imag])
    pairs = ctree.query_pairs(2 * R, output_type="ndarray")
    g = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])) if len(pairs) else ([], ([], [])),
                   shape=(cand.size, cand.size))
    nj, lab = connected_components(g, directed=False)
    centres = [complex(P[cand[lab == c]].mean()) for c in range(nj)]
    core = np.zeros(idx.size, dtype=bool)
    for z in centres:
        core |= np.abs(P - z) <= 4.0 * h
    rest = np.nonzero(~core)[0]
    arms = _components(rest, P, h, None)
    if len(arms) < 3:
        return [idx], []
    # arm direction as seen from its nearest centre
    info = []
    for arm in arms:
        zc = min(centres, key=lambda z: np.min(np.abs(P[arm] - z)))
        near = arm[np.argsort(np.abs(P[arm] - zc))[:8]]
        d = complex(np.mean(P[near] - zc))
        info.append((zc, d / abs(d) if d else 1.0))
    used = set()
    groups = []
    for a in range(len(arms)):
        if a in used:
            continue
        best, score = None, -0.9
        for b in range(a + 1, len(arms)):
            if b in used or abs(info[a][0] - info[b][0]) > 1e-9:
                continue
            s = -(np.conj(info[a][1]) * info[b][1]).real
            if s > score:
                best, score = b, s
        if best is None:
            groups.append([a])
            used.add(a)
        else:
            groups.append([a, best])
            used.update((a, best))
    members = [list(np.concatenate([arms[a] for a in grp])) for grp in groups]
    for k in np.nonzero(core)[0]:
        z = P[k]
        dists = []
        for grp in groups:
            zc, d = info[grp[0]]
            off = z - zc
            dists.append(abs((off * np.conj(d)).imag))
        members[int(np.argmin(dists))].append(k)
    return [idx[np.array(sorted(m))] for m in members], centres


def _components(sub: np.ndarray, pts: np.ndarray, h: float, perms) -> list:
    if sub.size == 0:
        return []
    P = pts[sub]
    tree = cKDTree(np.c_[P.real, P.imag])
    pairs = tree.query_pairs(2.0 * h * (1 + 1e-9), output_type="ndarray")
    if perms is not None and len(pairs):
        good = [perms[sub[a]] == perms[sub[b]] or perms[sub[a]] == perms[sub[b]].inverse() for a, b in pairs]
        pairs = pairs[np.array(good, dtype=bool)]
    g = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])) if len(pairs) else ([], ([], [])),
                   shape=(sub.size, sub.size))
    nc, lab = connected_components(g, directed=False)
    # label order follows the first member, so scan order is preserved
    firsts = sorted(range(nc), key=lambda c: int(np.nonzero(lab == c)[0][0]))
    return [sub[lab == c] for c in firsts]


def map_cuts(f: MatrixFamily, region, grid_n: int = 200, key: SortKey = ReAsc, eps=None,
             opts: TrackOptions = DEFAULT_OPTIONS) -> Atlas:
    """Scan grid edges for branch-order changes and assemble the cut atlas."""
    region = Region.parse(region)
    if eps is None:
        eps = find_eps(f, region, grid_n, key, opts)
    xs, ys = region.axes(grid_n)
    h = max(xs[1] - xs[0], ys[1] - ys[0])
    exclusion = 3.0 * h
    pts, perms, dirs = _edge_scan(f, region, grid_n, key, eps, exclusion)
    clusters = _components(np.arange(pts.size), pts, h, perms)
    pieces, junctions = [], []
    for cl in clusters:
        parts, centres = _split_junctions(cl, pts, h, None)
        pieces.extend(parts)
        junctions.extend(centres)
    pieces.sort(key=lambda g: int(g.min()))
    ep_locs = [complex(e.location) for e in eps]
    avoid = ep_locs + junctions
    cuts = []
    for cid, grp in enumerate(pieces, start=1):
        order = grp[_chain_order(pts[grp])]
        P = pts[order]
        normals = _chain_normals(P)
        if avoid:
            clearance = np.min(np.abs(P[:, None] - np.array(avoid)[None, :]), axis=1)
        else:
            clearance = np.full(P.size, np.inf)
        probe_at = [int(np.argmax(clearance))]
        if P.size >= 8:
            for q in (0.25, 0.75):
                k = int(q * (P.size - 1))
                if clearance[k] > 2 * h and k not in probe_at:
                    probe_at.append(k)
        found = []
        for k in probe_at:
            step = min(1e-3, 0.25 * clearance[k]) if np.isfinite(clearance[k]) else 1e-3
            try:
                found.append(crossing_permutation(f, P[k], normals[k], key, h0=step, opts=opts))
            except ProbeError as exc:
                raise AtlasInconsistencyError(f"cut {cid}: {exc}") from exc
        if any(p != found[0] for p in found[1:]):
            raise AtlasInconsistencyError(
                f"cut {cid} carries different permutations at different probes: {', '.join(map(str, found))}"
            )
        perm = found[0]
        if perm.is_identity():
            continue
        # every edge hit must agree with the probe once the edge direction is accounted for
        for k_hit in order:
            if any(abs(pts[k_hit] - z) <= 4.0 * h for z in junctions):
                continue
            k_loc = int(np.argmin(np.abs(P - pts[k_hit])))
            along = (np.conj(normals[k_loc]) * dirs[k_hit]).real >= 0
            expect = perm if along else perm.inverse()
            if perms[k_hit] != expect:
                raise AtlasInconsistencyError(
                    f"cut {cid}: edge crossing at {pts[k_hit]:.6g} shows {perms[k_hit]}, probe gave {expect}"
                )
        cuts.append(BranchCut(len(cuts) + 1, P, normals, perm))
    return Atlas(region, list(eps), cuts, key, grid_n, max(1e-2, 1.5 * h), junctions)

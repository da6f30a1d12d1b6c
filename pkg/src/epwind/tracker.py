"""Eigenvalue continuation along paths and branch-cut crossing detection."""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .braidgroup import Perm, Word, exchange_relation, m_matrix_of
from .branches import ReAsc, SortKey, min_gap_batch, sort_values
from .errors import AmbiguityError, InvalidInputError, ProbeError, RefinementError
from .matrix_core import eigvals_batch
from .model_dsl import MatrixFamily, eval_family
from .paths import Line, Path


@dataclass(frozen=True)
class TrackOptions:
    initial_step: float = 0.02  # kappa distance between first-pass samples
    gap_fraction: float = 0.5
    max_samples: int = 1_000_000
    cross_resolution: float = 1e-9  # crossings are bisected to this kappa distance
    gap_floor: float = 1e-6  # smaller spectral gaps mean the path runs into a degeneracy
    ep_clearance: float = 1e-3
    ambiguity_tol: float = 1e-12
    min_dt: float = 1e-15


DEFAULT_OPTIONS = TrackOptions()


def spectra(f: MatrixFamily, kappas) -> np.ndarray:
    """Raw eigenvalues (unsorted) at every kappa, shape (..., n)."""
    return eigvals_batch(eval_family(f, np.asarray(kappas, dtype=complex)))


# --------------------------------------------------------------------------
# assignment
# --------------------------------------------------------------------------

_PERM_TABLES: dict = {}


def _perm_table(n: int) -> np.ndarray:
    if n not in _PERM_TABLES:
        _PERM_TABLES[n] = np.array(list(itertools.permutations(range(n))), dtype=int)
    return _PERM_TABLES[n]


def assign_batch(prev, nxt):
    """Optimal matching for each row pair.

    Returns (p, best, second) where nxt[k, p[k, i]] continues prev[k, i],
    ``best`` is the minimal sum of |delta lambda|^2 and ``second`` the cost
    of the runner-up assignment.
    """
    a = np.asarray(prev, dtype=complex)
    b = np.asarray(nxt, dtype=complex)
    m, n = a.shape
    if n <= 6:
        table = _perm_table(n)
        d2 = np.abs(a[:, :, None] - b[:, None, :]) ** 2  # (m, i, j)
        cost = d2[:, np.arange(n)[None, :], table].sum(axis=-1)  # (m, n!)
        if table.shape[0] == 1:
            return np.zeros((m, 1), dtype=int), cost[:, 0], np.full(m, np.inf)
        two = np.argpartition(cost, 1, axis=1)[:, :2]
        c2 = np.take_along_axis(cost, two, axis=1)
        swap = c2[:, 0] > c2[:, 1]
        best_idx = np.where(swap, two[:, 1], two[:, 0])
        return table[best_idx], np.minimum(c2[:, 0], c2[:, 1]), np.maximum(c2[:, 0], c2[:, 1])
    p = np.empty((m, n), dtype=int)
    best = np.empty(m)
    second = np.empty(m)
    for k in range(m):
        d2 = np.abs(a[k][:, None] - b[k][None, :]) ** 2
        r, c = linear_sum_assignment(d2)
        p[k] = c
        best[k] = d2[r, c].sum()
        # runner-up: best assignment that avoids at least one chosen pair
        alt = np.inf
        for i in range(n):
            d = d2.copy()
            d[i, c[i]] = 1e300
            rr, cc = linear_sum_assignment(d)
            alt = min(alt, d[rr, cc].sum())
        second[k] = alt
    return p, best, second


def match_continuation(prev, nxt, tol: float = DEFAULT_OPTIONS.ambiguity_tol) -> Perm:
    """Perm p with next[p(i)] the continuation of prev[i]."""
    a = np.asarray(getattr(prev, "eigenvalues", prev), dtype=complex)
    b = np.asarray(getattr(nxt, "eigenvalues", nxt), dtype=complex)
    if a.shape != b.shape:
        raise InvalidInputError("spectra differ in dimension")
    p, best, second = assign_batch(a[None], b[None])
    if second[0] - best[0] <= tol:
        raise AmbiguityError(f"two assignments within {tol:g} of the optimal cost {best[0]:.3g}; refine the step")
    return Perm(p[0])


# --------------------------------------------------------------------------
# adaptive sampling
# --------------------------------------------------------------------------

def _path_length(path: Path) -> float:
    z = path.polyline(per_unit=50.0)
    return float(np.sum(np.abs(np.diff(z))))


@dataclass
class _Samples:
    t: np.ndarray
    kappa: np.ndarray
    values: np.ndarray  # raw eigenvalues
    order: np.ndarray  # sort_values per sample
    step_perm: np.ndarray  # (N-1, n): values[k+1][step_perm[k, i]] continues values[k][i]


def _sample(f: MatrixFamily, path: Path, key: SortKey, opts: TrackOptions) -> _Samples:
    length = _path_length(path)
    if path.total_phase == 0 or length == 0:
        t = np.array([0.0, 1.0])
    else:
        t = np.linspace(0.0, 1.0, max(16, int(math.ceil(length / opts.initial_step))) + 1)
    kap = path.point(t)
    vals = spectra(f, kap)
    while True:
        order = sort_values(vals, key)
        gap = min_gap_batch(vals)
        scale = np.maximum(1.0, np.max(np.abs(vals), axis=1))
        tiny = gap < opts.gap_floor * scale
        if np.any(tiny):
            k = int(np.argmax(tiny))
            lo, hi = t[max(k - 1, 0)], t[min(k + 1, len(t) - 1)]
            raise RefinementError(
                f"path passes through a degeneracy near kappa={complex(kap[k]):.6g} (gap {gap[k]:.2e})",
                interval=(float(lo), float(hi)),
            )
        p, best, second = assign_batch(vals[:-1], vals[1:])
        moved = np.take_along_axis(vals[1:], p, axis=1) - vals[:-1]
        disp = np.max(np.abs(moved), axis=1)
        local_gap = np.minimum(gap[:-1], gap[1:])
        bad = (disp >= opts.gap_fraction * local_gap) | (second - best <= opts.ambiguity_tol)
        # crossings: the branch index of some continued value changes
        rank0 = np.argsort(order[:-1], axis=1)  # raw index -> branch
        rank1 = np.argsort(order[1:], axis=1)
        b_new = np.take_along_axis(rank1, p, axis=1)
        crossing = np.any(rank0 != b_new, axis=1)
        dk = np.abs(np.diff(kap))
        bad |= crossing & (dk > opts.cross_resolution)
        if not np.any(bad):
            return _Samples(t, kap, vals, order, p)
        dt = np.diff(t)
        if np.any(bad & (dt < opts.min_dt)):
            k = int(np.argmax(bad & (dt < opts.min_dt)))
            raise RefinementError(
                f"cannot resolve the spectrum between t={t[k]:.15g} and t={t[k + 1]:.15g}",
                interval=(float(t[k]), float(t[k + 1])),
            )
        idx = np.nonzero(bad)[0]
        if t.size + idx.size > opts.max_samples:
            k = int(idx[np.argmin(dt[idx])])
            raise RefinementError(
                f"more than {opts.max_samples} samples needed; worst interval near kappa={complex(kap[k]):.6g}",
                interval=(float(t[k]), float(t[k + 1])),
            )
        tm = 0.5 * (t[idx] + t[idx + 1])
        km = path.point(tm)
        vm = spectra(f, km)
        t = np.insert(t, idx + 1, tm)
        kap = np.insert(kap, idx + 1, km)
        vals = np.insert(vals, idx + 1, vm, axis=0)


def sample_adaptive(f: MatrixFamily, path: Path, opts: TrackOptions = DEFAULT_OPTIONS, key: SortKey = ReAsc) -> list:
    s = _sample(f, path, key, opts)
    return list(zip(s.t.tolist(), s.kappa.tolist()))


# --------------------------------------------------------------------------
# trajectories
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CrossingEvent:
    t: float
    kappa: complex
    perm: Perm  # old branch -> new branch
    cut_id: Optional[int] = None
    sign: int = 0

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "kappa": [self.kappa.real, self.kappa.imag],
            "perm": str(self.perm),
            "cut_id": self.cut_id,
            "sign": self.sign,
        }


@dataclass
class Trajectory:
    t: np.ndarray
    kappa: np.ndarray
    state_values: np.ndarray  # (N, n): eigenvalue of the state that started on branch j
    branch_of_state: np.ndarray  # (N, n): 1-based branch of state j
    events: list
    key: SortKey
    path_name: str = ""

    @property
    def n(self) -> int:
        return self.state_values.shape[1]

    def net_perm(self) -> Perm:
        """Start branch -> end branch of every state (meaningful for closed paths)."""
        return Perm(self.branch_of_state[-1] - 1)

    def net_matrix(self) -> np.ndarray:
        return m_matrix_of(self.net_perm())

    def exchange(self):
        return exchange_relation(self.net_matrix())

    def word(self) -> Word:
        """Signed cut word (needs an atlas at trace time)."""
        if any(e.cut_id is None for e in self.events):
            raise InvalidInputError("some crossings were not matched to an atlas cut")
        return Word(tuple((e.cut_id, e.sign) for e in self.events), prefix="c")

    def sigma(self) -> list:
        return [e.cut_id for e in self.events]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["t", "re_kappa", "im_kappa"]
        for i in range(1, self.n + 1):
            head += [f"re_lambda{i}", f"im_lambda{i}", f"branch_of_state{i}"]
        w.writerow(head)
        for k in range(self.t.size):
            row = [repr(float(self.t[k])), repr(float(self.kappa[k].real)), repr(float(self.kappa[k].imag))]
            for i in range(self.n):
                v = self.state_values[k, i]
                row += [repr(float(v.real)), repr(float(v.imag)), int(self.branch_of_state[k, i])]
            w.writerow(row)
        return buf.getvalue()

    def events_json(self) -> list:
        return [e.to_json() for e in self.events]


def _check_clearance(path: Path, eps, clearance: float):
    if not eps:
        return
    z = path.polyline(per_unit=2000.0)
    for ep in eps:
        loc = complex(getattr(ep, "location", ep))
        d = np.abs(z - loc)
        k = int(np.argmin(d))
        if d[k] < clearance:
            t = path.parameter_of(complex(z[k]))
            raise RefinementError(
                f"path comes within {d[k]:.2e} of the exceptional point {loc:.6g} (clearance {clearance:g})",
                interval=(max(0.0, t - 1e-3), min(1.0, t + 1e-3)),
            )


def trace_path(f: MatrixFamily, path: Path, key: SortKey = ReAsc, atlas=None,
               opts: TrackOptions = DEFAULT_OPTIONS) -> Trajectory:
    """Follow every eigenvalue along ``path`` and record branch-cut crossings.

    With an atlas, each crossing gets the id of the nearest cut and a sign
    (+1 when the path crosses along the cut's normal).
    """
    if atlas is not None:
        _check_clearance(path, atlas.eps, opts.ep_clearance)
    s = _sample(f, path, key, opts)
    N, n = s.values.shape
    cont = np.empty((N, n), dtype=int)  # raw index of state j at sample k
    cont[0] = s.order[0]
    for k in range(N - 1):
        cont[k + 1] = s.step_perm[k][cont[k]]
    rank = np.argsort(s.order, axis=1)
    branch = np.take_along_axis(rank, cont, axis=1) + 1
    state_values = np.take_along_axis(s.values, cont, axis=1)

    # A sample landing exactly on a cut splits one crossing into two steps
    # (off-cut -> tied -> off-cut); such runs are merged into one event.
    runs = []
    for k in np.nonzero(np.any(branch[1:] != branch[:-1], axis=1))[0]:
        if runs and abs(s.kappa[k] - s.kappa[runs[-1][1]]) <= 10 * opts.cross_resolution:
            runs[-1][1] = k + 1
        else:
            runs.append([k, k + 1])
    events = []
    for k0, k1 in runs:
        img = [0] * n
        for j in range(n):
            img[branch[k0, j] - 1] = branch[k1, j] - 1
        perm = Perm(img)
        if perm.is_identity():
            continue
        tm = 0.5 * (s.t[k0] + s.t[k1])
        km = complex(path.point(tm))
        cut_id, sign = None, 0
        if atlas is not None:
            vel = complex(path.velocity(tm))
            if vel == 0:
                vel = complex(s.kappa[k1] - s.kappa[k0])
            cut_id, sign = atlas.match(km, vel, perm)
        events.append(CrossingEvent(float(tm), km, perm, cut_id, sign))
    return Trajectory(s.t, s.kappa, state_values, branch, events, key, path.name)


def path_perm(f: MatrixFamily, path: Path, key: SortKey = ReAsc, opts: TrackOptions = DEFAULT_OPTIONS) -> Perm:
    return trace_path(f, path, key, None, opts).net_perm()


def crossing_permutation(f: MatrixFamily, cut_point: complex, normal_dir: complex, key: SortKey = ReAsc,
                         h0: float = 1e-3, max_halvings: int = 30,
                         opts: TrackOptions = DEFAULT_OPTIONS) -> Perm:
    """Branch permutation seen by a short probe crossing the cut along ``normal_dir``.

    The probe half-length starts at ``h0`` and halves until two successive
    lengths agree.
    """
    if normal_dir == 0:
        raise InvalidInputError("normal_dir must be nonzero")
    nd = complex(normal_dir) / abs(normal_dir)
    z = complex(cut_point)

    def probe(h):
        try:
            return path_perm(f, Path([Line(z - h * nd, z + h * nd)]), key, opts)
        except (RefinementError, AmbiguityError):
            return None

    h = h0
    last = probe(h)
    for _ in range(max_halvings):
        h *= 0.5
        cur = probe(h)
        if cur is not None and cur == last:
            return cur
        last = cur
    raise ProbeError(f"probe across {z:.6g} did not stabilise after {max_halvings} halvings")

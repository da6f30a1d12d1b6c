"""Regression suite for the worked example of the four-site model."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Callable, Optional

import numpy as np

from . import catalog as C
from .braidgroup import (
    Perm,
    based_equivalent,
    commutator,
    default_rays,
    exchange_relation,
    freely_conjugate,
    homotopy_word,
    m_matrix_of,
    ordered_product,
    perm_matrix_of,
    power_exchange,
    reduce_word,
    winding_numbers,
)
from .branches import ReAsc
from .dynamics import EvolutionConfig, evolution_csv, evolution_summary, evolve_states
from .errors import EpwindError
from .fileio import dumps, write_json_atomic, write_text_atomic
from .model_dsl import builtin_paper4, eval_family
from .plots import atlas_svg, trajectory_svg
from .singularities import find_eps, map_cuts
from .tracker import crossing_permutation, trace_path

REGION = (-3.0, 3.0, -3.0, 3.0)


@dataclass
class Check:
    name: str
    passed: Optional[bool]  # None marks an informational row
    detail: str

    @property
    def status(self) -> str:
        return "INFO" if self.passed is None else ("PASS" if self.passed else "FAIL")


def _closed_form_eps():
    s = math.sqrt(2 * math.sqrt(3) - 3)
    t = math.sqrt(2 * math.sqrt(3) + 3)
    return [complex(1, 0), complex(-1, 0), complex(s, 0), complex(-s, 0), complex(0, t), complex(0, -t)]


def _ex(mat) -> str:
    return exchange_relation(mat).images_of_list()


class _Suite:
    def __init__(self, grid_n: int, out: Optional[FsPath], dynamics: bool, omega: float):
        self.f = builtin_paper4()
        self.grid_n = grid_n
        self.out = out
        self.dynamics = dynamics
        self.omega = omega
        self.checks: list = []
        self.paths = C.named_paths()

    def add(self, name: str, fn: Callable):
        try:
            ok, detail = fn()
        except (EpwindError, AssertionError) as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        self.checks.append(Check(name, ok, detail))

    def write(self, rel: str, text: str):
        if self.out is not None:
            write_text_atomic(self.out / rel, text)

    # -- model ---------------------------------------------------------------
    def model(self):
        f = self.f
        h0 = eval_family(f, 0.0)
        want0 = np.array([[1j, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, -1j]])
        self.add("H(0) entries", lambda: (np.array_equal(h0, want0), "matches the kappa=0 matrix"))
        h1 = eval_family(f, 1.0)
        want1 = np.array([[1j, 1, 0, 0], [1, 0, 1, 0], [0, 1, 0, 1], [0, 0, 1, -1j]])
        self.add("H(1) entries", lambda: (np.array_equal(h1, want1), "matches the kappa=1 matrix"))
        self.add("paper4 shape", lambda: (f.n == 4 and f.sources[0][0] == "i*gamma" and f.sources[1][2] == "kappa",
                                          f"n={f.n}, (1,1)={f.sources[0][0]}, (2,3)={f.sources[1][2]}"))

    # -- exceptional points ----------------------------------------------------
    def eps(self):
        self.ep_list = find_eps(self.f, REGION, self.grid_n, ReAsc)
        locs = [e.location for e in self.ep_list]

        def six():
            oracle = _closed_form_eps()
            if len(locs) != 6:
                return False, f"found {len(locs)} EPs"
            err = max(min(abs(z - w) for z in locs) for w in oracle)
            return err <= 1e-8, f"max distance to closed forms {err:.2e}"

        self.add("six EPs at closed-form locations", six)

        def cls(target, want):
            ep = min(self.ep_list, key=lambda e: abs(e.location - target))
            return ep.order == 2 and str(ep.cycle) == want, f"order {ep.order}, cycle {ep.cycle}"

        self.add("EP1 connects branches 2,3", lambda: cls(C.EP1, "(2 3)"))
        self.add("EP2 connects 1,2 and 3,4", lambda: cls(C.EP2, "(1 2)(3 4)"))
        self.add("EP3 connects 1,3 and 2,4", lambda: cls(C.EP3, "(1 3)(2 4)"))
        if self.out is not None:
            write_json_atomic(self.out / "eps.json", [e.to_json() for e in self.ep_list])

    # -- cuts --------------------------------------------------------------------
    def cuts(self):
        self.atlas = map_cuts(self.f, REGION, self.grid_n, ReAsc, eps=self.ep_list)
        mats = [c.matrix for c in self.atlas.cuts]

        def multiset():
            want = [C.M1, C.M1, C.M2, C.M2, C.M3, C.M3]
            left = list(mats)
            for w in want:
                hit = next((k for k, m in enumerate(left) if np.array_equal(m, w)), None)
                if hit is None:
                    return False, f"{len(mats)} cuts; perms {[str(c.perm) for c in self.atlas.cuts]}"
                left.pop(hit)
            return not left, f"{len(mats)} cuts; perms {[str(c.perm) for c in self.atlas.cuts]}"

        self.add("six cuts carrying M1,M1,M2,M2,M3,M3", multiset)
        I = np.eye(4, dtype=int)
        self.add("Mk^2 = I", lambda: (all(np.array_equal(m @ m, I) for m in (C.M1, C.M2, C.M3)), "exact"))
        self.add("[M1,M3] = [M2,M3] = 0, [M1,M2] != 0", lambda: (
            not commutator(C.M1, C.M3).any() and not commutator(C.M2, C.M3).any() and commutator(C.M1, C.M2).any(),
            "exact integer arithmetic"))
        probes = [(2.0 + 0j, 1j, C.M1, "M1 cut beyond EP1"), (0.3 + 0j, 1j, C.M2, "M2 cut between EP2 and 0"),
                  (2.8j, 1 + 0j, C.M3, "M3 cut beyond EP3")]
        for z, nd, want, label in probes:
            self.add(f"probe {label}", lambda z=z, nd=nd, want=want: (
                np.array_equal(m_matrix_of(crossing_permutation(self.f, z, nd)), want),
                str(crossing_permutation(self.f, z, nd))))
        self.add("perm (2 3) -> M1, (1 2)(3 4) -> M2", lambda: (
            np.array_equal(m_matrix_of(Perm.parse(4, "(2 3)")), C.M1)
            and np.array_equal(m_matrix_of(Perm.parse(4, "(1 2)(3 4)")), C.M2), "representation rule"))
        self.add("ordered product of (3,1,2) is M2 M1 M3", lambda: (
            np.array_equal(ordered_product([(3, 1), (1, 1), (2, 1)], {1: C.M1, 2: C.M2, 3: C.M3}), C.M2 @ C.M1 @ C.M3),
            "right-to-left in crossing order"))
        if self.out is not None:
            write_json_atomic(self.out / "atlas.json", self.atlas.to_json())
            self.write("plots/atlas.svg", atlas_svg(self.atlas, [self.paths["blue@k0"]], "EPs and branch cuts"))

    # -- stroboscopic loops ----------------------------------------------------------
    def _trace(self, name):
        tr = trace_path(self.f, self.paths[name], ReAsc, self.atlas)
        net = ordered_product(tr.word(), self.atlas.assign())
        if not np.array_equal(net, tr.net_matrix()):
            raise AssertionError(f"{name}: word product disagrees with continuation")
        self.write(f"traces/{name.replace('@', '_')}.csv", tr.to_csv())
        self.write(f"traces/{name.replace('@', '_')}_events.json", dumps(tr.events_json()))
        return tr, net

    def _cut_kinds(self, tr):
        kinds = {}
        for c in self.atlas.cuts:
            for k, m in (("M1", C.M1), ("M2", C.M2), ("M3", C.M3)):
                if np.array_equal(c.matrix, m):
                    kinds[c.cut_id] = k
        return [kinds.get(e.cut_id, "?") for e in tr.events]

    def strobe(self):
        tr0, n0 = self._trace("blue@k0")
        tr1, n1 = self._trace("blue@k0p")
        self.write("plots/blue_k0_trajectory.svg", trajectory_svg(tr0, "blue loop from kappa0"))
        self.add("blue loop from kappa0 crosses M2 then M1", lambda: (self._cut_kinds(tr0) == ["M2", "M1"],
                                                                      " ".join(self._cut_kinds(tr0))))
        self.add("blue loop from kappa0 -> {s3,s1,s4,s2}", lambda: (_ex(n0) == "{s3,s1,s4,s2}", _ex(n0)))
        self.add("blue loop from kappa0' -> {s2,s4,s1,s3}", lambda: (_ex(n1) == "{s2,s4,s1,s3}", _ex(n1)))
        self.add("M1M2 product matches blue loop from kappa0", lambda: (np.array_equal(n0, C.M1 @ C.M2), "net = M1 M2"))

        def powers():
            got = [power_exchange(n0, k)[1] for k in (1, 2, 3, 4)]
            return got == [3, 4, 2, 1], "s1 -> " + ", ".join(f"s{g}" for g in got)

        self.add("blue loop k=1..4 sends s1 to s3, s4, s2, s1", powers)

        def wind():
            w = winding_numbers(self.paths["blue@k0"], self.ep_list)
            inside = [k for k, e in enumerate(self.ep_list) if abs(e.location - C.EP1) < 1e-6 or abs(e.location - C.EP2) < 1e-6]
            ok = all((w[k] == 1) if k in inside else (w[k] == 0) for k in range(len(w)))
            return ok, f"winding {w}"

        self.add("blue loop winds once around EP1 and EP2", wind)

        t1, p1 = self._trace("loop1")
        t2, p2 = self._trace("loop2")
        self.add("loop 1 net M1M2M1M2 -> {s4,s3,s2,s1}", lambda: (
            np.array_equal(p1, C.M1 @ C.M2 @ C.M1 @ C.M2) and _ex(p1) == "{s4,s3,s2,s1}", _ex(p1)))
        self.add("loop 2 net identity", lambda: (np.array_equal(p2, np.eye(4, dtype=int)), _ex(p2)))
        self.add("loops 1,2 inequivalent from kappa0", lambda: (
            (v := based_equivalent(self.f, self.paths["loop1"], self.paths["loop2"], self.atlas)) == "inequivalent", v))

        t3, m3 = self._trace("loop3@k0")
        t4, m4 = self._trace("loop4@k0")
        t3p, m3p = self._trace("loop3@k0p")
        t4p, m4p = self._trace("loop4@k0p")
        self.add("loop 3 from kappa0 -> M1 {s1,s3,s2,s4}", lambda: (
            np.array_equal(m3, C.M1) and _ex(m3) == "{s1,s3,s2,s4}", _ex(m3)))
        self.add("loop 4 from kappa0 -> M2M1M2 {s4,s2,s3,s1}", lambda: (
            np.array_equal(m4, C.M2 @ C.M1 @ C.M2) and _ex(m4) == "{s4,s2,s3,s1}", _ex(m4)))
        self.add("loops 3,4 from kappa0' -> M1", lambda: (
            np.array_equal(m3p, C.M1) and np.array_equal(m4p, C.M1), f"{_ex(m3p)} / {_ex(m4p)}"))
        self.add("classify 3 vs 4 from kappa0: inequivalent", lambda: (
            (v := based_equivalent(self.f, self.paths["loop3@k0"], self.paths["loop4@k0"], self.atlas)) == "inequivalent", v))
        self.add("classify 3 vs 4 from kappa0': homotopic", lambda: (
            (v := based_equivalent(self.f, self.paths["loop3@k0p"], self.paths["loop4@k0p"], self.atlas)) == "homotopic", v))

        def words():
            rays = default_rays(self.ep_list)
            a = reduce_word(homotopy_word(self.paths["loop3@k0p"], self.ep_list, rays))
            b = reduce_word(homotopy_word(self.paths["loop4@k0p"], self.ep_list, rays))
            return a == b, f"{a} | {b}"

        self.add("loops 3,4 from kappa0' have equal reduced words", words)
        self.add("loops 3,4 freely conjugate; 1,2 not", lambda: (
            freely_conjugate(self.paths["loop3@k0"], self.paths["loop4@k0"], self.atlas)
            and not freely_conjugate(self.paths["loop1"], self.paths["loop2"], self.atlas), "conjugacy test"))
        self.add("kappa0' location", lambda: (abs(C.KAPPA0_PRIME - complex(1.148, 0.03711)) < 1e-3,
                                              f"{C.KAPPA0_PRIME.real:.5f}{C.KAPPA0_PRIME.imag:+.5f}i"))

    # -- dynamics ----------------------------------------------------------------
    def dyn(self):
        runs = [
            ("loop3@vertex", "loop 3 from kappa0'", 2),
            ("loop4@k0p", "loop 4 from kappa0'", 2),
            ("loop3@k0", "loop 3 from kappa0", 3),
            ("loop4@k0", "loop 4 from kappa0", 1),
        ]
        summaries = []
        for name, label, want in runs:
            for sign in (1, -1):
                cfg = EvolutionConfig(omega=sign * abs(self.omega))
                try:
                    res = evolve_states(self.f, self.paths[name], [1, 2, 3, 4], cfg)
                except EpwindError as exc:
                    self.checks.append(Check(f"dynamics {label}", False, f"{type(exc).__name__}: {exc}"))
                    continue
                doms = [r.final_dominant for r in res]
                margin = min(r.margin for r in res)
                detail = f"omega={cfg.omega:+g}: dominant {doms}, min margin {margin:.3g}"
                if sign > 0:
                    ok = all(d == want for d in doms) and margin >= 10
                    self.checks.append(Check(f"dynamics {label} -> s{want}", ok, detail))
                else:
                    self.checks.append(Check(f"dynamics {label}, reversed direction", None, detail))
                tag = f"{name.replace('@', '_')}_{'ccw' if sign > 0 else 'cw'}"
                for r in res:
                    self.write(f"dynamics/{tag}_start{r.start_state}.csv", evolution_csv(r))
                    summaries.append(evolution_summary(r, name))
        if self.out is not None:
            write_json_atomic(self.out / "dynamics/summary.json", summaries)


def run_paper_repro(out_dir=None, grid_n: int = 200, dynamics: bool = True, omega: float = 1e-4) -> list:
    out = FsPath(out_dir) if out_dir is not None else None
    s = _Suite(grid_n, out, dynamics, omega)
    s.model()
    s.eps()
    s.cuts()
    s.strobe()
    if dynamics:
        s.dyn()
    if out is not None:
        write_text_atomic(out / "repro.txt", format_table(s.checks))
        write_json_atomic(out / "repro.json", [{"check": c.name, "status": c.status, "detail": c.detail} for c in s.checks])
    return s.checks


def format_table(checks) -> str:
    width = max(len(c.name) for c in checks)
    lines = [f"{c.status:4}  {c.name:<{width}}  {c.detail}" for c in checks]
    failed = sum(1 for c in checks if c.passed is False)
    passed = sum(1 for c in checks if c.passed)
    lines.append(f"{passed} passed, {failed} failed")
    return "\n".join(lines) + "\n"

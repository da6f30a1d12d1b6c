import numpy as np
import pytest

from epwind import catalog
from epwind.braidgroup import Perm
from epwind.branches import ReAsc, sort_values
from epwind.errors import RefinementError
from epwind.model_dsl import builtin_paper4
from epwind.paths import circle, constant, polygon
from epwind.tracker import (
    TrackOptions,
    crossing_permutation,
    match_continuation,
    path_perm,
    sample_adaptive,
    spectra,
    trace_path,
)

F = builtin_paper4()


def test_match_identity_and_swap():
    a = np.array([1.0, 2.0, 3.0 + 1j])
    assert match_continuation(a, a) == Perm.identity(3)
    p = match_continuation(a, a[[1, 0, 2]])
    assert str(p) == "(1 2)"


def test_constant_path_two_samples():
    s = sample_adaptive(F, constant(0.3 + 0.1j))
    assert len(s) == 2
    np.testing.assert_array_equal(spectra(F, [s[0][1]]), spectra(F, [s[1][1]]))


def test_half_gap_on_small_circle():
    samples = sample_adaptive(F, circle(0.4 - 0.15j, 0.05))
    ks = np.array([k for _, k in samples])
    vals = np.sort_complex(spectra(F, ks))
    for a, b in zip(vals[:-1], vals[1:]):
        moved = np.max(np.abs(np.sort_complex(b) - np.sort_complex(a)))
        gap = min(abs(x - y) for i, x in enumerate(a) for y in a[i + 1:])
        assert moved <= 0.5 * gap + 1e-12


def test_circle_through_ep_fails():
    with pytest.raises(RefinementError) as ei:
        trace_path(F, circle(1.05 + 0j, 0.05, start_angle=np.pi / 2))
    assert ei.value.interval is not None


def test_fine_step_over_m1_cut():
    a, b = spectra(F, [2.0 + 1e-6j, 2.0 - 1e-6j])
    p = match_continuation(a[sort_values(a)], b[sort_values(b)])
    assert str(p) == "(2 3)"


@pytest.mark.parametrize("z, normal, want", [
    (2.0, 1j, "(2 3)"),
    (-2.0, 1j, "(2 3)"),
    (0.3, 1j, "(1 2)(3 4)"),
    (1.2j, 1, "(1 2)(3 4)"),
    (2.8j, 1, "(1 4)(2 3)"),
    (0.8, 1j, "()"),
])
def test_probes(z, normal, want):
    assert str(crossing_permutation(F, complex(z), complex(normal))) == want


def test_no_ep_loop_is_identity(atlas):
    tr = trace_path(F, circle(0.4 - 1.2j, 0.3), ReAsc, atlas)
    assert tr.events == [] or tr.net_perm() == Perm.identity(4)
    assert tr.net_perm() == Perm.identity(4)


def test_blue_loop_words(atlas, loops):
    kinds = {}
    for c in atlas.cuts:
        kinds[c.cut_id] = {"(2 3)": "M1", "(1 2)(3 4)": "M2", "(1 4)(2 3)": "M3"}[str(c.perm)]
    t0 = trace_path(F, loops["blue@k0"], ReAsc, atlas)
    t1 = trace_path(F, loops["blue@k0p"], ReAsc, atlas)
    assert [kinds[e.cut_id] for e in t0.events] == ["M2", "M1"]
    assert [kinds[e.cut_id] for e in t1.events] == ["M1", "M2"]


def test_reversal_inverts(atlas, loops):
    for name in ("blue@k0", "loop4@k0", "loop1"):
        p = loops[name]
        assert path_perm(F, p.reversed()) == path_perm(F, p).inverse()


def test_events_reproduce_sorted_order(atlas, loops):
    tr = trace_path(F, loops["loop1"], ReAsc, atlas)
    for e in tr.events:
        k = int(np.searchsorted(tr.t, e.t))
        before = tr.branch_of_state[k - 1]
        after = tr.branch_of_state[k]
        # state on branch m moves to branch perm(m)
        assert [e.perm.images[b - 1] + 1 for b in before] == list(after)


def test_density_does_not_change_word(atlas, loops):
    coarse = trace_path(F, loops["loop4@k0"], ReAsc, atlas)
    fine = trace_path(F, loops["loop4@k0"], ReAsc, atlas, TrackOptions(initial_step=0.002, gap_fraction=0.25))
    assert str(coarse.word()) == str(fine.word())


def test_trajectory_exports(atlas, loops):
    tr = trace_path(F, loops["blue@k0"], ReAsc, atlas)
    lines = tr.to_csv().splitlines()
    assert lines[0].startswith("t,")
    assert len(lines) == tr.t.size + 1
    ev = tr.events_json()
    assert [e["perm"] for e in ev] == ["(1 2)(3 4)", "(2 3)"]

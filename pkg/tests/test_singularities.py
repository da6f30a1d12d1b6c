import json
import math

import numpy as np
import pytest
import sympy as sp

from epwind import catalog as C
from epwind.braidgroup import commutator
from epwind.branches import ReAsc
from epwind.model_dsl import MatrixFamily, builtin_paper4
from epwind.singularities import (
    Atlas,
    Region,
    classify_ep,
    discriminant_at,
    find_eps,
    map_cuts,
    sylvester_discriminant,
)
from epwind.tracker import path_perm
from epwind.paths import circle

F = builtin_paper4()
TWO = MatrixFamily(2, (("i*gamma", "kappa"), ("kappa", "-i*gamma")), {"gamma": 1.0}, "kappa", "two")


def test_sylvester_against_sympy():
    x = sp.symbols("x")
    rng = np.random.default_rng(5)
    for _ in range(5):
        c = rng.normal(size=5) + 1j * rng.normal(size=5)
        poly = sum(sp.nsimplify(complex(round(v.real, 3), round(v.imag, 3))) * x ** k for k, v in enumerate(c))
        coeffs = [complex(sp.Poly(poly, x).coeff_monomial(x ** k)) for k in range(5)]
        ref = complex(sp.discriminant(poly, x))
        got = complex(sylvester_discriminant(np.array(coeffs)))
        assert abs(got - ref) <= 1e-9 * max(1.0, abs(ref))


def test_paper4_discriminant_closed_form():
    x, k = sp.symbols("x k")
    disc = sp.discriminant(x ** 4 - (1 + k ** 2) * x ** 2 + (1 - k ** 2), x)
    assert sp.expand(disc - 16 * (1 - k ** 2) * (k ** 4 + 6 * k ** 2 - 3) ** 2) == 0
    for kv in (0.3 + 0.2j, 1.7, -0.4j):
        ref = complex(disc.subs(k, kv))
        assert abs(discriminant_at(F, kv) - ref) <= 1e-9 * abs(ref)
    assert abs(discriminant_at(F, 1.0)) <= 1e-10
    assert abs(discriminant_at(F, 0.0)) > 1


def test_six_eps(eps):
    s, t = math.sqrt(2 * math.sqrt(3) - 3), math.sqrt(2 * math.sqrt(3) + 3)
    oracle = [1, -1, s, -s, 1j * t, -1j * t]
    locs = [e.location for e in eps]
    assert len(locs) == 6
    for w in oracle:
        assert min(abs(z - w) for z in locs) <= 1e-8
    for e in eps:
        assert e.order == 2
        assert abs(discriminant_at(F, e.location)) <= 1e-12


@pytest.mark.parametrize("z, want", [(C.EP1, "(2 3)"), (-C.EP1, "(2 3)"), (C.EP2, "(1 2)(3 4)"),
                                     (C.EP3, "(1 3)(2 4)"), (-C.EP3, "(1 3)(2 4)")])
def test_classify(z, want):
    ep = classify_ep(F, z, ReAsc, C.PAPER_EPS)
    assert ep.order == 2 and str(ep.cycle) == want


def test_cycle_order_property(eps):
    for e in eps:
        loop = circle(e.location, e.radius, 0.9)
        assert (path_perm(F, loop) ** e.order).is_identity()


def test_empty_region():
    assert find_eps(F, (1.5, 2.5, 0.5, 1.5), 60) == []


def test_two_by_two_family():
    eps = find_eps(TWO, (-2, 2, -2, 2), 80)
    assert sorted(round(e.location.real, 8) for e in eps) == [-1.0, 1.0]
    at = map_cuts(TWO, (-2, 2, -2, 2), 80, eps=eps)
    assert at.cuts and {str(c.perm) for c in at.cuts} == {"(1 2)"}


def test_no_ep_family_has_no_cuts():
    g = MatrixFamily(2, (("kappa", "0.5"), ("0.5", "kappa+2")), {}, "kappa", "flat")
    at = map_cuts(g, (-2, 2, -2, 2), 60)
    assert at.eps == [] and at.cuts == []


def test_atlas_multiset(atlas):
    mats = sorted(str(c.perm) for c in atlas.cuts)
    assert mats == sorted(["(2 3)", "(2 3)", "(1 2)(3 4)", "(1 2)(3 4)", "(1 4)(2 3)", "(1 4)(2 3)"])
    assert not commutator(C.M1, C.M3).any()
    assert not commutator(C.M2, C.M3).any()
    assert commutator(C.M1, C.M2).any()


def test_m1_cut_lies_beyond_ep1(atlas):
    for c in atlas.cuts:
        if str(c.perm) == "(2 3)":
            assert np.all(np.abs(c.points.real) > 1.0) and np.all(np.abs(c.points.imag) < 1e-6)


def test_junction_matrices_commute(atlas):
    assert atlas.junctions, "origin crossing of the two M2 segments should be split"
    for z in atlas.junctions:
        near = [c for c in atlas.cuts if np.min(np.abs(c.points - z)) < 0.1]
        for a in near:
            for b in near:
                assert not commutator(a.matrix, b.matrix).any()


def test_atlas_json_round_trip(atlas):
    doc = json.loads(json.dumps(atlas.to_json()))
    back = Atlas.from_json(doc)
    assert [str(c.perm) for c in back.cuts] == [str(c.perm) for c in atlas.cuts]
    assert back.to_json() == atlas.to_json()


def test_atlas_stable_under_grid_doubling(atlas):
    fine = map_cuts(F, (-3, 3, -3, 3), 400)
    assert len(fine.eps) == len(atlas.eps)
    for a, b in zip(fine.eps, atlas.eps):
        assert abs(a.location - b.location) <= 1e-6
    assert sorted(str(c.perm) for c in fine.cuts) == sorted(str(c.perm) for c in atlas.cuts)


def test_region_parse():
    assert Region.parse("-1 1 -2 2") == Region(-1, 1, -2, 2)
    with pytest.raises(Exception):
        Region.parse([1, 0, 0, 1])

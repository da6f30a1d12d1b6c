import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epwind import catalog as C
from epwind.braidgroup import (
    Perm,
    Word,
    based_equivalent,
    commutator,
    conjugate_words,
    exchange_relation,
    freely_conjugate,
    homotopy_word,
    m_matrix_of,
    ordered_product,
    perm_matrix_of,
    perm_of_m_matrix,
    power_exchange,
    reduce_word,
    winding_numbers,
)
from epwind.errors import BasepointMismatchError, InvalidInputError
from epwind.model_dsl import builtin_paper4
from epwind.paths import circle, constant
from epwind.tracker import trace_path

F = builtin_paper4()
ASSIGN = {1: C.M1, 2: C.M2, 3: C.M3}


def _gen(eps, z):
    return 1 + min(range(len(eps)), key=lambda k: abs(eps[k].location - z))


def test_perm_basics():
    p = Perm.parse(4, "(1 2)(3 4)")
    assert str(p) == "(1 2)(3 4)" and p.order() == 2
    assert str(Perm.parse(4, "(1 3 4 2)") ** 4) == "()"
    np.testing.assert_array_equal(perm_matrix_of(Perm.identity(4)), np.eye(4, dtype=int))
    np.testing.assert_array_equal(m_matrix_of(Perm.parse(4, "(2 3)")), C.M1)
    np.testing.assert_array_equal(m_matrix_of(Perm.parse(4, "(1 2)(3 4)")), C.M2)
    assert perm_of_m_matrix(C.M3) == Perm.parse(4, "(1 4)(2 3)")


def test_perm_rejects_non_bijection():
    with pytest.raises(InvalidInputError):
        Perm([0, 0, 1])


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 8).flatmap(lambda n: st.tuples(st.permutations(range(n)), st.permutations(range(n)))))
def test_anti_homomorphism(pair):
    a, b = Perm(pair[0]), Perm(pair[1])
    np.testing.assert_array_equal(perm_matrix_of(b * a), perm_matrix_of(a) @ perm_matrix_of(b))


def test_ordered_product_cases():
    np.testing.assert_array_equal(ordered_product([(3, 1), (1, 1), (2, 1)], ASSIGN), C.M2 @ C.M1 @ C.M3)
    np.testing.assert_array_equal(ordered_product([], ASSIGN), np.eye(4, dtype=int))
    np.testing.assert_array_equal(ordered_product([(2, 1), (2, -1)], ASSIGN), np.eye(4, dtype=int))


def test_exchange_relations():
    assert exchange_relation(C.M1 @ C.M2).images_of_list() == "{s3,s1,s4,s2}"
    assert exchange_relation(C.M2 @ C.M1).images_of_list() == "{s2,s4,s1,s3}"
    assert exchange_relation(np.eye(4, dtype=int)).images_of_list() == "{s1,s2,s3,s4}"


def test_power_exchange_orbit():
    net = C.M1 @ C.M2
    assert [power_exchange(net, k)[1] for k in (1, 2, 3, 4)] == [3, 4, 2, 1]
    assert power_exchange(net, 4).images_of_list() == "{s1,s2,s3,s4}"
    with pytest.raises(InvalidInputError):
        power_exchange(net, 0)


@pytest.mark.parametrize("text, want", [
    ("g1 g1^-1", ""),
    ("g1 g2 g2^-1 g1", "g1 g1"),
    ("g3 g1^-1 g2", "g3 g1^-1 g2"),
])
def test_reduce_word(text, want):
    assert str(reduce_word(Word.parse(text))) == want


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 3), st.sampled_from([1, -1])), max_size=24), st.randoms())
def test_reduction_confluence(letters, rnd):
    w = list(letters)
    while True:
        spots = [k for k in range(len(w) - 1) if w[k][0] == w[k + 1][0] and w[k][1] == -w[k + 1][1]]
        if not spots:
            break
        k = rnd.choice(spots)
        del w[k:k + 2]
    assert tuple(w) == reduce_word(Word(tuple(letters))).letters


def test_conjugacy():
    g = Word.parse("g2 g1")
    x = Word.parse("g3 g1^-1")
    assert conjugate_words(g, x + g + x.inverse())
    assert not conjugate_words(g, Word.parse("g1 g1"))


def test_winding(eps, loops):
    w = winding_numbers(loops["blue@k0"], eps)
    inside = {_gen(eps, C.EP1) - 1, _gen(eps, C.EP2) - 1}
    assert w == [1 if k in inside else 0 for k in range(6)]
    assert winding_numbers(loops["blue@k0"].reversed(), eps) == [-v for v in w]
    assert winding_numbers(circle(0.4 - 1.2j, 0.3), eps) == [0] * 6


def test_single_puncture_word(eps, rays):
    g = _gen(eps, C.EP1)
    # small enough to stay clear of the neighbouring EP's ray
    assert str(reduce_word(homotopy_word(circle(1.0, 0.02, 2.0), eps, rays))) == f"g{g}"
    # a wider circle cuts that ray twice and reads as a conjugate
    assert conjugate_words(homotopy_word(circle(1.0, 0.1, 2.0), eps, rays), Word(((g, 1),)))


def test_figure_eight_word(eps, rays):
    g1, g2 = _gen(eps, C.EP1), _gen(eps, C.EP2)
    base = 0.84 + 0j
    left = circle(1.0, 0.16, np.pi)  # starts at 0.84, CCW round EP1
    right = circle(C.EP2.real, base.real - C.EP2.real, 0.0, ccw=False)  # starts at 0.84, CW round EP2
    w = reduce_word(homotopy_word(left.then(right), eps, rays))
    assert str(w) == f"g{g1} g{g2}^-1"


def test_loops_3_4(atlas, rays, loops):
    assert based_equivalent(F, loops["loop3@k0"], loops["loop4@k0"], atlas, rays=rays) == "inequivalent"
    assert based_equivalent(F, loops["loop3@k0p"], loops["loop4@k0p"], atlas, rays=rays) == "homotopic"
    assert based_equivalent(F, loops["loop1"], loops["loop2"], atlas, rays=rays) == "inequivalent"
    assert freely_conjugate(loops["loop3@k0"], loops["loop4@k0"], atlas, rays)
    assert freely_conjugate(loops["loop3@k0p"], loops["loop4@k0"], atlas, rays)
    assert not freely_conjugate(loops["loop1"], loops["loop2"], atlas, rays)
    assert freely_conjugate(loops["loop4@k0"], loops["loop4@k0"].rebased(0.37), atlas, rays)


def test_accidental_equivalence(atlas, rays):
    # a loop around EP1 twice and a contractible loop share the identity product
    twice = circle(1.0, 0.1, 2.0).then(circle(1.0, 0.1, 2.0))
    trivial = constant(twice.basepoint)
    assert based_equivalent(F, twice, trivial, atlas, rays=rays) == "accidental"


def test_basepoint_mismatch(atlas, loops):
    with pytest.raises(BasepointMismatchError):
        based_equivalent(F, loops["loop3@k0"], loops["loop3@k0p"], atlas)


def test_exchange_composes_over_concatenation(atlas, loops):
    a, b = loops["loop3@k0"], loops["loop4@k0"]
    na = trace_path(F, a, atlas=atlas).net_matrix()
    nb = trace_path(F, b, atlas=atlas).net_matrix()
    nab = trace_path(F, a.then(b), atlas=atlas).net_matrix()
    np.testing.assert_array_equal(nab, nb @ na)
    e = exchange_relation(nab)
    ea, eb = exchange_relation(na), exchange_relation(nb)
    assert all(e[s] == eb[ea[s]] for s in range(1, 5))


def test_cut_commutation_claims():
    assert not commutator(C.M1, C.M3).any()
    assert commutator(C.M1, C.M2).any()

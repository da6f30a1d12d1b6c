import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epwind.branches import ImAsc, KEYS, ReAsc, ReDesc, SortKey, degenerate_mask, min_gap, sort_spectrum, sort_values
from epwind.errors import InvalidInputError
from epwind.matrix_core import eig
from epwind.model_dsl import builtin_paper4, eval_family


def _s(v, key=ReAsc):
    v = np.asarray(v, dtype=complex)
    return v[sort_values(v, key)]


def test_paper4_at_zero_order():
    s = eig(eval_family(builtin_paper4(), 0.0))
    ss = sort_spectrum(s, ReAsc)
    r3 = np.sqrt(3)
    want = [(-r3 - 1j) / 2, (-r3 + 1j) / 2, (r3 - 1j) / 2, (r3 + 1j) / 2]
    np.testing.assert_allclose(ss.branch_values, want, atol=1e-10)
    assert abs(min_gap(ss) - 1.0) < 1e-10


def test_sorted_input_identity_perm():
    ss = sort_spectrum(np.array([-1, 0.5j, 2 - 1j, 3]), ReAsc)
    assert list(ss.sort_perm) == [0, 1, 2, 3]


def test_tiebreak_on_equal_real_parts():
    ss = sort_spectrum(np.array([1 + 1j, 1 - 1j, -2, 0.5]), ReAsc)
    np.testing.assert_array_equal(ss.branch_values, [-2, 0.5, 1 - 1j, 1 + 1j])


def test_other_keys():
    v = np.array([1 + 2j, -1 - 1j, 3 + 0j])
    np.testing.assert_array_equal(_s(v, ReDesc), [3, 1 + 2j, -1 - 1j])
    np.testing.assert_array_equal(_s(v, ImAsc), [-1 - 1j, 3, 1 + 2j])
    assert set(KEYS) == {"re_asc", "re_desc", "im_asc", "im_desc"}


def test_parse_key():
    assert SortKey.parse("re_asc") is ReAsc
    with pytest.raises(InvalidInputError):
        SortKey.parse("sideways")


def test_min_gap_cases():
    assert min_gap(sort_spectrum(np.array([0.0, 3.0, 7.0]))) == 3.0
    assert min_gap(sort_spectrum(np.array([1.0, 1.0, 2.0]))) == 0.0


def test_degenerate_mask_exact_double_tie():
    m = degenerate_mask(_s([1 + 1j, 1 + 1j, 0]))
    assert m.any()
    assert not degenerate_mask(_s([1 + 1j, 1 - 1j, 0])).any()


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(-3, 3), st.integers(-3, 3)), min_size=1, max_size=8), st.randoms())
def test_sort_idempotent_and_shuffle_invariant(parts, rnd):
    v = np.array([complex(a, b) for a, b in parts])
    s1 = _s(v)
    w = list(v)
    rnd.shuffle(w)
    np.testing.assert_array_equal(_s(w), s1)
    np.testing.assert_array_equal(_s(s1), s1)

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from epwind.errors import InvalidInputError
from epwind.matrix_core import (
    CPoly,
    char_poly,
    char_poly_coeffs,
    check_trace_identities,
    eig,
    eig_vectors,
    eigvals_batch,
    horner,
    near_degenerate_clusters,
    poly_roots,
    trace_audit,
)


def _match(a, b):
    """Max distance after greedy multiset pairing."""
    b = list(b)
    worst = 0.0
    for x in a:
        k = int(np.argmin([abs(x - y) for y in b]))
        worst = max(worst, abs(x - b.pop(k)))
    return worst


def test_horner_matches_numpy():
    c = np.array([1 - 2j, 0.5, 3j, -1])
    x = np.array([0.3 + 0.1j, -2.0, 1j])
    np.testing.assert_allclose(horner(c, x), np.polyval(c[::-1], x))


def test_char_poly_against_sympy():
    m = [[1j, 1, 0, 0], [1, 0, 2, 0], [0, 2, 0, 1], [0, 0, 1, -1j]]
    lam = sp.symbols("lam")
    ref = sp.Poly(sp.Matrix(m).subs(sp.I, sp.I).charpoly(lam).as_expr(), lam).all_coeffs()[::-1]
    got = char_poly(m).coeffs
    np.testing.assert_allclose(got, [complex(c) for c in ref], atol=1e-12)


def test_char_poly_exact_for_gaussian_integers():
    m = [[1j, 1, 0, 0], [1, 0, 3, 0], [0, 3, 0, 1], [0, 0, 1, -1j]]
    p = char_poly(m, exact=True)
    # lambda^4 - (1 + k^2) lambda^2 + (1 - k^2) at k = 3
    assert list(p.coeffs) == [-8, 0, -10, 0, 1]


def test_char_poly_batch_shape():
    ms = np.random.default_rng(1).normal(size=(3, 5, 4, 4))
    assert char_poly_coeffs(ms).shape == (3, 5, 5)


def test_poly_roots_simple():
    r = poly_roots([-6, 11, -6, 1])
    assert _match(r, [1, 2, 3]) < 1e-10


def test_poly_roots_rejects_constant():
    with pytest.raises(InvalidInputError):
        poly_roots([3.0])


def test_cpoly_rejects_zero_leading():
    with pytest.raises(InvalidInputError):
        CPoly(np.array([1.0, 0.0]))


def test_double_root_is_found_twice():
    r = poly_roots([1, -2, 1])
    assert all(abs(x - 1) < 1e-7 for x in r)


def test_eig_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        eig(np.ones((2, 3)))
    with pytest.raises(InvalidInputError):
        eig([[np.nan, 0], [0, 1]])
    with pytest.raises(InvalidInputError):
        eig(np.eye(13))


def test_eig_vectors_biorthogonal_pair():
    m = np.array([[1j, 1, 0, 0], [1, 0, 0.5, 0], [0, 0.5, 0, 1], [0, 0, 1, -1j]])
    for lam in eig(m).eigenvalues:
        pr = eig_vectors(m, lam)
        assert pr.right_residual < 1e-8 and pr.left_residual < 1e-8
        assert abs(np.vdot(pr.left, pr.right)) > 1e-6
        assert not pr.near_defective


def test_eig_vectors_flags_jordan_block():
    m = np.array([[0, 1], [0, 0]], dtype=complex)
    assert eig_vectors(m, 0.0).near_defective


def test_clusters():
    assert near_degenerate_clusters([1.0, 1.0 + 1e-9, 2.0]) == ((0, 1),)
    assert near_degenerate_clusters([1.0, 2.0]) == ()


def test_trace_audit_counts_calls():
    rng = np.random.default_rng(3)
    with trace_audit() as au:
        eigvals_batch(rng.normal(size=(7, 4, 4)))
    assert (au.calls, au.matrices, au.failures) == (1, 7, 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=1, max_value=8), st.integers(min_value=0, max_value=2 ** 31))
def test_similarity_oracle(n, seed):
    rng = np.random.default_rng(seed)
    d = rng.normal(size=n) + 1j * rng.normal(size=n)
    q = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    m = q @ np.diag(d) @ np.linalg.inv(q)
    if np.linalg.cond(q) > 1e6:
        return
    lam = eig(m).eigenvalues
    assert check_trace_identities(m, lam)
    assert _match(lam, d) < 1e-6

import cmath

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epwind.errors import EvaluationError, InvalidInputError, ParseError
from epwind.matrix_core import char_poly_coeffs
from epwind.model_dsl import (
    Ident,
    Mul,
    Num,
    Pow,
    Sub,
    MatrixFamily,
    builtin_paper4,
    eval_expr,
    eval_family,
    family_from_json,
    identifiers,
    load_family,
    parse_expr,
    pretty_print,
)


@pytest.mark.parametrize("src, want", [
    ("1+2*3", 7),
    ("2^3^2", 512),
    ("-2^2", -4),
    ("i*i", -1),
    ("(1+i)/(1-i)", 1j),
    ("sqrt(-4)", 2j),
    ("exp(i*3.141592653589793)", -1),
    ("2.5e-1*4", 1),
])
def test_eval_constants(src, want):
    assert abs(eval_expr(parse_expr(src), {}) - want) < 1e-12


def test_eval_with_bindings_and_arrays():
    e = parse_expr("kappa^2 + J")
    out = eval_expr(e, {"kappa": np.array([1.0, 2j]), "J": 1.0})
    np.testing.assert_allclose(out, [2.0, -3.0])


def test_identifiers():
    assert identifiers(parse_expr("a*kappa + sin(b) + i")) == {"a", "kappa", "b"}


def test_ast_shapes():
    assert parse_expr("i*gamma") == Mul(Num(1j), Ident("gamma"))
    assert parse_expr("kappa^2 - 1") == Sub(Pow(Ident("kappa"), Num(2)), Num(1))


def test_closed_form_eps_evaluate():
    # oracle: plain float arithmetic
    assert abs(eval_expr(parse_expr("sqrt(2*sqrt(3)-3)"), {}) - (2 * 3 ** 0.5 - 3) ** 0.5) < 1e-15
    assert abs(eval_expr(parse_expr("sqrt(2*sqrt(3)+3)"), {}) - 2.5424597568) < 1e-9
    assert eval_expr(parse_expr("sqrt(-1)"), {}) == 1j


def test_division_by_exact_zero():
    with pytest.raises(EvaluationError):
        eval_expr(parse_expr("1/(kappa-kappa)"), {"kappa": 2.0})


def test_paper4_trace_and_char_poly():
    f = builtin_paper4()
    rng = np.random.default_rng(11)
    ks = rng.normal(size=100) * 2 + 2j * rng.normal(size=100)
    h = eval_family(f, ks)
    np.testing.assert_allclose(np.trace(h, axis1=-2, axis2=-1), 0, atol=1e-14)
    got = char_poly_coeffs(h)
    want = np.stack([1 - ks ** 2, 0 * ks, -(1 + ks ** 2), 0 * ks, 1 + 0 * ks], axis=-1)
    assert np.max(np.abs(got - want)) <= 1e-10


def test_eval_family_deterministic():
    f = builtin_paper4()
    assert eval_family(f, 0.3 - 0.7j).tobytes() == eval_family(f, 0.3 - 0.7j).tobytes()


@pytest.mark.parametrize("src", ["1+", "(1", "2**", "foo(1)", "1 2", "@", ""])
def test_parse_errors_carry_offset(src):
    with pytest.raises(ParseError) as ei:
        parse_expr(src)
    assert 0 <= ei.value.offset <= len(src)


def test_unbound_identifier_rejected():
    with pytest.raises(InvalidInputError):
        MatrixFamily(1, (("q*kappa",),), {}, "kappa")


def test_paper4_matrix():
    f = builtin_paper4()
    h = eval_family(f, 0.5 + 0.25j)
    want = np.array([[1j, 1, 0, 0], [1, 0, 0.5 + 0.25j, 0], [0, 0.5 + 0.25j, 0, 1], [0, 0, 1, -1j]])
    np.testing.assert_array_equal(h, want)
    assert eval_family(f, np.zeros((3, 2))).shape == (3, 2, 4, 4)


def test_family_json_round_trip(tmp_path):
    f = builtin_paper4(J=2.0)
    path = tmp_path / "fam.json"
    import json
    path.write_text(json.dumps(f.to_json()))
    g = load_family(str(path))
    np.testing.assert_array_equal(eval_family(g, 0.7j), eval_family(f, 0.7j))
    assert family_from_json(f.to_json()).params == f.params


def test_load_family_missing(tmp_path):
    with pytest.raises(InvalidInputError):
        load_family(str(tmp_path / "nope.json"))


_leaf = st.one_of(
    st.sampled_from(["kappa", "J", "i"]),
    st.integers(min_value=0, max_value=9).map(str),
    st.floats(min_value=0.1, max_value=9.5, allow_nan=False).map(lambda x: f"{x:.3g}"),
)


def _expr(children):
    return st.one_of(
        st.tuples(children, st.sampled_from("+-*/"), children).map(lambda t: f"({t[0]}{t[1]}{t[2]})"),
        children.map(lambda c: f"-{c}"),
        st.tuples(st.sampled_from(["sin", "cos", "exp", "sqrt"]), children).map(lambda t: f"{t[0]}({t[1]})"),
        children.map(lambda c: f"({c})^2"),
    )


@settings(max_examples=300, deadline=None)
@given(st.recursive(_leaf, _expr, max_leaves=8))
def test_pretty_print_round_trip(src):
    e = parse_expr(src)
    again = parse_expr(pretty_print(e))
    assert again == e
    env = {"kappa": 0.3 + 0.2j, "J": 1.1}
    try:
        a = eval_expr(e, env)
    except EvaluationError:
        with pytest.raises(EvaluationError):
            eval_expr(again, env)
        return
    b = eval_expr(again, env)
    if cmath.isfinite(a):
        assert a == b

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cgoptics.errors import ExprSyntaxError
from cgoptics.expr import Bin, Call, Pow, Var, parse_expr, poly_terms, to_poly


def test_literal_i_and_power():
    e = parse_expr("x^2 + i*x")
    assert e(x=2.0) == pytest.approx(4 + 2j)
    assert np.imag(parse_expr("im(x^2 + i*x)")(x=2.0)) == 0
    assert parse_expr("im(x^2 + i*x)")(x=2.0) == pytest.approx(2.0)


def test_precedence():
    assert parse_expr("1+2*3")() == 7
    assert parse_expr("-2^2")() == -4
    assert parse_expr("2*3^2")() == 18
    assert parse_expr("(1+2)*3")() == 9
    assert parse_expr("8/4/2")() == 1
    assert parse_expr("2^-1")() == 0.5


def test_sin_node():
    e = parse_expr("1 + 0.3*sin(x)")
    assert isinstance(e.tree, Bin) and isinstance(e.tree.right.right, Call)
    assert e(x=0.0) == 1.0


def test_syntax_error_position():
    with pytest.raises(ExprSyntaxError) as info:
        parse_expr("1 + *")
    assert info.value.pos == 4
    assert info.value.column == 5


@pytest.mark.parametrize("bad", ["", "1 +", "(x", "foo", "x^y", "x^1.5", "sin x", "1 $ 2", "x)"])
def test_malformed(bad):
    with pytest.raises(ExprSyntaxError):
        parse_expr(bad)


def test_cubic_monomial():
    e = parse_expr("conj(u1)*u2^2")
    assert e.tree == Bin("*", Call("conj", Var("u1")), Pow(Var("u2"), 2))
    terms = poly_terms(e, 2)
    assert list(terms) == [((0, 2), (1, 0))]


def test_to_poly_matches_direct_evaluation(rng):
    exprs = [parse_expr("i*u1*conj(u1)*u1 + cos(x)*re(u2)"), parse_expr("exp(-t)*conj(u1)*u2^2 - 3")]
    P = to_poly(exprs, (2,), 2)
    t = rng.uniform(0, 1, 6)
    x = rng.normal(size=6)
    u = rng.normal(size=(6, 2)) + 1j * rng.normal(size=(6, 2))
    want = np.stack([1j * np.abs(u[:, 0]) ** 2 * u[:, 0] + np.cos(x) * u[:, 1].real,
                     np.exp(-t) * np.conj(u[:, 0]) * u[:, 1] ** 2 - 3], axis=-1)
    assert np.allclose(P(t, x, u), want, atol=1e-14)


def test_non_polynomial_rejected():
    with pytest.raises(ExprSyntaxError):
        poly_terms(parse_expr("sin(u1)"), 1)
    with pytest.raises(ExprSyntaxError):
        poly_terms(parse_expr("1/u1"), 1)


def test_fd_helper():
    e = parse_expr("sin(x)*t")
    assert e.fd("x", t=2.0, x=0.3) == pytest.approx(2 * np.cos(0.3), abs=1e-9)


_atoms = st.sampled_from(["x", "t", "i", "u1", "2", "0.5", "3.25"])


def _exprs():
    return st.recursive(
        _atoms,
        lambda s: st.one_of(
            st.tuples(s, st.sampled_from(["+", "-", "*", "/"]), s).map(lambda a: f"({a[0]}){a[1]}({a[2]})"),
            s.map(lambda a: f"-({a})"),
            st.tuples(s, st.integers(0, 3)).map(lambda a: f"({a[0]})^{a[1]}"),
            st.tuples(st.sampled_from(["sin", "cos", "exp", "re", "im", "conj"]), s)
            .map(lambda a: f"{a[0]}({a[1]})")),
        max_leaves=8)


@settings(max_examples=200, deadline=None)
@given(_exprs())
def test_pretty_print_round_trip(text):
    e = parse_expr(text)
    again = parse_expr(str(e))
    assert again == e
    env = {"x": 0.37, "t": 0.21, "u1": 0.4 - 0.3j}
    with np.errstate(all="ignore"):
        a, b = e(**env), again(**env)
    assert np.allclose(a, b, equal_nan=True)


def test_division_by_zero_is_total():
    v = parse_expr("x/(x-x)")(x=0.5)
    assert not np.isfinite(v)

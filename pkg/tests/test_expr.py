import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from almost_s.catalog import standard_chart
from almost_s.expr import (
    MAX_DEPTH,
    BinOp,
    Call,
    DepthError,
    DomainError,
    ExprSyntaxError,
    Neg,
    Num,
    Pow,
    UnknownIdentifierError,
    Var,
    depth,
    parse,
    parse_field,
    to_field,
    to_text,
)

from oracles import d_central

NAMES = ("x1", "y1", "z1")


def test_valid_expression():
    e = parse("0.1*sin(x1)", NAMES)
    assert e == BinOp("*", Num(0.1), Call("sin", Var("x1")))


@pytest.mark.parametrize(
    "text,err,offset",
    [
        ("sin(q)", UnknownIdentifierError, 4),
        ("1+*2", ExprSyntaxError, 2),
        ("", ExprSyntaxError, 0),
        ("x1^-1", ExprSyntaxError, 3),
        ("x1^1.5", ExprSyntaxError, 3),
        ("(x1", ExprSyntaxError, 3),
        ("x1)", ExprSyntaxError, 2),
        ("sin x1", ExprSyntaxError, 4),
        ("x1 $ 2", ExprSyntaxError, 3),
        ("é+x1", ExprSyntaxError, 0),
        ("x1+é", ExprSyntaxError, 3),
        ("é", ExprSyntaxError, 0),
    ],
)
def test_errors_and_offsets(text, err, offset):
    with pytest.raises(err) as info:
        parse(text, NAMES)
    assert info.value.offset == offset


def test_offsets_are_bytes():
    # the two-byte character shifts the offset of q by one extra byte
    with pytest.raises(ExprSyntaxError) as info:
        parse("x1 + ü", NAMES)
    assert info.value.offset == 5


def test_precedence_and_associativity():
    assert parse("1-2-3", NAMES) == BinOp("-", BinOp("-", Num(1), Num(2)), Num(3))
    assert parse("x1/y1*z1", NAMES) == BinOp("*", BinOp("/", Var("x1"), Var("y1")), Var("z1"))
    assert parse("-x1^2", NAMES) == Neg(Pow(Var("x1"), 2))
    assert parse("x1+y1*z1", NAMES) == BinOp("+", Var("x1"), BinOp("*", Var("y1"), Var("z1")))
    assert parse("x1^2^3", NAMES) == Pow(Pow(Var("x1"), 2), 3)


def test_depth_limit():
    ok = "(" * (MAX_DEPTH - 1) + "x1" + ")" * (MAX_DEPTH - 1)
    assert parse(ok, NAMES) == Var("x1")
    with pytest.raises(DepthError):
        parse("(" * (MAX_DEPTH + 1) + "x1" + ")" * (MAX_DEPTH + 1), NAMES)
    with pytest.raises(DepthError):
        parse("+".join(["x1"] * (MAX_DEPTH + 2)), NAMES)


def test_power_jet_values():
    f = to_field(parse("x1^2", NAMES), NAMES)
    j = f.jet(np.array([[3.0, 0.0, 0.0]]), 3)
    assert j.value[0] == 9.0
    assert j.parts[1][0, 0] == 6.0
    assert j.parts[2][0, 0, 0] == 2.0
    assert j.parts[3][0, 0, 0, 0] == 0.0


def test_domain_violation_echoes_point():
    f = to_field(parse("log(x1)", NAMES), NAMES)
    with pytest.raises(DomainError) as info:
        f.eval(np.array([[2.0, 0.0, 0.0], [-1.0, 0.5, 0.0]]))
    assert info.value.point == (-1.0, 0.5, 0.0)
    with pytest.raises(DomainError):
        to_field(parse("sqrt(y1)", NAMES), NAMES).jet(np.array([[0.0, -0.1, 0.0]]), 1)
    with pytest.raises(DomainError):
        to_field(parse("1/x1", NAMES), NAMES).eval(np.zeros((1, 3)))


def test_jets_match_finite_differences():
    f = to_field(parse("sin(x1)*y1", NAMES), NAMES)
    fn = lambda p: np.sin(p[0]) * p[1]
    rng = np.random.default_rng(0)
    for pt in rng.uniform(-1, 1, (50, 3)):
        j = f.jet(pt[None], 3)
        grad = np.array([d_central(fn, pt, k) for k in range(3)])
        hess = np.array([[d_central(lambda y: d_central(fn, y, b), pt, a) for b in range(3)] for a in range(3)])
        assert abs(j.value[0] - fn(pt)) < 1e-14
        assert np.abs(j.parts[1][0] - grad).max() < 1e-7
        assert np.abs(j.parts[2][0] - hess).max() < 1e-7


def test_parse_field_on_chart():
    chart = standard_chart(1, 1)
    f = parse_field("exp(z1)*cos(x1)", chart)
    np.testing.assert_allclose(f.eval(np.array([[0.0, 0.0, 1.0]])), [np.e])
    with pytest.raises(UnknownIdentifierError):
        parse_field("x2", chart)


# random trees --------------------------------------------------------------

leaves = st.one_of(
    st.sampled_from(NAMES).map(Var),
    st.floats(0, 10, allow_nan=False, allow_infinity=False).map(Num),
)


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from("+-*"), children, children).map(lambda t: BinOp(*t)),
        children.map(Neg),
        st.tuples(children, st.integers(0, 3)).map(lambda t: Pow(*t)),
        st.tuples(st.sampled_from(["sin", "cos", "exp"]), children).map(lambda t: Call(*t)),
    )


trees = st.recursive(leaves, _extend, max_leaves=12)


@settings(max_examples=150, deadline=None)
@given(trees)
def test_print_parse_roundtrip(tree):
    if depth(tree) > MAX_DEPTH:
        return
    again = parse(to_text(tree), NAMES)
    assert again == tree
    assert parse(to_text(again), NAMES) == again


@settings(max_examples=50, deadline=None)
@given(trees, trees)
def test_jets_are_linear(a, b):
    pts = np.array([[0.1, -0.2, 0.3], [0.5, 0.4, -0.6]])
    with np.errstate(over="ignore", invalid="ignore"):
        ja = to_field(a, NAMES).jet(pts, 3)
        jb = to_field(b, NAMES).jet(pts, 3)
        js = to_field(BinOp("+", a, b), NAMES).jet(pts, 3)
    for pa, pb, ps in zip(ja.parts, jb.parts, js.parts):
        np.testing.assert_array_equal(ps, pa + pb)

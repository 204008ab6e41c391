"""Expression-kernel tests: canonicalization, parsing, differentiation,
evaluation, compilation, and numeric equivalence."""

import math
from fractions import Fraction

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given

from herglotz import expr as ex
from herglotz.errors import (
    DomainError,
    ExprSyntaxError,
    OrderOutOfRange,
    UnboundCoordinate,
    UnknownVariable,
)
from herglotz.expr import Coordinate, ParseContext

from _oracles import central_derivative

jet = Coordinate.jet

COORDS = [jet(i, r) for i in range(2) for r in range(3)] + [ex.Z]
CTX = ParseContext(2, 2, max_order=2, allow_z=True)


# ---------------------------------------------------------------------------
# random-expression strategy (bounded and evaluation-safe)
# ---------------------------------------------------------------------------


def _bounded_exp(e):
    # exp of a bounded argument keeps evaluation in a safe range
    return ex.exp(ex.mul(ex.const(Fraction(1, 5)), ex.sin(e)))


def _bounded_log(e):
    # 2 + sin(...) stays in [1, 3]
    return ex.log(ex.add(ex.const(2), ex.sin(e)))


_ATOMS = st.one_of(
    st.sampled_from(COORDS).map(ex.var),
    st.integers(-3, 3).map(ex.const),
    st.sampled_from([Fraction(1, 2), Fraction(-1, 3), Fraction(2, 5)]).map(ex.const),
)


def _extend(children):
    pairs = st.tuples(children, children)
    return st.one_of(
        pairs.map(lambda ab: ex.add(*ab)),
        pairs.map(lambda ab: ex.mul(*ab)),
        pairs.map(lambda ab: ex.sub(*ab)),
        children.map(lambda e: ex.pw(e, 2)),
        children.map(ex.neg),
        children.map(ex.sin),
        children.map(ex.cos),
        children.map(_bounded_exp),
        children.map(_bounded_log),
    )


EXPRS = st.recursive(_ATOMS, _extend, max_leaves=8).map(ex.simplify)


def _point(e, seed):
    rng = np.random.default_rng(seed)
    return {c: float(v) for c, v in
            zip(sorted(e.free_coords()), rng.uniform(-1.5, 1.5, 64))}


# ---------------------------------------------------------------------------
# canonicalization and arithmetic
# ---------------------------------------------------------------------------


def test_constant_folding():
    assert ex.add(ex.const(2), ex.const(3)) == ex.const(5)
    assert ex.mul(ex.const(2), ex.const(Fraction(1, 2))) == ex.ONE
    assert ex.pw(ex.const(4), Fraction(1, 2)) == ex.const(2)
    assert ex.mul(ex.const(0), ex.var(jet(0, 1))) == ex.ZERO


def test_like_terms_merge():
    q = ex.var(jet(0, 0))
    assert ex.add(q, q) == ex.mul(ex.const(2), q)
    assert ex.sub(q, q) == ex.ZERO
    assert ex.mul(q, q) == ex.pw(q, 2)


def test_exp_products_merge():
    a, b = ex.var(jet(0, 0)), ex.var(jet(0, 1))
    merged = ex.simplify(ex.mul(ex.exp(a), ex.exp(b)))
    assert merged == ex.exp(ex.add(a, b))
    assert ex.simplify(ex.mul(ex.exp(a), ex.exp(ex.neg(a)))) == ex.ONE


def test_neg_div_normalize_away():
    ctx = CTX
    e = ex.simplify(ex.parse("-(q0_0/q0_1)", ctx))
    # canonical form uses Mul/Pow only
    stack, kinds = [e], set()
    while stack:
        node = stack.pop()
        kinds.add(type(node).__name__)
        stack.extend(getattr(node, "args", ()) or ())
        for attr in ("arg", "base", "num", "den"):
            child = getattr(node, attr, None)
            if child is not None:
                stack.append(child)
    assert "Neg" not in kinds and "Div" not in kinds


@given(EXPRS)
def test_simplify_idempotent(e):
    again = ex.simplify(e)
    assert again == e
    assert ex.render(again) == ex.render(e)


@given(EXPRS)
def test_render_parse_round_trip(e):
    text = ex.render(e)
    back = ex.parse(text, CTX)
    assert ex.equivalent(e, back)


# ---------------------------------------------------------------------------
# differentiation and evaluation
# ---------------------------------------------------------------------------


def test_differentiate_basics():
    q0, q1 = ex.var(jet(0, 0)), ex.var(jet(0, 1))
    e = ex.add(ex.mul(q0, q0, q1), ex.sin(q0))
    d = ex.differentiate(e, jet(0, 0))
    want = ex.add(ex.mul(ex.const(2), q0, q1), ex.cos(q0))
    assert ex.equivalent(d, want)
    assert ex.differentiate(e, jet(1, 0)) == ex.ZERO


@given(EXPRS, st.integers(0, 2**31 - 1))
def test_differentiate_matches_finite_difference(e, seed):
    frees = sorted(e.free_coords())
    if not frees:
        return
    c = frees[seed % len(frees)]
    point = _point(e, seed)
    sym = ex.evaluate(ex.differentiate(e, c), point)

    def slice_fn(v):
        p = dict(point)
        p[c] = v
        return ex.evaluate(e, p)

    fd = central_derivative(slice_fn, point[c], h=1e-3)
    assert abs(sym - fd) <= 1e-5 * max(1.0, abs(sym))


@given(EXPRS, st.integers(0, 2**31 - 1))
def test_compile_matches_evaluate(e, seed):
    coords = sorted(e.free_coords())
    point = _point(e, seed)
    fn = ex.compile_exprs([e], coords, "check")
    got = fn([point[c] for c in coords])[0]
    want = ex.evaluate(e, point)
    assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_evaluate_errors():
    e = ex.var(jet(0, 0))
    with pytest.raises(UnboundCoordinate):
        ex.evaluate(e, {})
    with pytest.raises(DomainError):
        ex.evaluate(ex.log(ex.var(jet(0, 0))), {jet(0, 0): -1.0})
    with pytest.raises(DomainError):
        ex.evaluate(ex.pw(ex.var(jet(0, 0)), -1), {jet(0, 0): 0.0})


def test_substitute():
    q0, q1 = ex.var(jet(0, 0)), ex.var(jet(0, 1))
    e = ex.add(ex.pw(q0, 2), q1)
    out = ex.substitute(e, {jet(0, 0): ex.sin(q1)})
    assert ex.equivalent(out, ex.add(ex.pw(ex.sin(q1), 2), q1))


# ---------------------------------------------------------------------------
# parsing: vocabulary and bounds
# ---------------------------------------------------------------------------


def test_parse_rejects_out_of_range_jets():
    with pytest.raises(OrderOutOfRange):
        ex.parse("q0_3", CTX)
    with pytest.raises(UnknownVariable):
        ex.parse("q5_0", CTX)


def test_parse_momenta_gate():
    with pytest.raises(UnknownVariable):
        ex.parse("p0_0", CTX)
    ctx = ParseContext(1, 2, allow_momenta=True)
    p = ex.parse("p1_0", ctx)
    assert ex.render(ex.simplify(p)) == "p1_0"
    with pytest.raises(OrderOutOfRange):
        ex.parse("p2_0", ctx)


def test_parse_z_gate_and_params():
    noz = ParseContext(1, 1, allow_z=False)
    with pytest.raises(UnknownVariable):
        ex.parse("z", noz)
    bounded = ParseContext(1, 1, params=("mass",))
    assert ex.parse("mass*q0_0", bounded) is not None
    with pytest.raises(UnknownVariable):
        ex.parse("other*q0_0", bounded)


def test_parse_syntax_errors():
    for bad in ("q0_0 +", "(q0_0", "q0_0 ** 2", "1..5", ""):
        with pytest.raises(ExprSyntaxError):
            ex.parse(bad, CTX)


def test_parse_power_and_precedence():
    e = ex.simplify(ex.parse("-q0_1^2", CTX))
    q1 = ex.var(jet(0, 1))
    assert e == ex.neg(ex.pw(q1, 2))  # unary minus binds looser than ^
    e2 = ex.simplify(ex.parse("2*q0_0^-2", CTX))
    assert ex.equivalent(e2, ex.mul(ex.const(2), ex.pw(ex.var(jet(0, 0)), -2)))
    with pytest.raises(ExprSyntaxError):
        ex.parse("q0_0^q0_1", CTX)  # exponents are rational constants


# ---------------------------------------------------------------------------
# numeric equivalence
# ---------------------------------------------------------------------------


def test_equivalent_positive_and_negative():
    a = ex.parse("sin(q0_0)^2 + cos(q0_0)^2", CTX)
    assert ex.equivalent(a, ex.ONE)
    assert not ex.equivalent(ex.parse("q0_0", CTX), ex.parse("q0_1", CTX))
    # equal up to a removable singularity is still equivalence sampling
    b1 = ex.parse("(q0_0^2 - 1)", CTX)
    b2 = ex.parse("(q0_0 - 1)*(q0_0 + 1)", CTX)
    assert ex.equivalent(b1, b2)


def test_equivalence_is_deterministic():
    a = ex.parse("exp(z)*q0_0", CTX)
    b = ex.parse("q0_0*exp(z)", CTX)
    assert all(ex.equivalent(a, b) for _ in range(3))


def test_free_coordinate_queries():
    e = ex.simplify(ex.parse("mass*q0_1 + z", ParseContext(1, 1)))
    frees = e.free_coords()
    names = {c.name for c in frees}
    assert names == {"mass", "q0_1", "z"}
    assert set(ex.free_params(e)) == {"mass"}
    assert ex.max_jet_order(e) == 1

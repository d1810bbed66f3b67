import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from jordanhydro.blocks import BlockStructure, MultiIndex
from jordanhydro.expr import (
    BindError,
    Bin,
    EvalError,
    FieldEvaluator,
    Neg,
    Num,
    ParseError,
    Var,
    compile_expr,
    differentiate,
    eval_jet,
    evaluate,
    free_variables,
    parameters,
    parse,
    substitute,
    to_text,
)
from jordanhydro.jet import DomainError, Jet, power, variables
from jordanhydro.taylor import Taylor

BS = BlockStructure([2, 1])


# Expressions that are smooth on the whole cube [0.5, 1.5]^3.
def _leaf():
    return st.sampled_from(["u1", "u2", "u3", "u1_2", "2", "0.5", "k"])


def _combine(children):
    unary = st.tuples(st.sampled_from(["sin({})", "cos({})", "exp({}/4)", "log(3 + sin({}))",
                                       "sqrt(2 + cos({}))", "-{}"]), children)
    binary = st.tuples(st.sampled_from(["({}) + ({})", "({}) - ({})", "({})*({})",
                                        "({})/(3 + cos({}))", "({})^2 + ({})"]),
                       children, children)
    return st.one_of(unary.map(lambda t: t[0].format(t[1])),
                     binary.map(lambda t: t[0].format(t[1], t[2], t[2])
                                if t[0].count("{}") == 3 else t[0].format(t[1], t[2])))


texts = st.recursive(_leaf(), _combine, max_leaves=8)
points = st.lists(st.floats(0.5, 1.5), min_size=3, max_size=3)
K = {"k": 1.7}


def test_precedence_and_associativity():
    assert parse("-u1^2") == Neg(Bin("^", Var(1), Num(2.0)))
    assert evaluate(parse("-u1^2", BS), [3.0, 0, 0]) == -9.0
    assert evaluate(parse("2^3^2", BS), [0, 0, 0]) == 2.0 ** 9
    assert evaluate(parse("8/4/2", BS), [0, 0, 0]) == 1.0
    assert evaluate(parse("1 - 2 - 3", BS), [0, 0, 0]) == -4.0
    assert evaluate(parse("2*-u2", BS), [0, 5.0, 0]) == -10.0


def test_block_aliases_bind_to_flat():
    assert parse("u1_2", BS) == Var(3)
    assert free_variables(parse("u2_1 + k*u1_2"), BS) == {MultiIndex(2, 1), MultiIndex(1, 2)}
    assert free_variables(parse("u1 + 0*u2", BS)) == {1}
    assert parameters(parse("a*u1 + sin(b)")) == {"a", "b"}


@pytest.mark.parametrize("text, offset", [("u1 +", 4), ("(u1", 3), ("u1 $ 2", 3),
                                          ("sin(u1, u2)", 0), ("", 0), ("u1 + é", 5)])
def test_parse_error_offsets(text, offset):
    with pytest.raises(ParseError) as info:
        parse(text)
    assert info.value.offset == offset
    assert "byte offset" in str(info.value)


def test_bind_errors():
    with pytest.raises(BindError):
        parse("u4", BS)
    with pytest.raises(BindError):
        parse("u2_2", BS)
    with pytest.raises(BindError):
        parse("q*u1", BS, params=["k"])
    with pytest.raises(BindError):
        compile_expr(parse("q*u1", BS))


def test_domain_errors_name_subexpression():
    with pytest.raises(EvalError) as info:
        evaluate(parse("1 + log(u1 - 2)", BS), [1.0, 0, 0])
    assert info.value.subexpr == "log(u1-2)"
    with pytest.raises(EvalError):
        evaluate(parse("u2/u1", BS), [0.0, 1.0, 0])
    with pytest.raises(EvalError):
        evaluate(parse("u1^0.5", BS), [-1.0, 0, 0])
    with pytest.raises(DomainError):
        power(Jet.variable(0.0, 0, 1), 0.5)


def test_substitute_folds():
    e = substitute(parse("k*u1 + u2", BS), {"k": 0.0, 2: 3.0})
    assert to_text(e) == "3"


@given(texts)
def test_print_parse_fixed_point(text):
    e = parse(text, BS)
    assert parse(to_text(e), BS) == e


@given(texts, points)
def test_derivative_matches_finite_difference(text, p):
    e = parse(text, BS)
    f = compile_expr(e, K)
    for k in range(3):
        d = evaluate(differentiate(e, k + 1), p, K)
        h = 1e-5
        up, dn = list(p), list(p)
        up[k] += h
        dn[k] -= h
        fd = (f(up) - f(dn)) / (2 * h)
        assert abs(d - fd) <= 1e-5 * (1 + abs(d))


@given(texts, points)
def test_jets_agree_with_symbolic(text, p):
    e = parse(text, BS)
    jet = eval_jet(e, p, 2, K)
    through = compile_expr(e, K)(variables(p, 2))
    if not isinstance(through, Jet):  # constant expression
        through = Jet.constant(through, 3, 2)
    assert abs(jet.value - through.value) <= 1e-12 * (1 + abs(jet.value))
    assert np.allclose(jet.grad, through.grad, rtol=1e-10, atol=1e-10)
    assert np.allclose(jet.hess, through.hess, rtol=1e-9, atol=1e-9)


def _sympy(text):
    u1, u2, u3 = sp.symbols("u1 u2 u3")
    return sp.sympify(text.replace("^", "**").replace("u1_2", "u3"),
                      locals={"k": sp.Float(K["k"]), "u1": u1, "u2": u2, "u3": u3}), (u1, u2, u3)


@given(texts, points)
def test_taylor_matches_sympy(text, p):
    e = parse(text, BS)
    ref, syms = _sympy(text)
    order = 3
    t = compile_expr(e, K)([Taylor.variable(v, j, 3, order) for j, v in enumerate(p)])
    if not isinstance(t, Taylor):  # constant expression
        t = Taylor.constant(float(t), 3, order)
    at = dict(zip(syms, p))
    for a in [(0, 0, 0), (1, 0, 0), (0, 2, 0), (1, 1, 1), (2, 0, 1), (0, 0, 3)]:
        d = ref
        for s, m in zip(syms, a):
            if m:
                d = sp.diff(d, s, m)
        want = float(d.evalf(subs=at))
        assert abs(t.derivative(a) - want) <= 1e-8 * (1 + abs(want))


def test_taylor_partial_and_truncate():
    x = Taylor.variable(0.3, 0, 2, 4)
    y = Taylor.variable(-0.2, 1, 2, 4)
    f = (x * x * y + 2.0) / (1.0 + y)
    assert f.truncate(2).K == 2
    assert math.isclose(f.partial(0).value, f.derivative((1, 0)))
    assert math.isclose(f.partial(1).partial(0).value, f.derivative((1, 1)))
    with pytest.raises(ValueError):
        Taylor.constant(1.0, 2, 0).partial(0)


def test_field_evaluator_chain_rule():
    ev = FieldEvaluator([parse("u1*u2 + sin(u1_2)", BS), parse("exp(u2)", BS)], 3)
    p = [0.4, 0.7, 1.1]
    vals, J = ev.at(variables(p, 1))
    assert np.allclose([v.value for v in vals], ev.values(p))
    assert np.allclose(J[0][0].grad, ev.hessians(p)[0, 0])

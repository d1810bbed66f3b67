import numpy as np
import pytest
from hypothesis import given, strategies as st

from jordanhydro.blocks import BlockStructure, mult_operator
from jordanhydro.connection import DefiningField
from jordanhydro.darboux import InitialData
from jordanhydro.expr import parse
from jordanhydro.metric import (
    CascadeThetaField,
    SingularMetricError,
    ThetaField,
    check_ch_sym,
    check_DN1,
    check_DN2,
    check_eq_for_g,
    check_reduced,
    hankel_metric,
    jb3_flat_family,
    jb3_theta,
    riemann_of_metric,
    theta_label,
    theta_system,
)

JB3 = BlockStructure([3])
layouts = st.sampled_from([[1], [2], [3], [4], [5], [6], [2, 1], [3, 3], [4, 2], [2, 2, 2],
                           [3, 2, 1]])


@st.composite
def generators(draw):
    bs = BlockStructure(draw(layouts))
    theta = draw(st.lists(st.floats(-3, 3), min_size=bs.n, max_size=bs.n))
    for a in range(1, bs.r + 1):
        k = bs.pos(bs.size(a), a)
        theta[k] = draw(st.sampled_from([-1, 1])) * draw(st.floats(0.5, 3))
    return bs, np.array(theta)


@given(generators())
def test_hankel_inverse(args):
    bs, theta = args
    g, gi = hankel_metric(bs, theta).values()
    assert np.allclose(g, g.T)
    assert np.allclose(g @ gi, np.eye(bs.n), atol=1e-9 * max(1.0, np.max(np.abs(gi))) ** 2)
    assert np.allclose(g, np.einsum("sij,s->ij", bs.structure_constants, theta))


@given(generators(), st.data())
def test_dn1_holds_for_every_toeplitz_operator(args, data):
    bs, theta = args
    X = data.draw(st.lists(st.floats(-3, 3), min_size=bs.n, max_size=bs.n))
    g, _ = hankel_metric(bs, theta).values()
    assert check_DN1(g, mult_operator(bs, X)) <= 1e-12


def test_singular_hankel():
    with pytest.raises(SingularMetricError):
        hankel_metric(JB3, [1.0, 2.0, 0.0])
    with pytest.raises(ValueError):
        hankel_metric(JB3, [1.0, 2.0])


def jb3(eps=3.0):
    return DefiningField.from_strings([3], ["u1 - eps*u1", "u2", "u3"], {"eps": eps})


F = [parse(s, JB3) for s in ("1 + u1^2", "u1*u2", "sin(u1) + u2")]


def test_equivalent_formulations_agree():
    p = [1.3, 1.2, 0.7]
    good = ThetaField(JB3, jb3_theta(*F, 3.0))
    bad_exprs = jb3_theta(*F, 3.0)
    bad_exprs[0] = parse(f"({bad_exprs[0]}) + u2*u3", JB3)
    bad = ThetaField(JB3, bad_exprs)
    for th, ok in ((good, True), (bad, False)):
        vals = [check_DN2(th, jb3(), p), check_eq_for_g(th, jb3(), p),
                max(check_ch_sym(th, jb3(), p).values())]
        assert all((v <= 1e-9) == ok for v in vals), vals
    # the contracted form is only necessary; it must still pass on a true metric
    assert check_reduced(good, jb3(), p) <= 1e-9


def test_theta_cascade_matches_closed_form():
    df = jb3(2.5)
    exprs = jb3_theta(*F, 2.5)
    system = theta_system(df)
    field = {theta_label(i, 1): exprs[i - 1] for i in (1, 2, 3)}
    data = InitialData.from_field(system, field, (1.0, 1.0, 0.5))
    th = CascadeThetaField(df, data, 5e-3)
    p = [1.2, 1.3, 0.9]
    want = ThetaField(JB3, exprs)(p)
    assert np.max(np.abs(np.array([float(x) for x in th(p)]) - np.array(want))) <= 1e-6


def test_flat_family_only_for_eps_three():
    with pytest.raises(ValueError):
        jb3_flat_family(*[parse("u1", JB3)] * 5, eps=2.0)
    th = ThetaField(JB3, jb3_flat_family(*[parse(s, JB3) for s in
                                           ("2 + u1", "u1^2", "cos(u1)", "1", "u1")]))
    assert riemann_of_metric(JB3, th, [1.1, 1.7, 0.4]).max_abs() <= 1e-8


def test_theta_argument_checks():
    with pytest.raises(ValueError):
        jb3_theta(parse("u2", JB3), F[1], F[2], 3.0)

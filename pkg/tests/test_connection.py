import numpy as np
import pytest
from hypothesis import given, strategies as st

from jordanhydro.blocks import BlockStructure
from jordanhydro.connection import (
    DefiningField,
    NotDarbouxTsarevError,
    SingularConfigurationError,
    bianchi_residual,
    check_3RC,
    check_structural_lemmas,
    christoffel,
    christoffel_jet,
    dnabla_V_residual,
    jb3_necessary_conditions,
    nabla_e_residual,
    riemann,
    skew_nabla_c,
    tensor_json,
)

coef = st.floats(-0.3, 0.3)


@st.composite
def dt_fields(draw):
    """Darboux-Tsarev fields regular on [0.5, 1.5]^n: X^{i(a)} uses only u^{l(s)}, l <= i."""
    bs = BlockStructure(draw(st.sampled_from([[2], [3], [4], [2, 1], [2, 2], [3, 1], [1, 1, 1]])))
    comps = []
    for k in range(1, bs.n + 1):
        mi = bs.multi_index(k)
        allowed = [f"u{x.i}_{x.alpha}" for x in bs.indices() if x.i <= mi.i]
        v1 = draw(st.sampled_from(allowed))
        v2 = draw(st.sampled_from(allowed))
        base = {1: f"{3 * mi.alpha}", 2: "1"}.get(mi.i, "0")
        comps.append(f"{base} + {draw(coef)}*sin({v1}) + {draw(coef)}*{v1}*{v2}")
    point = draw(st.lists(st.floats(0.5, 1.5), min_size=bs.n, max_size=bs.n))
    return DefiningField.from_strings(bs.sizes, comps), np.array(point)


@given(dt_fields())
def test_defining_properties(args):
    df, p = args
    t = christoffel(df, p)
    g = t.gamma
    assert np.max(np.abs(g - np.swapaxes(g, 1, 2))) <= 1e-12
    assert nabla_e_residual(df.bs, g) <= 1e-12
    assert dnabla_V_residual(df, p, t) <= 1e-9
    assert np.max(np.abs(skew_nabla_c(df.bs, g))) <= 1e-9


@given(dt_fields())
def test_jet_derivatives_match_finite_differences(args):
    df, p = args
    t = christoffel_jet(df, p)
    h = 1e-5
    for k in range(df.bs.n):
        e = np.zeros(df.bs.n)
        e[k] = h
        fd = (christoffel(df, p + e).gamma - christoffel(df, p - e).gamma) / (2 * h)
        assert np.allclose(t.dgamma[..., k], fd, atol=1e-6)


@given(dt_fields())
def test_curvature_symmetries_and_lemmas(args):
    df, p = args
    R = riemann(df, p)
    assert R.antisymmetry_residual() <= 1e-10
    assert bianchi_residual(R.R) <= 1e-9
    report = check_structural_lemmas(df, p)
    assert report.passed, [f.as_dict() for f in report.failures()]


def test_integrable_example_satisfies_3rc():
    df = DefiningField.from_strings([3], ["u1 - eps*u1", "u2", "u3"], {"eps": 3.0})
    assert check_3RC(df, [1.2, 1.4, 0.7]) <= 1e-12


def test_singular_points_raise():
    df = DefiningField.from_strings([2, 1], ["u1", "u2", "u1_2"])
    with pytest.raises(SingularConfigurationError):
        christoffel(df, [1.0, 1.0, 1.0])  # equal eigenvalues
    with pytest.raises(SingularConfigurationError):
        christoffel(df, [1.0, 0.0, 2.0])  # X^2 = 0


def test_dependence_check():
    df = DefiningField.from_strings([3], ["u1 + u2", "u2", "u3"])
    assert [(str(a), str(b)) for a, b in df.dependence_violations()] == [("1(1)", "2(1)")]
    with pytest.raises(NotDarbouxTsarevError):
        df.require_darboux_tsarev()
    with pytest.raises(ValueError):
        jb3_necessary_conditions(DefiningField.from_strings([2], ["u1", "u2"]), [1, 1])
    with pytest.raises(ValueError):
        DefiningField.from_strings([2], ["u1"])


def test_tensor_json_lists_nonzero_entries():
    df = DefiningField.from_strings([3], ["u1 - 3*u1", "u2", "u3"])
    text = tensor_json(df.bs, [1.0, 2.0, 3.0], christoffel(df, [1.0, 2.0, 3.0]).gamma)
    assert '"2(1)"' in text

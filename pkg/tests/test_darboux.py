import math

import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from jordanhydro.blocks import BlockStructure
from jordanhydro.darboux import (
    InitialData,
    IntegrationError,
    PfaffianSystem,
    check_compatibility,
    integrate,
    path_independence_test,
    rhs_values,
    system_residual,
)
from jordanhydro.expr import parse

BS = BlockStructure([2])


def toy(coupled=False):
    """d_2 w = u1 w (exact solution f(u1) exp(u1 (u2 - b2))); optionally v with d_2 v = w."""
    rhs = {("w", 2): lambda fr: fr.u[0] * fr.value("w")}
    unknowns, layers = ("w",), None
    if coupled:
        rhs[("v", 2)] = lambda fr: fr.value("w") + fr.d("w", 1)
        unknowns, layers = ("w", "v"), (("w",), ("v",))
    return PfaffianSystem(BS, unknowns, rhs, layers=layers)


def data(f="1 + u1^2", g="0"):
    return InitialData((1.0, 1.0), {"w": parse(f, BS), "v": parse(g, BS)})


def test_matches_exact_solution():
    sys_ = toy()
    for target in ([1.3, 1.4], [0.8, 0.6]):
        sol = integrate(sys_, data(), target, 1e-2)
        u1, u2 = target
        exact = (1 + u1 ** 2) * math.exp(u1 * (u2 - 1.0))
        assert abs(sol.values["w"] - exact) <= 1e-9


def test_layer_differentiates_layer_above():
    # v = int (w + d_1 w) du2, with d_1 w carried as a Taylor coefficient
    sol = integrate(toy(True), data(), [1.2, 1.5], 1e-2)
    a, b = sp.symbols("a b")
    w = (1 + a ** 2) * sp.exp(a * (b - 1))
    ref = float(sp.Integral((w + sp.diff(w, a)).subs(a, 1.2), (b, 1, 1.5)).evalf(20))
    assert abs(sol.values["v"] - ref) <= 1e-6


@settings(max_examples=15)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_linearity_in_initial_data(a, b):
    sys_ = toy(True)
    d1 = data(f"{a}*u1 + 1", "u1")
    d2 = data(f"sin(u1) + {b}", f"{b}*u1^2")
    target = [1.2, 1.3]
    s1, s2 = integrate(sys_, d1, target), integrate(sys_, d2, target)
    s12 = integrate(sys_, d1 + d2, target)
    for k in ("w", "v"):
        assert abs(s12.values[k] - s1.values[k] - s2.values[k]) <= 1e-10 * (1 + abs(s12.values[k]))


def test_compatibility_and_path_independence():
    sys_ = toy(True)
    assert check_compatibility(sys_, data(), [1.2, 1.3])["residual"] <= 1e-6
    assert path_independence_test(sys_, data(), [1.2, 1.3]).discrepancy <= 1e-8


def test_system_residual_of_exact_solution():
    field = {"w": parse("(1 + u1^2)*exp(u1*(u2 - 1))", BS)}
    assert system_residual(toy(), field, [1.1, 0.9])["residual"] <= 1e-12
    wrong = {"w": parse("(1 + u1^2)*exp(u2 - 1)", BS)}
    assert system_residual(toy(), wrong, [1.1, 0.9])["residual"] > 1e-3


def test_rhs_values():
    assert rhs_values(toy(), [2.0, 0.0], {"w": 3.0}) == {("w", 2): 6.0}


def test_error_paths():
    with pytest.raises(ValueError, match="leading run"):
        PfaffianSystem(BS, ("w",), {("w", 1): lambda fr: 0.0})
    with pytest.raises(ValueError, match="duplicate"):
        PfaffianSystem(BS, ("w", "w"), {})
    with pytest.raises(ValueError):
        PfaffianSystem(BS, ("w",), {("w", 3): lambda fr: 0.0})
    with pytest.raises(ValueError, match="no initial data"):
        integrate(toy(), InitialData((1.0, 1.0), {}), [1.2, 1.2])
    with pytest.raises(ValueError, match="not a free direction"):
        integrate(toy(), InitialData((1.0, 1.0), {"w": parse("u2", BS)}), [1.2, 1.2])
    loop = PfaffianSystem(BS, ("w",), {("w", 2): lambda fr: fr.d("w", 2)})
    with pytest.raises(IntegrationError, match="refers to itself"):
        integrate(loop, data(), [1.2, 1.2])
    with pytest.raises(ValueError, match="base points"):
        data() + InitialData((0.0, 0.0), {"w": parse("1", BS), "v": parse("1", BS)})

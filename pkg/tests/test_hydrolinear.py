import math

import numpy as np
import pytest
from hypothesis import given

from conftest import DATA
from jordanhydro.blocks import BlockStructure, unit_vector
from jordanhydro.config import load_config
from jordanhydro.connection import DefiningField, christoffel, dnabla_residual
from jordanhydro.darboux import InitialData
from jordanhydro.expr import FieldEvaluator, parse
from jordanhydro.hydrolinear import (
    ClosednessError,
    adaptive_simpson,
    closedness_residual,
    conservation_system,
    hessian_density_residual,
    jb3_omega,
    jb3_omega_data,
    jb3_omega_exprs,
    jb3_symmetry_oracle,
    omega_label,
    potential_of,
    solve_conservation,
    solve_symmetry,
    symmetry_label,
    symmetry_residual,
    symmetry_system,
)
from test_connection import dt_fields

JB3 = BlockStructure([3])


def jb3(eps=3.0):
    return DefiningField.from_strings([3], ["u1 - eps*u1", "u2", "u3"], {"eps": eps})


@given(dt_fields())
def test_unit_and_flow_are_symmetries(args):
    df, p = args
    g = christoffel(df, p).gamma
    n = df.bs.n
    assert dnabla_residual(df.bs, g, unit_vector(df.bs), np.zeros((n, n))) <= 1e-12
    assert dnabla_residual(df.bs, g, df.values(p), df.jacobian(p)) <= 1e-9


@pytest.mark.parametrize("name, step", [("jb3", 5e-3), ("blocks21", 0.05), ("blocks22", 0.05)])
def test_cascade_reproduces_the_flow(name, step):
    # Y = X solves the symmetry system, so data cut from X must integrate back to X
    cfg = load_config(DATA / f"{name}.toml")
    df = DefiningField(cfg.bs, cfg.vector_field, cfg.parameters)
    system = symmetry_system(df)
    lo = np.array([b[0] for b in cfg.check.box])
    hi = np.array([b[1] for b in cfg.check.box])
    base, target = lo + 0.3 * (hi - lo), lo + 0.6 * (hi - lo)
    field = {symmetry_label(k.i, k.alpha): e for k, e in zip(df.bs.indices(), df.X)}
    data = InitialData.from_field(system, field, base, df.params)
    Y, sol = solve_symmetry(df, data, target, step)
    assert np.max(np.abs(Y - df.values(target))) <= 1e-7
    assert symmetry_residual(df, sol) <= 1e-7


def test_conservation_cascade_matches_closed_form():
    df = jb3()
    F1, F2, F3 = parse("1 + u1^2", JB3), parse("sin(u1)", JB3), parse("u1", JB3)
    data = InitialData((1.0, 1.0, 0.5), jb3_omega_data(F1, F2, F3, 3.0, 0.5))
    target = [1.3, 1.4, 0.9]
    w, sol = solve_conservation(df, data, target, 5e-3)
    assert np.max(np.abs(w - jb3_omega(F1, F2, F3, 3.0, target))) <= 1e-7
    labels = [omega_label(i, 1) for i in (1, 2, 3)]
    r, _ = closedness_residual(np.array([sol.grad(a) for a in labels]))
    assert r <= 1e-6


def test_density_control():
    assert hessian_density_residual(jb3(), parse("u3^2", JB3), [1.2, 1.3, 0.8]) > 1e-3
    with pytest.raises(ValueError):
        jb3_omega_exprs(parse("1", JB3), parse("1", JB3), parse("1", JB3), 2.0)


def test_potential_of_gradient():
    h = parse("u1^2*u2 + sin(u3)", JB3)
    ev = FieldEvaluator([h], 3)
    base, point = [0.2, 0.3, 0.1], [1.1, -0.4, 0.9]
    got = potential_of(lambda q: ev.jacobian(q)[0], base, point,
                       lambda q: ev.hessians(q)[0])
    assert abs(got - (ev.values(point)[0] - ev.values(base)[0])) <= 1e-12


def test_potential_of_rejects_non_closed():
    with pytest.raises(ClosednessError) as info:
        potential_of(lambda q: np.array([q[1], 0.0, 0.0]), [0, 0, 0], [1, 1, 1],
                     lambda q: np.array([[0, 1.0, 0], [0, 0, 0], [0, 0, 0]]))
    assert set(info.value.pair) == {1, 2}


def test_adaptive_simpson():
    assert abs(adaptive_simpson(math.exp, 0.0, 1.0) - (math.e - 1)) <= 1e-10
    assert adaptive_simpson(math.cos, 0.5, 0.5) == 0.0


def test_symmetry_oracle_needs_jb3_shape():
    F = parse("u1", JB3)
    with pytest.raises(ValueError):
        jb3_symmetry_oracle(F, F, F, DefiningField.from_strings([2], ["u1", "u2"]), [1, 1])
    with pytest.raises(ValueError):
        jb3_symmetry_oracle(F, F, F, DefiningField.from_strings([3], ["u1", "u2", "u3^2"]),
                            [1, 1, 1])


def test_conservation_system_layers():
    system = conservation_system(jb3())
    assert system.free(omega_label(3, 1)) == (1,)
    assert len(system.layers) == 3

import numpy as np
import pytest

from jordanhydro.connection import DefiningField
from jordanhydro.hodograph import (
    DegeneratePointError,
    HodographProblem,
    NoConvergenceError,
    NotASymmetryError,
    SymmetryField,
    sample_grid,
    solve_point,
    velocity_form,
    verify_pde,
)

SCALAR = DefiningField.from_strings([1], ["u1"])  # u_t = u u_x


def test_scalar_velocity_form():
    # x + t u - u^3 = 0
    prob = velocity_form(SCALAR, ["u1^3 + 2*u1"])
    sol = solve_point(prob, 0.5, {"t": 0.3, "w": -1.0}, [1.0])
    u = sol.u[0]
    assert abs(0.5 + 0.3 * u - u ** 3 - 2 * u) <= 1e-12
    assert sol.history[-1] == sol.residual


def test_scalar_grid_satisfies_pde():
    prob = velocity_form(SCALAR, ["u1^3 + 2*u1"])
    xs = np.linspace(0.0, 0.4, 21)
    ts = np.linspace(0.0, 0.4, 21)
    s = sample_grid(prob, xs, ts, [0.1], [0.0, -1.0], vary=0)
    assert not s.holes
    rep = verify_pde(prob, s, xs[1] - xs[0], ts[1] - ts[0])
    assert rep["residual"] <= 1e-4
    again = sample_grid(prob, xs, ts, [0.1], [0.0, -1.0], vary=0)
    assert s.to_csv() == again.to_csv()


def test_degenerate_and_divergent_points():
    prob = HodographProblem(SCALAR, [SymmetryField.from_field(SCALAR),
                                     SymmetryField.from_strings("w", SCALAR.bs, ["u1^2"])])
    with pytest.raises(DegeneratePointError):
        solve_point(prob, 1.0, [2.0, -1.0], [1.0])  # M = t - 2u = 0
    boxed = HodographProblem(SCALAR, prob.symmetries, region=[(0.9, 1.1)])
    with pytest.raises(NoConvergenceError):
        solve_point(boxed, 5.0, [1.0, -1.0], [1.0])


def test_holes_are_recorded():
    prob = HodographProblem(SCALAR, [SymmetryField.from_field(SCALAR),
                                     SymmetryField.from_strings("w", SCALAR.bs, ["u1^2"])],
                            region=[(0.0, 10.0)])
    # x + t u - u^2 = 0 has no real root once x < -t^2/4
    s = sample_grid(prob, [0.0, -5.0], [1.0], [0.9], [1.0, -1.0])
    assert len(s.holes) == 1 and s.holes[0]["i"] == 1
    assert "x" in s.to_csv().splitlines()[0] and len(s.to_csv().splitlines()) == 2


def test_problem_validation():
    jb3 = DefiningField.from_strings([3], ["u1 - 3*u1", "u2", "u3"])
    fake = SymmetryField.from_strings("y", jb3.bs, ["u3", "0", "0"])
    assert fake.residual(jb3, [1.2, 1.1, 0.5]) > 1e-3
    with pytest.raises(NotASymmetryError):
        HodographProblem(jb3, [fake], check_points=[[1.2, 1.1, 0.5]])
    flow = SymmetryField.from_field(jb3)
    with pytest.raises(ValueError):
        HodographProblem(jb3, [flow, flow])
    with pytest.raises(ValueError):
        HodographProblem(jb3, [])
    prob = HodographProblem(jb3, [flow], check_points=[[1.2, 1.1, 0.5]])
    with pytest.raises(ValueError):
        solve_point(prob, 0.0, [1.0, 2.0], [1.2, 1.1, 0.5])

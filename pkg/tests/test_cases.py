import dataclasses

import numpy as np
import pytest
import sympy as sym

from axistokes.cases import (
    CaseVerificationError,
    catalog,
    get_case,
    verify_case,
    weighted_mean,
    weighted_mean_shift,
)
from axistokes.mesh import classify, generate_unit_square_mesh
from axistokes.spaces import (
    build_spaces,
    element_geometry,
    evaluate_velocity,
    interpolate_field,
    reference_to_physical,
)

r, z, nu = sym.symbols("r z nu", positive=True)
SYMBOLIC = {
    "ex1": ((r, -2 * z), r ** sym.Rational(7, 4) + z**2),
    "ex2": ((r**3 * sym.sin(z), 4 * r**2 * sym.cos(z)), sym.sin(sym.pi * (r**2 + z**2))),
    "ex3": (
        (r ** sym.Rational(21, 10), -sym.Rational(31, 10) * r ** sym.Rational(11, 10) * z),
        sym.sqrt(r) - sym.Rational(8, 9),
    ),
}


def symbolic_load(u, p):
    ur, uz = u
    lap = lambda w: sym.diff(w, r, 2) + sym.diff(w, z, 2) + sym.diff(w, r) / r  # noqa: E731
    fr = -nu * (lap(ur) - ur / r**2) + sym.diff(p, r)
    fz = -nu * lap(uz) + sym.diff(p, z)
    return fr, fz


SAMPLES = np.random.default_rng(11).uniform(0.05, 0.95, size=(25, 2))


def at_samples(value):
    """Broadcast a lambdified scalar expression to one float per sample."""
    return np.broadcast_to(np.asarray(value, dtype=float), (len(SAMPLES),))


@pytest.mark.parametrize("name", ["ex1", "ex2", "ex3"])
def test_closed_forms_agree_with_symbolic_derivation(name):
    case = get_case(name)
    u, p = SYMBOLIC[name]
    fr, fz = symbolic_load(u, p)
    f_num = sym.lambdify((r, z, nu), (fr, fz), "numpy")
    grad_num = sym.lambdify((r, z), [[sym.diff(c, v) for v in (r, z)] for c in u], "numpy")
    div_num = sym.lambdify((r, z), sym.simplify(sym.diff(u[0], r) + u[0] / r + sym.diff(u[1], z)), "numpy")
    for viscosity in (1.0, 1e-3):
        expected = np.stack([at_samples(c) for c in f_num(SAMPLES[:, 0], SAMPLES[:, 1], viscosity)], -1)
        np.testing.assert_allclose(case.f(viscosity)(SAMPLES), expected, rtol=1e-12, atol=1e-12)
    g = grad_num(SAMPLES[:, 0], SAMPLES[:, 1])
    for c in range(2):
        for d in range(2):
            np.testing.assert_allclose(case.grad_u(SAMPLES)[:, c, d], at_samples(g[c][d]), rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose(at_samples(div_num(SAMPLES[:, 0], SAMPLES[:, 1])), 0.0, atol=1e-13)


@pytest.mark.parametrize("case", catalog(), ids=lambda c: c.name)
def test_finite_difference_gate_accepts_every_case(case):
    for viscosity in (1.0, 1e-4):
        res = verify_case(case, viscosity)
        assert res["f"] <= 1e-5 and res["grad_u"] <= 1e-5


def test_finite_difference_gate_catches_a_wrong_load():
    good = get_case("ex2")
    bad = dataclasses.replace(good, name="broken", f_visc=lambda x: 1.01 * good.f_visc(x))
    with pytest.raises(CaseVerificationError, match="f check failed"):
        verify_case(bad)


def test_unknown_case_name():
    with pytest.raises(KeyError, match="ex1, ex2, ex3"):
        get_case("ex4")


def test_weighted_mean_of_ex3_pressure():
    # int r sqrt(r) / int r = (2/5) / (1/2)
    m = generate_unit_square_mesh(4)
    assert weighted_mean(get_case("ex3").p, m, order=30) == pytest.approx(4 / 5 - 8 / 9, abs=1e-6)


def test_mean_shift_removes_constants_and_is_idempotent():
    m = generate_unit_square_mesh(3, jitter=0.2, seed=2)
    const = weighted_mean_shift(lambda x: np.full(x.shape[:-1], 7.5), m)
    assert const.shift == pytest.approx(7.5, rel=1e-14)
    assert np.all(np.abs(const(SAMPLES)) <= 1e-13)
    shifted = weighted_mean_shift(get_case("ex2"), m)
    assert weighted_mean(shifted, m) == pytest.approx(0.0, abs=1e-14)
    again = weighted_mean_shift(shifted, m)
    assert abs(again.shift) <= 1e-14


def test_ex1_velocity_is_in_the_discrete_space():
    m = generate_unit_square_mesh(4, jitter=0.2, seed=9)
    vs, _ = build_spaces(m, classify(m))
    case = get_case("ex1")
    c = interpolate_field(vs, case.u)
    pts = np.random.default_rng(3).dirichlet([1, 1, 1], size=50)[:, 1:]
    tris = np.arange(m.n_triangles)
    vals, grads = evaluate_velocity(vs, c, tris, pts)
    x = reference_to_physical(element_geometry(m, tris), pts)
    np.testing.assert_allclose(vals, case.u(x), atol=1e-13)
    np.testing.assert_allclose(grads, case.grad_u(x), atol=1e-12)

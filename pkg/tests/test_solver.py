import numpy as np
import pytest

from axistokes import solver
from axistokes.assembly import assemble_system, eliminate_constraints
from axistokes.cases import get_case
from axistokes.hdiv import reconstruction
from axistokes.mesh import Mesh, classify, generate_unit_square_mesh
from axistokes.solver import (
    RESIDUAL_TOL,
    SolverError,
    discrete_divergence_residual,
    factorize,
    solve_stokes,
)
from axistokes.spaces import apply_dirichlet, build_spaces


def bump_load(x):
    r, z = x[..., 0], x[..., 1]
    return np.stack([np.sin(3 * z) * r, np.cos(2 * r) + z**2], -1)


def reduced(n=4, jitter=0.2, seed=1, g=None, f=bump_load, nu=1.0, variant="identity", mesh=None):
    m = mesh if mesh is not None else generate_unit_square_mesh(n, jitter=jitter, seed=seed)
    vs, ps = build_spaces(m, classify(m))
    vs = apply_dirichlet(vs, g)
    return eliminate_constraints(assemble_system(vs, ps, reconstruction(vs, variant), f, nu))


def test_zero_data_gives_zero_solution():
    sol = solve_stokes(reduced(f=lambda x: np.zeros(x.shape)))
    assert not np.any(sol.u) and not np.any(sol.p) and sol.multiplier == 0.0


def test_solution_satisfies_the_discrete_equations():
    system = reduced(8, nu=1e-3, g=get_case("ex2").u)
    sol = solve_stokes(system)
    assert sol.residual <= RESIDUAL_TOL
    assert discrete_divergence_residual(sol, system) <= 1e-9
    assert abs(sol.p @ system.m) <= 1e-14 * np.abs(sol.p).max()
    assert sol.info["n_pressure"] == system.full.pressure_space.ndof


@pytest.mark.parametrize("c", [1e-3, 1e3])
def test_viscosity_and_load_scale_together(c):
    # (nu, f) -> (c nu, c f) leaves u unchanged and scales p by c
    base = solve_stokes(reduced(nu=0.1))
    f = lambda x: c * bump_load(x)  # noqa: E731
    scaled = solve_stokes(reduced(nu=0.1 * c, f=f))
    np.testing.assert_allclose(scaled.u, base.u, rtol=1e-10, atol=1e-12 * np.abs(base.u).max())
    np.testing.assert_allclose(scaled.p, c * base.p, rtol=1e-9, atol=1e-12 * c * np.abs(base.p).max())


def test_one_factorization_serves_every_viscosity():
    system = reduced(6, variant="bdm1_axi")
    fac = factorize(system)
    for nu in (1.0, 1e-4, 1e-8):
        s = reduced(6, variant="bdm1_axi", nu=nu)
        shared = solve_stokes(s, fac)
        fresh = solve_stokes(s)
        np.testing.assert_allclose(shared.u, fresh.u, atol=1e-12 * max(1.0, np.abs(fresh.u).max()))
        np.testing.assert_allclose(shared.p, fresh.p, atol=1e-12 * max(1.0, np.abs(fresh.p).max()))


def test_triangle_order_does_not_change_the_solution():
    m = generate_unit_square_mesh(4, jitter=0.2, seed=3)
    perm = np.random.default_rng(0).permutation(m.n_triangles)
    shuffled = Mesh.from_arrays(m.vertices, m.triangles[perm])
    g = get_case("ex1").u
    a = solve_stokes(reduced(mesh=m, g=g))
    b = solve_stokes(reduced(mesh=shuffled, g=g))
    nv = m.n_vertices
    np.testing.assert_allclose(b.u[: 2 * nv], a.u[: 2 * nv], atol=1e-12)
    np.testing.assert_allclose(b.p, a.p[perm], atol=1e-11)


def test_divergence_residual_detects_perturbations():
    system = reduced(4)
    sol = solve_stokes(system)
    assert discrete_divergence_residual(sol, system) <= 1e-12
    u = sol.u.copy()
    u[system.free[0]] += 1e-3
    perturbed = type(sol)(u, sol.p, sol.multiplier, sol.residual, sol.nu)
    assert discrete_divergence_residual(perturbed, system) > 1e-5


def test_incompatible_boundary_flux_shows_up_in_the_multiplier():
    # u = (r, 0) pushes a net weighted flux of 1 through r = 1
    outflow = lambda x: np.stack([x[..., 0], np.zeros(x.shape[:-1])], -1)  # noqa: E731
    bad = solve_stokes(reduced(g=outflow))
    good = solve_stokes(reduced(g=get_case("ex1").u))
    assert abs(bad.multiplier) > 1e-3
    assert abs(good.multiplier) <= 1e-12


def test_no_free_velocity_dofs_is_a_structural_error():
    m = Mesh.from_arrays([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    with pytest.raises(SolverError, match="structural deficiency"):
        solve_stokes(reduced(mesh=m))


def test_residual_above_tolerance_reports_condition(monkeypatch):
    monkeypatch.setattr(solver, "RESIDUAL_TOL", 0.0)
    with pytest.raises(SolverError, match="condition estimate"):
        solve_stokes(reduced(4, g=get_case("ex2").u))

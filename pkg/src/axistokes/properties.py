"""Executable invariant checks shared by the test suite and ``axistokes proptest``.

Each check returns a :class:`PropertyResult`; failures carry a message
naming the offending edge, triangle or dof.
"""
from __future__ import annotations

import json
import math
import sys
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from .assembly import CellwiseConstantField, assemble_a, assemble_rhs, assemble_system, eliminate_constraints
from .bench import LevelRun
from .cases import catalog, get_case, verify_case
from .hdiv import (
    HdivSpace,
    ReconVariant,
    _local_edge_index,
    build_hdiv_space,
    divergence_check,
    edge_reference_points,
    hdiv_basis,
    reconstruction,
)
from .mesh import MIN_ANGLE_DEG, Mesh, TriangleClass, classify, generate_unit_square_mesh, validate
from .quadrature import MAX_ORDER, edge_rule, triangle_rule
from .solver import solve_stokes
from .spaces import apply_dirichlet, build_spaces, element_geometry, reference_to_physical, velocity_basis

__all__ = [
    "PropertyResult",
    "RECON_VARIANTS",
    "check_quadrature_exactness",
    "check_mesh_invariants",
    "check_modified_edge_properties",
    "check_edge_norm_scaling",
    "scaled_edge_norms",
    "check_hdiv_conformity",
    "check_bubble_continuity",
    "check_commuting",
    "check_axis_trace",
    "check_linearity",
    "check_stiffness",
    "check_solved_divergence",
    "check_cases",
    "check_pressure_robustness",
    "PerturbationResponse",
    "gradient_perturbation",
    "property_meshes",
    "run_property_suite",
]

RECON_VARIANTS = ("rt0", "bdm1", "rt0_axi", "bdm1_axi")


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    detail: str
    value: float = math.nan

    def to_json(self) -> str:
        d = asdict(self)
        if not math.isfinite(d["value"]):
            d["value"] = None
        return json.dumps(d, sort_keys=True)


def _result(name: str, worst: float, limit: float, detail: str) -> PropertyResult:
    ok = bool(worst <= limit)
    return PropertyResult(name, ok, detail if not ok else f"max {worst:.3e} <= {limit:.1e}", float(worst))


def property_meshes(levels=(2, 4, 8), jitters=(0.0, 0.2), seed: int = 5) -> list[tuple[str, Mesh]]:
    return [
        (f"n={n},jitter={j}", generate_unit_square_mesh(n, jitter=j, seed=seed))
        for n in levels
        for j in jitters
    ]


# -- quadrature ---------------------------------------------------------------


def _exact_monomial(a: int, b: int) -> float:
    return float(Fraction(math.factorial(a) * math.factorial(b), math.factorial(a + b + 2)))


def check_quadrature_exactness(orders: Iterable[int] = range(1, MAX_ORDER + 1)) -> PropertyResult:
    """Every monomial ``x^a y^b`` with ``a + b <= order`` against ``a! b! / (a+b+2)!``."""
    worst, where = 0.0, ""
    for order in orders:
        rule = triangle_rule(order)
        x, y = rule.points[:, 0], rule.points[:, 1]
        if np.any(rule.weights <= 0) or np.any(rule.barycentric <= 0):
            return PropertyResult("quadrature_exactness", False, f"order {order}: non-positive weight or node")
        for a in range(order + 1):
            vals = (x**a)[None, :] * y[None, :] ** np.arange(order - a + 1)[:, None]
            approx = vals @ rule.weights
            for b, q in enumerate(approx):
                ex = _exact_monomial(a, b)
                err = abs(q - ex) / ex
                if err > worst:
                    worst, where = err, f"order {order}, x^{a} y^{b}"
        erule = edge_rule(order)
        for k in range(order + 1):
            err = abs(erule.weights @ erule.points**k - 1.0 / (k + 1)) * (k + 1)
            if err > worst:
                worst, where = err, f"edge order {order}, s^{k}"
    return _result("quadrature_exactness", worst, 1e-12, f"relative error {worst:.3e} at {where}")


# -- mesh ---------------------------------------------------------------------


def check_mesh_invariants(meshes) -> PropertyResult:
    for label, mesh in meshes:
        problems = validate(mesh)
        if problems:
            return PropertyResult("mesh_invariants", False, f"{label}: {problems[0]}")
        if mesh.min_angles().min() < MIN_ANGLE_DEG - 1e-9:
            return PropertyResult("mesh_invariants", False, f"{label}: minimum angle below 20 degrees")
        topo = classify(mesh)
        n_type2 = int(np.count_nonzero(topo.triangle_class == TriangleClass.TYPE2))
        if n_type2 != len(topo.axis_edges):
            return PropertyResult("mesh_invariants", False, f"{label}: {n_type2} type-2 triangles vs {len(topo.axis_edges)} axis edges")
        er = topo.edge_kind[mesh.tri_edges] == 2
        axis_tris = np.flatnonzero(topo.triangle_class != TriangleClass.INTERIOR)
        bad = axis_tris[er[axis_tris].sum(axis=1) != 2]
        if len(bad):
            return PropertyResult("mesh_invariants", False, f"{label}: triangle {bad[0]} does not carry 2 E_R edges")
        if np.intersect1d(topo.axis_edges, topo.er_edges).size or np.intersect1d(topo.axis_edges, topo.gamma_edges).size:
            return PropertyResult("mesh_invariants", False, f"{label}: overlapping edge classes")
    return PropertyResult("mesh_invariants", True, "all meshes valid")


# -- modified basis -------------------------------------------------------------


def _edge_traces(space: HdivSpace, tris: np.ndarray, k: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Normal traces ``(M, Q, 6)`` of all local basis functions on local edges ``k``."""
    mesh = space.mesh
    ref = edge_reference_points(mesh, tris, k, s)
    vals, _ = hdiv_basis(space, tris, ref)
    n = mesh.edge_normals()[mesh.tri_edges[tris, k]]
    return np.einsum("mqsc,mc->mqs", vals, n)


def check_modified_edge_properties(meshes, variant: str = "rt0_axi", tol: float = 1e-12) -> PropertyResult:
    """Unit flux through the own edge, zero flux through the others, zero at N_j."""
    name = "modified_edge_properties"
    rule = edge_rule(4)
    for label, mesh in meshes:
        topo = classify(mesh)
        space = build_hdiv_space(mesh, topo, variant)
        er = topo.er_edges
        if len(er) == 0:
            continue
        length = mesh.edge_lengths()
        for side in range(2):
            edges = er[mesh.edge_tris[er, side] >= 0]
            tris = mesh.edge_tris[edges, side]
            slot = np.argmax(space.tri_dofs[tris] == edges[:, None], axis=1)
            own = _local_edge_index(mesh, tris, edges)
            for k in range(3):
                kk = np.full(len(tris), k)
                tr = _edge_traces(space, tris, kk, rule.points)[np.arange(len(tris)), :, slot]
                flux = (tr @ rule.weights) * length[mesh.tri_edges[tris, k]]
                target = np.where(own == k, 1.0, 0.0)
                err = np.abs(flux - target)
                if err.max() > tol:
                    i = int(np.argmax(err))
                    what = "unit flux" if own[i] == k else "zero flux on other edges"
                    return PropertyResult(
                        name,
                        False,
                        f"{label}: edge {edges[i]} violates {what}: flux {flux[i]:.15g} on triangle {tris[i]}",
                        float(err.max()),
                    )
            # value at the axis vertex
            j = topo.edge_axis_vertex[edges]
            local_j = np.argmax(mesh.triangles[tris] == j[:, None], axis=1)
            corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
            vals, _ = hdiv_basis(space, tris, corners[local_j][:, None, :])
            v = np.linalg.norm(vals[np.arange(len(tris)), 0, slot], axis=-1)
            if v.max() > tol:
                i = int(np.argmax(v))
                detail = f"{label}: edge {edges[i]} does not vanish at its axis vertex"
                return PropertyResult(name, False, detail, float(v.max()))
    return PropertyResult(name, True, "flux, orthogonality and axis-vertex properties hold")


def _scaled_norm(space: HdivSpace, tris: np.ndarray, dofs: np.ndarray, order: int) -> float:
    """``max ||psi_d||_{L^2_-1(T)} h_T^{1/2}`` over pairs (triangle, dof)."""
    mesh = space.mesh
    if len(tris) == 0:
        return 0.0
    rule = triangle_rule(order)
    slot = np.argmax(space.tri_dofs[tris] == dofs[:, None], axis=1)
    geom = element_geometry(mesh, tris)
    r = reference_to_physical(geom, rule.points)[..., 0]
    vals, _ = hdiv_basis(space, tris, rule.points)
    psi = vals[np.arange(len(tris)), :, slot]
    w = rule.weights[None, :] * np.abs(geom.det)[:, None]
    norm = np.sqrt(np.sum(w * np.sum(psi**2, axis=-1) / r, axis=1))
    return float(np.max(norm * np.sqrt(mesh.diameters()[tris])))


def scaled_edge_norms(mesh: Mesh, order: int = 20) -> dict[str, float]:
    """Scaled weighted norms ``||psi||_{L^2_-1(T)} h_T^{1/2}`` of three basis families.

    ``modified``: every modified function on both triangles of its edge.
    ``rt0_far`` and ``bdm1_far``: the RT0 and BDM1 functions of the edge
    opposite the axis vertex in triangles with exactly one axis vertex.
    """
    topo = classify(mesh)
    space = build_hdiv_space(mesh, topo, "bdm1_axi")
    er = topo.er_edges
    tris, dofs = [], []
    for side in range(2):
        edges = er[mesh.edge_tris[er, side] >= 0]
        tris.append(mesh.edge_tris[edges, side])
        dofs.append(space.edge_dofs[edges, 0])
    out = {"modified": _scaled_norm(space, np.concatenate(tris), np.concatenate(dofs), order)}

    type1 = np.flatnonzero(topo.triangle_class == TriangleClass.TYPE1)
    far = mesh.tri_edges[type1][topo.edge_kind[mesh.tri_edges[type1]] == 0]
    # one off-axis edge per type 1 triangle, in triangle order
    out["rt0_far"] = _scaled_norm(space, type1, space.edge_dofs[far, 0], order)
    out["bdm1_far"] = _scaled_norm(space, type1, space.edge_dofs[far, 1], order)
    return out


def check_edge_norm_scaling(levels=(4, 8, 16, 32), jitter: float = 0.0, factor: float = 4.0) -> PropertyResult:
    """Each scaled norm family stays within ``factor`` across refinement."""
    per_level = [scaled_edge_norms(generate_unit_square_mesh(n, jitter=jitter, seed=5)) for n in levels]
    worst, detail = 0.0, []
    for family in per_level[0]:
        vals = [d[family] for d in per_level]
        ratio = max(vals) / min(vals)
        worst = max(worst, ratio)
        detail.append(f"{family}: " + ", ".join(f"{v:.4f}" for v in vals))
    msg = f"n={list(levels)}; " + "; ".join(detail)
    return PropertyResult("edge_norm_scaling", bool(worst <= factor), msg, worst)


# -- conformity ----------------------------------------------------------------


def check_hdiv_conformity(meshes, variants=RECON_VARIANTS, tol: float = 1e-13) -> PropertyResult:
    """Zero normal trace off the own edge; matching traces across the own edge."""
    name = "hdiv_conformity"
    s = np.linspace(0.0, 1.0, 5)
    for label, mesh in meshes:
        topo = classify(mesh)
        for variant in variants:
            space = build_hdiv_space(mesh, topo, variant)
            tris = np.arange(mesh.n_triangles)
            traces = [_edge_traces(space, tris, np.full(len(tris), k), s) for k in range(3)]
            vals, _ = hdiv_basis(space, tris, np.array([[1 / 3, 1 / 3]]))
            scale = max(1.0, float(np.abs(vals).max()))
            for k in range(3):
                other = [c for c in range(6) if c // 2 != k]
                off = np.abs(traces[k][:, :, other]).max(axis=1)
                if off.max() > tol * scale:
                    t, c = np.unravel_index(np.argmax(off), off.shape)
                    dof = space.tri_dofs[t, other[c]]
                    return PropertyResult(
                        name, False,
                        f"{label} {variant}: dof {dof} (edge {space.dof_edge[dof]}) has normal trace "
                        f"{off.max():.3e} on edge {mesh.tri_edges[t, k]} of triangle {t}",
                        float(off.max()),
                    )
            interior = np.flatnonzero(mesh.edge_tris[:, 1] >= 0)
            t0, t1 = mesh.edge_tris[interior, 0], mesh.edge_tris[interior, 1]
            k0 = _local_edge_index(mesh, t0, interior)
            k1 = _local_edge_index(mesh, t1, interior)
            for slot in range(2):
                a = np.stack([traces[k][t, :, 2 * k + slot] for t, k in zip(t0, k0)])
                b = np.stack([traces[k][t, :, 2 * k + slot] for t, k in zip(t1, k1)])
                jump = np.abs(a - b).max(axis=1)
                if jump.max() > tol * scale:
                    i = int(np.argmax(jump))
                    return PropertyResult(
                        name, False,
                        f"{label} {variant}: normal trace jumps by {jump[i]:.3e} across edge {interior[i]}",
                        float(jump.max()),
                    )
    return PropertyResult(name, True, "normal traces conforming")


def check_bubble_continuity(meshes, tol: float = 1e-13) -> PropertyResult:
    name = "bubble_continuity"
    s = np.linspace(0.0, 1.0, 5)
    for label, mesh in meshes:
        topo = classify(mesh)
        vs, _ = build_spaces(mesh, topo)
        interior = np.flatnonzero(mesh.edge_tris[:, 1] >= 0)
        sides = []
        for side in range(2):
            tris = mesh.edge_tris[interior, side]
            k = _local_edge_index(mesh, tris, interior)
            ref = edge_reference_points(mesh, tris, k, s)
            out = np.empty((len(tris), len(s), 2))
            for i, (t, kk) in enumerate(zip(tris, k)):
                vals, _ = velocity_basis(vs, [t], ref[i])
                out[i] = vals[0, :, 6 + kk]
            sides.append(out)
        jump = np.abs(sides[0] - sides[1]).max()
        if jump > tol:
            return PropertyResult(name, False, f"{label}: bubble trace mismatch {jump:.3e}", jump)
    return PropertyResult(name, True, "bubble traces continuous")


# -- reconstruction operator ------------------------------------------------------


def _div_scale(mesh: Mesh, v: np.ndarray) -> float:
    """Magnitude bound of ``div(r v_h)`` for coefficients ``v``."""
    gl = element_geometry(mesh).grad_lambda
    rmax = mesh.vertices[mesh.triangles][:, :, 0].max(axis=1)
    return float(np.abs(v).max() * np.max(1.0 + 2.0 * rmax * np.abs(gl).sum(axis=(1, 2))))


def check_commuting(meshes, variants=RECON_VARIANTS, samples: int = 100, seed: int = 0, tol: float = 1e-11) -> PropertyResult:
    name = "commuting_property"
    rng = np.random.default_rng(seed)
    worst = 0.0
    for label, mesh in meshes:
        topo = classify(mesh)
        vs, _ = build_spaces(mesh, topo)
        for variant in variants:
            op = reconstruction(vs, variant)
            for _ in range(samples):
                v = rng.standard_normal(vs.ndof)
                div_pi, pi0 = divergence_check(op, v)
                err = np.abs(div_pi - pi0).max() / _div_scale(mesh, v)
                worst = max(worst, err)
                if err > tol:
                    t = int(np.argmax(np.abs(div_pi - pi0)))
                    return PropertyResult(name, False, f"{label} {variant}: mismatch {err:.3e} on triangle {t}", err)
    return _result(name, worst, tol, "")


def axis_trace_values(op, v: np.ndarray, n_samples: int = 5) -> np.ndarray:
    mesh = op.space.mesh
    edges = op.space.topology.axis_edges
    tris = mesh.edge_tris[edges, 0]
    k = _local_edge_index(mesh, tris, edges)
    ref = edge_reference_points(mesh, tris, k, np.linspace(0.0, 1.0, n_samples))
    return op.evaluate(v, tris, ref)


def check_axis_trace(meshes, samples: int = 20, seed: int = 1, tol: float = 1e-12) -> PropertyResult:
    """Axi variants vanish on the axis; plain ones do not for ``w = (r, -2z)``."""
    name = "axis_trace"
    rng = np.random.default_rng(seed)
    for label, mesh in meshes:
        topo = classify(mesh)
        vs, _ = build_spaces(mesh, topo)
        nv = mesh.n_vertices
        w = np.zeros(vs.ndof)
        w[:nv] = mesh.vertices[:, 0]
        w[nv : 2 * nv] = -2 * mesh.vertices[:, 1]
        for variant in RECON_VARIANTS:
            op = reconstruction(vs, variant)
            if ReconVariant(variant).is_axi:
                for _ in range(samples):
                    v = rng.standard_normal(vs.ndof)
                    val = np.abs(axis_trace_values(op, v)).max() / np.abs(v).max()
                    if val > tol:
                        return PropertyResult(name, False, f"{label} {variant}: axis value {val:.3e}", val)
            else:
                val = np.abs(axis_trace_values(op, w)).max()
                if not val > 1e-6:
                    return PropertyResult(name, False, f"{label} {variant}: expected nonzero axis trace for (r, -2z)", val)
    return PropertyResult(name, True, "axi reconstructions vanish on the axis")


def check_linearity(meshes, seed: int = 2, tol: float = 1e-14) -> PropertyResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for label, mesh in meshes:
        vs, _ = build_spaces(mesh, classify(mesh))
        for variant in RECON_VARIANTS:
            op = reconstruction(vs, variant)
            v, w = rng.standard_normal((2, vs.ndof))
            a, b = rng.standard_normal(2)
            lhs = op.apply(a * v + b * w)
            rhs = a * op.apply(v) + b * op.apply(w)
            err = np.abs(lhs - rhs).max() / max(np.abs(lhs).max(), 1.0)
            worst = max(worst, err)
    return _result("linearity", worst, tol, f"nonlinearity {worst:.3e}")


# -- assembly / solver -------------------------------------------------------------


def check_stiffness(meshes, samples: int = 100, seed: int = 3) -> PropertyResult:
    rng = np.random.default_rng(seed)
    for label, mesh in meshes:
        vs, _ = build_spaces(mesh, classify(mesh))
        vs = apply_dirichlet(vs, None)
        A = assemble_a(vs)
        asym = abs(A - A.T).max() / abs(A).max()
        if asym > 1e-13:
            return PropertyResult("stiffness", False, f"{label}: asymmetry {asym:.3e}", asym)
        free = vs.free_dofs()
        Aff = A[free][:, free]
        for _ in range(samples):
            x = rng.standard_normal(len(free))
            if not x @ (Aff @ x) > 0:
                return PropertyResult("stiffness", False, f"{label}: non-positive energy")
    return PropertyResult("stiffness", True, "symmetric and positive on free dofs")


def check_solved_divergence(meshes, tol: float = 1e-10) -> PropertyResult:
    """``div Pi(r u_h)`` vanishes for solved ``u_h`` with every reconstruction."""
    case = catalog()[1]
    worst = 0.0
    for label, mesh in meshes:
        vs, ps = build_spaces(mesh, classify(mesh))
        vs = apply_dirichlet(vs, case.u)
        for variant in RECON_VARIANTS:
            op = reconstruction(vs, variant)
            sol = solve_stokes(eliminate_constraints(assemble_system(vs, ps, op, case.f(1e-3), 1e-3)))
            err = np.abs(op.divergence(sol.u)).max() / _div_scale(mesh, sol.u)
            worst = max(worst, err)
            if err > tol:
                return PropertyResult("solved_divergence", False, f"{label} {variant}: {err:.3e}", err)
    return _result("solved_divergence", worst, tol, "")


def check_cases() -> PropertyResult:
    worst = 0.0
    for case in catalog():
        for nu in (1.0, 1e-3):
            try:
                res = verify_case(case, nu)
            except AssertionError as exc:
                return PropertyResult("manufactured_cases", False, str(exc))
            worst = max(worst, res["f"])
    return _result("manufactured_cases", worst, 1e-5, "")


def run_property_suite(stream=None, quick: bool = False) -> list[PropertyResult]:
    """Run every check, printing one JSON object per line plus a summary."""
    stream = sys.stdout if stream is None else stream
    meshes = property_meshes(levels=(2, 4) if quick else (2, 4, 8))
    checks: list[Callable[[], PropertyResult]] = [
        lambda: check_quadrature_exactness(range(1, 21) if quick else range(1, MAX_ORDER + 1)),
        lambda: check_mesh_invariants(meshes),
        lambda: check_cases(),
        lambda: check_modified_edge_properties(meshes, "rt0_axi"),
        lambda: check_modified_edge_properties(meshes, "bdm1_axi"),
        lambda: check_edge_norm_scaling(levels=(4, 8) if quick else (4, 8, 16, 32)),
        lambda: check_hdiv_conformity(meshes),
        lambda: check_bubble_continuity(meshes),
        lambda: check_commuting(meshes, samples=10 if quick else 100),
        lambda: check_axis_trace(meshes),
        lambda: check_linearity(meshes),
        lambda: check_stiffness(meshes, samples=10 if quick else 100),
        lambda: check_solved_divergence(meshes[:2] if quick else meshes),
        lambda: check_pressure_robustness(),
    ]
    results = []
    for check in checks:
        try:
            res = check()
        except Exception as exc:  # a crashing check is a failed property
            res = PropertyResult(getattr(check, "__name__", "check"), False, f"{type(exc).__name__}: {exc}")
        results.append(res)
        print(res.to_json(), file=stream, flush=True)
    n_fail = sum(not r.passed for r in results)
    print(json.dumps({"summary": {"passed": len(results) - n_fail, "failed": n_fail}}), file=stream, flush=True)
    return results


# -- pressure robustness ---------------------------------------------------------------


def _poly_potential(x: np.ndarray) -> np.ndarray:
    r, z = x[..., 0], x[..., 1]
    return np.stack([2.0 * r * z, r**2 + 3.0 * z**2], axis=-1)  # grad(r^2 z + z^3)


@dataclass(frozen=True)
class PerturbationResponse:
    """How ``u_h`` and ``p_h`` react when a gradient is added to the load."""

    velocity_change: float  # ||u_h' - u_h||_V
    velocity_norm: float  # ||u_h||_V
    pressure_shift_error: float  # max_T |(p_h' - p_h) - q_T| after mean removal (discrete kind only)


def gradient_perturbation(
    variant: str,
    nu: float,
    kind: str = "smooth",
    n: int = 8,
    case: str = "ex2",
    jitter: float = 0.2,
    seed: int = 1,
    q_seed: int = 0,
) -> PerturbationResponse:
    """Solve with ``f`` and with ``f + grad q`` on one mesh and compare.

    ``kind`` selects ``q``:

    * ``"discrete"``: a random piecewise constant ``q_h``; its gradient is the
      edge-jump functional ``v -> -sum_T q_T int_T div(r v)``, i.e. the
      discrete pressure term ``-B^T q_h``.
    * ``"p1"``: a random continuous piecewise linear ``q_h``; its gradient is
      piecewise constant and enters through the regular load assembly.
    * ``"smooth"``: ``q = r^2 z + z^3``.

    All load integrands are polynomials, so the quadrature is exact.
    """
    level = LevelRun(get_case(case), n, jitter, seed, 4)
    base = level.system(variant, nu, 10)
    sol0 = solve_stokes(base, level.factorization)
    rng = np.random.default_rng(q_seed)
    q = None
    if kind == "discrete":
        q = rng.standard_normal(level.pressure.ndof)
        dF = -(level.B.T @ q)
    elif kind == "p1":
        nodal = rng.standard_normal(level.mesh.n_vertices)
        grad_lam = element_geometry(level.mesh).grad_lambda
        grad_q = np.einsum("mkd,mk->md", grad_lam, nodal[level.mesh.triangles])
        dF = assemble_rhs(level.velocity, level.recon(variant), CellwiseConstantField(grad_q), 2)
    elif kind == "smooth":
        dF = assemble_rhs(level.velocity, level.recon(variant), _poly_potential, 10)
    else:
        raise ValueError(f"unknown perturbation kind {kind!r}")
    pert = type(base)(base.full, base.free, base.A, base.B, base.F + dF[base.free], base.G)
    sol1 = solve_stokes(pert, level.factorization)
    d = sol1.u - sol0.u
    shift = math.nan
    if q is not None:
        m = level.pressure.masses
        dp = sol1.p - sol0.p
        expected = q - (q @ m) / m.sum()
        shift = float(np.max(np.abs(dp - (dp @ m) / m.sum() - expected)))
    return PerturbationResponse(
        float(np.sqrt(d @ (level.A @ d))), float(np.sqrt(sol0.u @ (level.A @ sol0.u))), shift
    )


def check_pressure_robustness(tol: float = 1e-9) -> PropertyResult:
    worst = 0.0
    for variant in ("rt0_axi", "bdm1_axi"):
        for kind in ("discrete", "p1", "smooth"):
            res = gradient_perturbation(variant, 1e-3, kind)
            worst = max(worst, res.velocity_change / res.velocity_norm)
    return _result("pressure_robustness", worst, tol, f"velocity changed by {worst:.3e}")

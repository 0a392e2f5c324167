import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from axistokes import hdiv
from axistokes.hdiv import (
    DofKind,
    ReconVariant,
    build_hdiv_space,
    build_recon_operator,
    divergence_check,
    edge_reference_points,
    eval_hdiv_basis,
    hdiv_basis,
    reconstruction,
    weighted_edge_moments,
)
from axistokes.mesh import classify, generate_unit_square_mesh
from axistokes.quadrature import edge_rule
from axistokes.spaces import (
    build_spaces,
    element_geometry,
    evaluate_velocity,
    interpolate_field,
    reference_to_physical,
)

RECON = ("rt0", "bdm1", "rt0_axi", "bdm1_axi")


def velocity_space(n=2, jitter=0.0, seed=0):
    m = generate_unit_square_mesh(n, jitter=jitter, seed=seed)
    return build_spaces(m, classify(m))[0]


def constant_field(c):
    return lambda x: np.broadcast_to(np.asarray(c, dtype=float), x.shape).copy()


@pytest.mark.parametrize(
    "variant, ndof, kinds",
    [
        ("rt0", 5, {DofKind.RT0: 4, DofKind.ZERO: 1}),
        ("rt0_axi", 5, {DofKind.RT0: 1, DofKind.MODIFIED: 3, DofKind.ZERO: 1}),
        ("bdm1", 9, {DofKind.RT0: 4, DofKind.BDM1: 4, DofKind.ZERO: 1}),
        ("bdm1_axi", 6, {DofKind.RT0: 1, DofKind.BDM1: 1, DofKind.MODIFIED: 3, DofKind.ZERO: 1}),
    ],
)
def test_dof_layout_on_single_cell(variant, ndof, kinds):
    m = generate_unit_square_mesh(1)
    space = build_hdiv_space(m, classify(m), variant)
    assert space.ndof == ndof
    counts = {DofKind(k): int(c) for k, c in zip(*np.unique(space.dof_kind, return_counts=True))}
    assert counts == kinds
    assert space.tri_dofs.shape == (2, 6)


def test_axi_bdm_drops_moments_only_on_axis_adjacent_edges():
    m = generate_unit_square_mesh(4, jitter=0.2, seed=1)
    topo = classify(m)
    bdm = build_hdiv_space(m, topo, "bdm1")
    axi = build_hdiv_space(m, topo, "bdm1_axi")
    assert bdm.ndof - axi.ndof == len(topo.er_edges)
    assert np.all(axi.edge_dofs[topo.er_edges, 1] == -1)
    assert np.all(axi.edge_dofs[topo.axis_edges, 1] == -1)


def test_identity_has_no_target_space():
    m = generate_unit_square_mesh(1)
    with pytest.raises(ValueError, match="identity"):
        build_hdiv_space(m, classify(m), "identity")
    assert reconstruction(build_spaces(m, classify(m))[0], ReconVariant.IDENTITY) is None


def edge_normal_flux(space, tri, k, dof, order=6):
    """Unweighted flux of basis ``dof`` through local edge ``k`` of ``tri`` along n_E."""
    m = space.mesh
    rule = edge_rule(order)
    e = m.tri_edges[tri, k]
    i, j = m.edges[e]
    t = m.vertices[j] - m.vertices[i]
    length = np.linalg.norm(t)
    n = np.array([t[1], -t[0]]) / length
    ref = edge_reference_points(m, [tri], [k], rule.points)
    vals, _ = hdiv_basis(space, [tri], ref)
    slot = np.flatnonzero(space.tri_dofs[tri] == dof)
    trace = vals[0, :, slot[0]] @ n if len(slot) else np.zeros(rule.n_points)
    return float(rule.weights @ trace * length), trace


@pytest.mark.parametrize("variant", RECON)
def test_edge_fluxes_are_unit_and_local(variant):
    m = generate_unit_square_mesh(3, jitter=0.2, seed=4)
    space = build_hdiv_space(m, classify(m), variant)
    for tri in range(m.n_triangles):
        for dof in space.tri_dofs[tri]:
            if dof < 0 or space.dof_kind[dof] == DofKind.ZERO:
                continue
            own = space.dof_edge[dof]
            for k in range(3):
                flux, trace = edge_normal_flux(space, tri, k, dof)
                if m.tri_edges[tri, k] != own:
                    np.testing.assert_allclose(trace, 0.0, atol=1e-12)
                elif space.dof_kind[dof] == DofKind.BDM1:
                    assert flux == pytest.approx(0.0, abs=1e-12)
                else:
                    assert flux == pytest.approx(1.0, rel=1e-12)


def test_modified_function_vanishes_on_the_axis():
    m = generate_unit_square_mesh(3, jitter=0.2, seed=6)
    topo = classify(m)
    space = build_hdiv_space(m, topo, "rt0_axi")
    s = np.linspace(0, 1, 7)
    checked = 0
    for e in topo.er_edges:
        for tri in m.edge_tris[e]:
            if tri < 0:
                continue
            for k in range(3):
                edge = m.tri_edges[tri, k]
                a, b = m.vertices[m.edges[edge], 0]
                if a == 0.0 and b == 0.0:
                    ref = edge_reference_points(m, [tri], [k], s)
                    vals, _ = hdiv_basis(space, [tri], ref)
                    slot = int(np.flatnonzero(space.tri_dofs[tri] == e)[0])
                    np.testing.assert_array_equal(vals[0, :, slot], 0.0)
                    checked += 1
            # value at the axis vertex itself
            j = topo.edge_axis_vertex[e]
            corner = np.zeros(2)
            pos = list(m.triangles[tri]).index(j)
            if pos:
                corner[pos - 1] = 1.0
            val, _ = eval_hdiv_basis(space, tri, corner, e)
            np.testing.assert_array_equal(val, 0.0)
    assert checked > 0


def test_modified_normal_trace_is_linear_up_to_two_over_length():
    m = generate_unit_square_mesh(2)
    topo = classify(m)
    space = build_hdiv_space(m, topo, "rt0_axi")
    e = int(topo.er_edges[0])
    tri = int(m.edge_tris[e, 0])
    k = int(np.flatnonzero(m.tri_edges[tri] == e)[0])
    length = m.edge_lengths()[e]
    s = np.array([0.0, 0.5, 1.0])
    ref = edge_reference_points(m, [tri], [k], s)
    vals, _ = hdiv_basis(space, [tri], ref)
    i, j = m.edges[e]
    t = m.vertices[j] - m.vertices[i]
    n = np.array([t[1], -t[0]]) / np.linalg.norm(t)
    slot = int(np.flatnonzero(space.tri_dofs[tri] == e)[0])
    normal = vals[0, :, slot] @ n
    # zero at the axis vertex, 2/|E| at the other end, linear in between
    axis_at_hi = topo.edge_axis_vertex[e] == j
    expected = 2.0 / length * ((1 - s) if axis_at_hi else s)
    np.testing.assert_allclose(normal, expected, rtol=1e-12, atol=1e-14)


def test_eval_basis_rejects_foreign_dof():
    m = generate_unit_square_mesh(2)
    space = build_hdiv_space(m, classify(m), "rt0")
    foreign = next(e for e in range(m.n_edges) if e not in m.tri_edges[0])
    with pytest.raises(ValueError, match="not supported on triangle 0"):
        eval_hdiv_basis(space, 0, (0.2, 0.2), foreign)


def test_weighted_edge_moments_closed_forms():
    vs = velocity_space(1)
    m = vs.mesh
    # the vertical edge r = 1 carries int_0^1 1 * (1, 0).n dz with n = (1, 0)
    right = int(np.flatnonzero((m.vertices[m.edges[:, 0], 0] == 1) & (m.vertices[m.edges[:, 1], 0] == 1))[0])
    m0, m1 = weighted_edge_moments(vs, right, constant_field([1.0, 0.0]))
    assert m0 == pytest.approx(1.0, rel=1e-14)
    assert m1 == pytest.approx(0.0, abs=1e-14)
    # a radial field has no flux through the horizontal edge z = 0
    bottom = int(np.flatnonzero((m.vertices[m.edges[:, 0], 1] == 0) & (m.vertices[m.edges[:, 1], 1] == 0))[0])
    assert weighted_edge_moments(vs, bottom, constant_field([1.0, 0.0]))[0] == pytest.approx(0.0, abs=1e-15)
    # the weight kills every moment on the axis
    axis = int(classify(m).axis_edges[0])
    assert weighted_edge_moments(vs, axis, constant_field([3.0, -1.0])) == (0.0, 0.0)
    # first moment: int_0^1 s * (2 s - 1) ds = 1/6 on the bottom edge with v.n = -1
    m0, m1 = weighted_edge_moments(vs, bottom, constant_field([0.0, 1.0]))
    assert m0 == pytest.approx(-0.5, rel=1e-14)
    assert m1 == pytest.approx(-1 / 6, rel=1e-14)


def test_moments_of_coefficients_match_moments_of_fields():
    vs = velocity_space(3, 0.2, 2)
    field = lambda x: np.stack([x[..., 0] ** 2 * x[..., 1], x[..., 0] - x[..., 1] ** 2], -1)  # noqa: E731
    c = interpolate_field(vs, field)
    for e in range(vs.mesh.n_edges):
        np.testing.assert_allclose(
            weighted_edge_moments(vs, e, c), weighted_edge_moments(vs, e, _trace_of(vs, c)), atol=1e-13
        )


def _trace_of(vs, c):
    """Field callable that evaluates the discrete velocity on mesh points."""
    m = vs.mesh

    def f(x):
        flat = x.reshape(-1, 2)
        out = np.zeros_like(flat)
        for q, pt in enumerate(flat):
            for t in range(m.n_triangles):
                p = m.vertices[m.triangles[t]]
                J = np.column_stack([p[1] - p[0], p[2] - p[0]])
                ref = np.linalg.solve(J, pt - p[0])
                if ref.min() >= -1e-12 and ref.sum() <= 1 + 1e-12:
                    out[q] = evaluate_velocity(vs, c, [t], ref[None])[0][0, 0]
                    break
        return out.reshape(x.shape)

    return f


@pytest.mark.parametrize("variant", RECON)
def test_divergence_free_field_maps_to_divergence_free_field(variant):
    # div(r (r, -2z)) = 0, so every reconstruction is divergence free and RT0 is piecewise constant
    vs = velocity_space(3, 0.2, 3)
    c = interpolate_field(vs, lambda x: np.stack([x[..., 0], -2 * x[..., 1]], -1))
    op = reconstruction(vs, variant)
    np.testing.assert_allclose(op.divergence(c), 0.0, atol=1e-13)
    if variant == "rt0":
        pts = np.array([[0.1, 0.1], [0.7, 0.2], [0.2, 0.6]])
        vals = op.evaluate(c, np.arange(vs.mesh.n_triangles), pts)
        np.testing.assert_allclose(vals - vals[:, :1], 0.0, atol=1e-13)


@pytest.mark.parametrize("variant", ["bdm1", "bdm1_axi"])
def test_bdm_reproduces_weighted_constants(variant):
    # r (0, c) is linear and vanishes on the axis, so it lies in both BDM spaces
    vs = velocity_space(3, 0.2, 7)
    c = interpolate_field(vs, constant_field([0.0, 2.5]))
    op = reconstruction(vs, variant)
    tris = np.arange(vs.mesh.n_triangles)
    pts = np.array([[0.2, 0.3], [0.6, 0.1], [0.05, 0.9]])
    vals = op.evaluate(c, tris, pts)
    x = reference_to_physical(element_geometry(vs.mesh, tris), pts)
    np.testing.assert_allclose(vals[..., 0], 0.0, atol=1e-13)
    np.testing.assert_allclose(vals[..., 1], 2.5 * x[..., 0], atol=1e-13)


@settings(max_examples=20, deadline=None)
@given(
    variant=st.sampled_from(RECON),
    n=st.sampled_from([2, 4, 8]),
    seed=st.integers(0, 10_000),
)
def test_divergence_commutes_with_reconstruction(variant, n, seed):
    vs = velocity_space(n, 0.2, seed)
    v = np.random.default_rng(seed).standard_normal(vs.ndof)
    div, pi0 = divergence_check(reconstruction(vs, variant), v)
    scale = max(1.0, np.abs(pi0).max())
    np.testing.assert_allclose(div, pi0, atol=1e-11 * scale)


def test_operator_rejects_mismatched_inputs():
    vs = velocity_space(2)
    other = velocity_space(2)
    space = build_hdiv_space(vs.mesh, vs.topology, "rt0")
    with pytest.raises(ValueError, match="built for rt0"):
        build_recon_operator(space, vs, "bdm1")
    with pytest.raises(ValueError, match="different meshes"):
        build_recon_operator(space, other)


def test_degenerate_modified_function_is_reported(monkeypatch):
    vs = velocity_space(2)
    monkeypatch.setattr(hdiv, "_R_SCALE", 0.0)
    with pytest.raises(np.linalg.LinAlgError, match="edge"):
        reconstruction(vs, "rt0_axi")

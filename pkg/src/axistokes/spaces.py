"""Bernardi-Raugel velocity space and piecewise-constant pressure space.

Velocity dofs are numbered ``[u_r at vertices | u_z at vertices | edge
bubbles]``. The bubble of edge ``E = (N_a, N_b)`` is ``lambda_a lambda_b n_E``
with the global edge normal of :meth:`Mesh.edge_normals`.

Element-local dofs (9 per triangle) follow the same layout: ``u_r`` at local
vertices 0..2, ``u_z`` at local vertices 0..2, bubbles on local edges 0..2.

Vector fields are callables mapping points ``(..., 2)`` to values ``(..., 2)``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .mesh import AxisTopology, Mesh
from .quadrature import edge_rule

Field = Callable[[np.ndarray], np.ndarray]

__all__ = [
    "VelocitySpace",
    "PressureSpace",
    "Geometry",
    "element_geometry",
    "build_spaces",
    "apply_dirichlet",
    "eval_velocity_basis",
    "velocity_basis",
    "evaluate_velocity",
    "interpolate_field",
    "reference_to_physical",
    "CORNER_TOL",
]

CORNER_TOL = 1e-12
N_LOCAL = 9


class Geometry(NamedTuple):
    x0: np.ndarray  # (M, 2) first vertex
    jac: np.ndarray  # (M, 2, 2) columns x1 - x0, x2 - x0
    det: np.ndarray  # (M,) signed Jacobian determinant = 2 * signed area
    grad_lambda: np.ndarray  # (M, 3, 2)


def element_geometry(mesh: Mesh, tris=None) -> Geometry:
    tris = np.arange(mesh.n_triangles) if tris is None else np.asarray(tris)
    p = mesh.vertices[mesh.triangles[tris]]
    x0 = p[:, 0]
    jac = np.stack([p[:, 1] - x0, p[:, 2] - x0], axis=2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    if np.any(det == 0):
        raise ValueError("degenerate triangle")
    inv = np.empty_like(jac)
    inv[:, 0, 0] = jac[:, 1, 1] / det
    inv[:, 0, 1] = -jac[:, 0, 1] / det
    inv[:, 1, 0] = -jac[:, 1, 0] / det
    inv[:, 1, 1] = jac[:, 0, 0] / det
    g1, g2 = inv[:, 0], inv[:, 1]
    grad_lambda = np.stack([-(g1 + g2), g1, g2], axis=1)
    return Geometry(x0, jac, det, grad_lambda)


def reference_to_physical(geom: Geometry, ref_pts: np.ndarray) -> np.ndarray:
    """Map ``(Q, 2)`` reference points onto every triangle: ``(M, Q, 2)``."""
    return geom.x0[:, None, :] + np.einsum("mij,qj->mqi", geom.jac, ref_pts)


def _barycentric(ref_pts: np.ndarray) -> np.ndarray:
    ref_pts = np.atleast_2d(ref_pts)
    return np.stack([1.0 - ref_pts[:, 0] - ref_pts[:, 1], ref_pts[:, 0], ref_pts[:, 1]], axis=1)


@dataclass(frozen=True, eq=False)
class VelocitySpace:
    """Bernardi-Raugel space with a constraint table.

    ``fixed[d]`` marks constrained dofs and ``values[d]`` holds their value.
    """

    mesh: Mesh
    topology: AxisTopology
    edge_normals: np.ndarray
    fixed: np.ndarray
    values: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.mesh.n_vertices

    @property
    def ndof(self) -> int:
        return 2 * self.mesh.n_vertices + self.mesh.n_edges

    def r_dof(self, v):
        return np.asarray(v)

    def z_dof(self, v):
        return self.mesh.n_vertices + np.asarray(v)

    def bubble_dof(self, e):
        return 2 * self.mesh.n_vertices + np.asarray(e)

    @property
    def cell_dofs(self) -> np.ndarray:
        """``(M, 9)`` global dof of every element-local dof."""
        t = self.mesh.triangles
        nv = self.mesh.n_vertices
        return np.hstack([t, t + nv, self.mesh.tri_edges + 2 * nv])

    def free_dofs(self) -> np.ndarray:
        return np.flatnonzero(~self.fixed)

    def fixed_dofs(self) -> np.ndarray:
        return np.flatnonzero(self.fixed)


@dataclass(frozen=True, eq=False)
class PressureSpace:
    """Piecewise constants; ``masses[T] = int_T r dr dz``."""

    mesh: Mesh
    masses: np.ndarray

    @property
    def ndof(self) -> int:
        return self.mesh.n_triangles

    @property
    def mean_vector(self) -> np.ndarray:
        return self.masses


def build_spaces(mesh: Mesh, topology: AxisTopology) -> tuple[VelocitySpace, PressureSpace]:
    """Create the velocity/pressure pair with the homogeneous axis constraints set.

    On the rotation axis ``u_r`` vanishes, and so does every axis-edge bubble
    (its normal is radial). Data on the remaining boundary is set by
    :func:`apply_dirichlet`.
    """
    nv, ne = mesh.n_vertices, mesh.n_edges
    ndof = 2 * nv + ne
    fixed = np.zeros(ndof, dtype=bool)
    values = np.zeros(ndof)
    fixed[topology.axis_vertices] = True
    fixed[2 * nv + topology.axis_edges] = True
    vspace = VelocitySpace(mesh, topology, mesh.edge_normals(), fixed, values)

    # exact: int_T r = |T| * r(centroid)
    centroid_r = mesh.vertices[mesh.triangles][:, :, 0].mean(axis=1)
    pspace = PressureSpace(mesh, mesh.areas() * centroid_r)
    return vspace, pspace


def _edge_bubble_coefficients(
    space: VelocitySpace,
    edges: np.ndarray,
    field: Field,
    vertex_values: np.ndarray,
    order: int,
    weighted: bool,
) -> np.ndarray:
    """Bubble coefficients matching the normal flux of ``field`` on ``edges``.

    ``vertex_values`` is ``(N, 2)``; the bubble makes the (r-weighted if
    ``weighted``) normal flux of the interpolant equal that of ``field``.
    Edges on the axis always use the unweighted flux.
    """
    if len(edges) == 0:
        return np.zeros(0)
    mesh = space.mesh
    rule = edge_rule(order)
    s, w = rule.points, rule.weights
    a, b = mesh.edges[edges, 0], mesh.edges[edges, 1]
    xa, xb = mesh.vertices[a], mesh.vertices[b]
    length = np.linalg.norm(xb - xa, axis=1)
    pts = xa[:, None, :] + s[None, :, None] * (xb - xa)[:, None, :]
    n = space.edge_normals[edges]
    g = np.asarray(field(pts), dtype=float)
    lin = (1 - s)[None, :, None] * vertex_values[a][:, None, :] + s[None, :, None] * vertex_values[
        b
    ][:, None, :]
    resid = np.einsum("eqc,ec->eq", g - lin, n)
    bub = (1 - s) * s
    weight = np.ones_like(pts[..., 0])
    if weighted:
        on_axis = space.topology.edge_kind[edges] == 1
        weight = np.where(on_axis[:, None], 1.0, pts[..., 0])
    num = (resid * weight) @ w * length
    den = (bub[None, :] * weight) @ w * length
    return num / den


def apply_dirichlet(
    space: VelocitySpace, g: Field | None, order: int = 10, weighted: bool = True
) -> VelocitySpace:
    """Return a copy of ``space`` with boundary data ``g`` imposed on Gamma.

    Vertex dofs on Gamma take the value of ``g``; the bubble of each Gamma
    edge is chosen so the normal flux of the interpolant matches that of ``g``
    (``int_E r g.n ds`` when ``weighted``, else ``int_E g.n ds``), computed
    with the Gauss rule of the given order. ``g=None`` imposes zero data.
    """
    mesh, topo = space.mesh, space.topology
    nv = mesh.n_vertices
    fixed = space.fixed.copy()
    values = space.values.copy()
    gv = topo.gamma_vertices
    ge = topo.gamma_edges

    if g is None:
        vertex_values = np.zeros((nv, 2))
    else:
        vertex_values = np.zeros((nv, 2))
        vertex_values[gv] = np.asarray(g(mesh.vertices[gv]), dtype=float).reshape(-1, 2)
        corners = gv[topo.on_axis[gv]]
        bad = corners[np.abs(vertex_values[corners, 0]) > CORNER_TOL]
        if len(bad):
            v = int(bad[0])
            raise ValueError(
                f"boundary datum has radial component {vertex_values[v, 0]!r} "
                f"at axis vertex {v} {tuple(mesh.vertices[v])}"
            )
    fixed[gv] = True
    fixed[nv + gv] = True
    values[gv] = vertex_values[gv, 0]
    values[nv + gv] = vertex_values[gv, 1]

    bdofs = 2 * nv + ge
    fixed[bdofs] = True
    if g is None:
        values[bdofs] = 0.0
    else:
        values[bdofs] = _edge_bubble_coefficients(space, ge, g, vertex_values, order, weighted)
    return dataclasses.replace(space, fixed=fixed, values=values)


def interpolate_field(
    space: VelocitySpace, v: Field, order: int = 10, weighted: bool = True
) -> np.ndarray:
    """Vertex values plus flux-matching bubbles on every edge."""
    mesh = space.mesh
    nv = mesh.n_vertices
    vertex_values = np.asarray(v(mesh.vertices), dtype=float).reshape(nv, 2)
    coeffs = np.empty(space.ndof)
    coeffs[:nv] = vertex_values[:, 0]
    coeffs[nv : 2 * nv] = vertex_values[:, 1]
    coeffs[2 * nv :] = _edge_bubble_coefficients(
        space, np.arange(mesh.n_edges), v, vertex_values, order, weighted
    )
    return coeffs


def velocity_basis(space: VelocitySpace, tris, ref_pts) -> tuple[np.ndarray, np.ndarray]:
    """Basis values ``(M, Q, 9, 2)`` and gradients ``(M, Q, 9, 2, 2)``.

    ``grads[..., c, d]`` is the derivative of component ``c`` along ``d``.
    """
    tris = np.atleast_1d(np.asarray(tris))
    geom = element_geometry(space.mesh, tris)
    lam = _barycentric(ref_pts)  # (Q, 3)
    gl = geom.grad_lambda  # (M, 3, 2)
    M, Q = len(tris), len(lam)
    vals = np.zeros((M, Q, N_LOCAL, 2))
    grads = np.zeros((M, Q, N_LOCAL, 2, 2))
    for k in range(3):
        vals[:, :, k, 0] = lam[None, :, k]
        vals[:, :, 3 + k, 1] = lam[None, :, k]
        grads[:, :, k, 0, :] = gl[:, None, k, :]
        grads[:, :, 3 + k, 1, :] = gl[:, None, k, :]
    normals = space.edge_normals[space.mesh.tri_edges[tris]]  # (M, 3, 2)
    for k in range(3):
        a, b = (k + 1) % 3, (k + 2) % 3
        bub = lam[:, a] * lam[:, b]  # (Q,)
        dbub = lam[None, :, a, None] * gl[:, None, b, :] + lam[None, :, b, None] * gl[:, None, a, :]
        n = normals[:, k, :]  # (M, 2)
        vals[:, :, 6 + k, :] = bub[None, :, None] * n[:, None, :]
        grads[:, :, 6 + k, :, :] = n[:, None, :, None] * dbub[:, :, None, :]
    return vals, grads


def eval_velocity_basis(space: VelocitySpace, triangle: int, ref_point) -> tuple[np.ndarray, np.ndarray]:
    """Values ``(9, 2)`` and gradients ``(9, 2, 2)`` of the local basis at one point."""
    ref_point = np.asarray(ref_point, dtype=float).reshape(1, 2)
    vals, grads = velocity_basis(space, [triangle], ref_point)
    return vals[0, 0], grads[0, 0]


def evaluate_velocity(space: VelocitySpace, coeffs, tris, ref_pts) -> tuple[np.ndarray, np.ndarray]:
    """Field values ``(M, Q, 2)`` and gradients ``(M, Q, 2, 2)`` of a coefficient vector."""
    tris = np.atleast_1d(np.asarray(tris))
    vals, grads = velocity_basis(space, tris, ref_pts)
    c = np.asarray(coeffs)[space.cell_dofs[tris]]  # (M, 9)
    return np.einsum("mqic,mi->mqc", vals, c), np.einsum("mqicd,mi->mqcd", grads, c)

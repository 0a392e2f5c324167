"""Assembly of the weighted stiffness, divergence and load terms.

All element loops are vectorized over chunks of triangles and accumulate
through COO triplets in fixed element order, so repeated runs are
bit-identical.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .hdiv import ReconOperator, hdiv_basis
from .quadrature import triangle_rule
from .spaces import (
    Field,
    PressureSpace,
    VelocitySpace,
    element_geometry,
    reference_to_physical,
    velocity_basis,
)

__all__ = [
    "CellwiseConstantField",
    "SparseSystem",
    "ReducedSystem",
    "assemble_a",
    "assemble_b",
    "assemble_rhs",
    "assemble_system",
    "eliminate_constraints",
    "chunks",
]

# cap on (triangles x quadrature points) held in memory per chunk
_CHUNK_POINTS = 200_000


def chunks(n_triangles: int, n_points: int):
    size = max(1, _CHUNK_POINTS // max(n_points, 1))
    for start in range(0, n_triangles, size):
        yield np.arange(start, min(start + size, n_triangles))


def assemble_a(space: VelocitySpace, qorder_a: int = 4) -> sp.csr_matrix:
    """``a(u, v) = int r grad u : grad v + int u_r v_r / r`` on all velocity dofs."""
    mesh = space.mesh
    rule = triangle_rule(qorder_a)
    dofs = space.cell_dofs
    rows, cols, vals = [], [], []
    for tris in chunks(mesh.n_triangles, rule.n_points):
        geom = element_geometry(mesh, tris)
        x = reference_to_physical(geom, rule.points)
        r = x[..., 0]
        assert np.all(r > 0), "quadrature node on the axis"
        phi, grad = velocity_basis(space, tris, rule.points)
        w = rule.weights[None, :] * np.abs(geom.det)[:, None]
        local = np.einsum("mq,mqicd,mqjcd->mij", w * r, grad, grad)
        local += np.einsum("mq,mqi,mqj->mij", w / r, phi[..., 0], phi[..., 0])
        d = dofs[tris]
        rows.append(np.repeat(d, 9, axis=1).ravel())
        cols.append(np.tile(d, (1, 9)).ravel())
        vals.append(local.ravel())
    n = space.ndof
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


def assemble_b(space: VelocitySpace, pressure: PressureSpace, qorder_b: int = 4) -> sp.csr_matrix:
    """``B[T, i] = int_T div(r phi_i)`` with ``div(r phi) = r div phi + phi_r``."""
    mesh = space.mesh
    rule = triangle_rule(qorder_b)
    dofs = space.cell_dofs
    rows, cols, vals = [], [], []
    for tris in chunks(mesh.n_triangles, rule.n_points):
        geom = element_geometry(mesh, tris)
        r = reference_to_physical(geom, rule.points)[..., 0]
        phi, grad = velocity_basis(space, tris, rule.points)
        div_r = r[..., None] * (grad[..., 0, 0] + grad[..., 1, 1]) + phi[..., 0]
        w = rule.weights[None, :] * np.abs(geom.det)[:, None]
        local = np.einsum("mq,mqi->mi", w, div_r)
        rows.append(np.repeat(tris, 9))
        cols.append(dofs[tris].ravel())
        vals.append(local.ravel())
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(pressure.ndof, space.ndof),
    )


@dataclass(frozen=True, eq=False)
class CellwiseConstantField:
    """Vector load that is constant on each triangle; ``values`` has shape ``(n_triangles, 2)``."""

    values: np.ndarray


def _eval_load(f, x: np.ndarray, tris: np.ndarray) -> np.ndarray:
    if isinstance(f, CellwiseConstantField):
        fx = np.broadcast_to(np.asarray(f.values, dtype=float)[tris][:, None, :], x.shape)
    else:
        fx = np.asarray(f(x), dtype=float)
    if not np.all(np.isfinite(fx)):
        bad = np.argwhere(~np.isfinite(fx).all(axis=-1))[0]
        raise ValueError(f"load is not finite at quadrature node {tuple(x[tuple(bad)])}")
    return fx


def assemble_rhs(
    space: VelocitySpace,
    recon: ReconOperator | None,
    f: Field | CellwiseConstantField,
    qorder_rhs: int = 10,
) -> np.ndarray:
    """Load vector ``F_i = (f, Pi(r phi_i))``.

    ``recon=None`` is the identity (``F_i = int f . r phi_i``); otherwise the
    per-H(div)-dof integrals ``L_d = int f . psi_d`` are pulled back with the
    transpose of the reconstruction matrix.
    """
    mesh = space.mesh
    rule = triangle_rule(qorder_rhs)
    if recon is None:
        F = np.zeros(space.ndof)
        for tris in chunks(mesh.n_triangles, rule.n_points):
            geom = element_geometry(mesh, tris)
            x = reference_to_physical(geom, rule.points)
            fx = _eval_load(f, x, tris)
            phi, _ = velocity_basis(space, tris, rule.points)
            w = rule.weights[None, :] * np.abs(geom.det)[:, None] * x[..., 0]
            local = np.einsum("mq,mqc,mqic->mi", w, fx, phi)
            np.add.at(F, space.cell_dofs[tris].ravel(), local.ravel())
        return F

    hspace = recon.space
    L = np.zeros(hspace.ndof)
    for tris in chunks(mesh.n_triangles, rule.n_points):
        geom = element_geometry(mesh, tris)
        x = reference_to_physical(geom, rule.points)
        fx = _eval_load(f, x, tris)
        psi, _ = hdiv_basis(hspace, tris, rule.points)
        w = rule.weights[None, :] * np.abs(geom.det)[:, None]
        local = np.einsum("mq,mqc,mqic->mi", w, fx, psi)
        idx = hspace.tri_dofs[tris]
        keep = idx >= 0
        np.add.at(L, idx[keep], local[keep])
    return recon.matrix.T @ L


@dataclass(frozen=True, eq=False)
class SparseSystem:
    """Full (unreduced) discrete Stokes system.

    ``A`` is the unscaled form ``a``; the viscosity enters as ``nu * A``.
    """

    velocity_space: VelocitySpace
    pressure_space: PressureSpace
    A: sp.csr_matrix
    B: sp.csr_matrix
    F: np.ndarray
    nu: float

    @property
    def m(self) -> np.ndarray:
        return self.pressure_space.masses


@dataclass(frozen=True, eq=False)
class ReducedSystem:
    """System restricted to free velocity dofs.

    ``F`` and ``G`` carry the couplings of the Dirichlet values; the
    momentum equation is ``nu A u - B^T p = F`` and the continuity equation
    ``B u = G`` (``G = -B_fixed u_fixed``).
    """

    full: SparseSystem
    free: np.ndarray
    A: sp.csr_matrix
    B: sp.csr_matrix
    F: np.ndarray
    G: np.ndarray

    @property
    def nu(self) -> float:
        return self.full.nu

    @property
    def m(self) -> np.ndarray:
        return self.full.m

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        vs = self.full.velocity_space
        u = vs.values.copy()
        u[self.free] = u_free
        return u


def assemble_system(
    space: VelocitySpace,
    pressure: PressureSpace,
    recon: ReconOperator | None,
    f: Field,
    nu: float,
    qorder_a: int = 4,
    qorder_rhs: int = 10,
) -> SparseSystem:
    if not nu > 0:
        raise ValueError(f"viscosity must be positive, got {nu}")
    return SparseSystem(
        velocity_space=space,
        pressure_space=pressure,
        A=assemble_a(space, qorder_a),
        B=assemble_b(space, pressure),
        F=assemble_rhs(space, recon, f, qorder_rhs),
        nu=float(nu),
    )


def eliminate_constraints(system: SparseSystem) -> ReducedSystem:
    vs = system.velocity_space
    free = vs.free_dofs()
    fixed = vs.fixed_dofs()
    u_fixed = vs.values[fixed]
    A = system.A.tocsc()
    B = system.B.tocsc()
    A_ff = A[free][:, free].tocsr()
    A_fc = A[free][:, fixed]
    F = system.F[free] - system.nu * (A_fc @ u_fixed)
    G = -(B[:, fixed] @ u_fixed)
    return ReducedSystem(system, free, A_ff, B[:, free].tocsr(), F, G)

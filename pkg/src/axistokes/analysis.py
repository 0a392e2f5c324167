"""Error norms, diagnostics and convergence rates."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .assembly import assemble_b, chunks
from .cases import ManufacturedCase, weighted_mean_shift
from .hdiv import ReconOperator, _local_edge_index, edge_reference_points
from .mesh import Mesh
from .quadrature import edge_rule, triangle_rule
from .solver import StokesSolution
from .spaces import (
    PressureSpace,
    VelocitySpace,
    element_geometry,
    evaluate_velocity,
    reference_to_physical,
)

__all__ = [
    "ErrorReport",
    "error_norms",
    "energy_norm",
    "eoc",
    "pressure_best_approx",
    "reconstruct_values",
]


@dataclass(frozen=True)
class ErrorReport:
    err_energy: float
    err_u_L21: float
    err_recon_L2m1: float
    err_p_L21: float
    axis_trace: float
    recon_L2: float
    div_inf: float
    norm_u_V: float
    h_max: float
    n_velocity: int
    n_free_velocity: int
    n_pressure: int

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def reconstruct_values(
    recon: ReconOperator | None, space: VelocitySpace, coeffs, tris, ref_pts
) -> np.ndarray:
    """Values of ``Pi(r v_h)`` (``r v_h`` for the identity), shape ``(M, Q, 2)``."""
    if recon is not None:
        return recon.evaluate(coeffs, tris, ref_pts)
    vals, _ = evaluate_velocity(space, coeffs, tris, ref_pts)
    x = reference_to_physical(element_geometry(space.mesh, tris), np.asarray(ref_pts))
    return x[..., 0:1] * vals


def energy_norm(u, grad_u, mesh: Mesh, order: int = 10) -> float:
    """``sqrt(int r |grad u|^2 + u_r^2 / r)`` of an analytic field."""
    rule = triangle_rule(order)
    total = 0.0
    for tris in chunks(mesh.n_triangles, rule.n_points):
        geom = element_geometry(mesh, tris)
        x = reference_to_physical(geom, rule.points)
        r = x[..., 0]
        w = rule.weights[None, :] * np.abs(geom.det)[:, None]
        g = grad_u(x)
        ur = u(x)[..., 0]
        total += np.sum(w * (r * np.sum(g**2, axis=(-2, -1)) + ur**2 / r))
    return float(np.sqrt(total))


def _axis_trace(recon: ReconOperator | None, space: VelocitySpace, coeffs, order: int) -> float:
    if recon is None:
        return 0.0  # r v_h vanishes identically at r = 0
    mesh = space.mesh
    edges = space.topology.axis_edges
    if len(edges) == 0:
        return 0.0
    rule = edge_rule(order)
    tris = mesh.edge_tris[edges, 0]
    k = _local_edge_index(mesh, tris, edges)
    ref = edge_reference_points(mesh, tris, k, rule.points)
    vals = recon.evaluate(coeffs, tris, ref)
    length = mesh.edge_lengths()[edges]
    return float(np.sqrt(np.sum(np.sum(vals**2, axis=-1) @ rule.weights * length)))


def error_norms(
    solution: StokesSolution,
    case: ManufacturedCase,
    space: VelocitySpace,
    pressure: PressureSpace,
    recon: ReconOperator | None,
    qorder_err: int = 10,
) -> ErrorReport:
    mesh = space.mesh
    rule = triangle_rule(qorder_err)
    u_h = solution.u
    p_ex = weighted_mean_shift(case, mesh)
    m = pressure.masses
    p_h = solution.p - (solution.p @ m) / m.sum()

    acc = dict(energy=0.0, l21=0.0, recon=0.0, recon_l2=0.0, p=0.0)
    for tris in chunks(mesh.n_triangles, rule.n_points):
        geom = element_geometry(mesh, tris)
        x = reference_to_physical(geom, rule.points)
        r = x[..., 0]
        w = rule.weights[None, :] * np.abs(geom.det)[:, None]
        vals, grads = evaluate_velocity(space, u_h, tris, rule.points)
        ue = case.u(x)
        e = ue - vals
        ge = case.grad_u(x) - grads
        acc["energy"] += np.sum(w * (r * np.sum(ge**2, axis=(-2, -1)) + e[..., 0] ** 2 / r))
        acc["l21"] += np.sum(w * r * np.sum(e**2, axis=-1))
        pi = reconstruct_values(recon, space, u_h, tris, rule.points)
        acc["recon"] += np.sum(w * np.sum((r[..., None] * ue - pi) ** 2, axis=-1) / r)
        acc["recon_l2"] += np.sum(w * np.sum(pi**2, axis=-1))
        acc["p"] += np.sum(w * r * (p_ex(x) - p_h[tris, None]) ** 2)

    if recon is not None:
        div = recon.divergence(u_h)
    else:
        # mean of div(r u_h) per triangle
        div = (assemble_b(space, pressure) @ u_h) / mesh.areas()

    return ErrorReport(
        err_energy=float(np.sqrt(acc["energy"])),
        err_u_L21=float(np.sqrt(acc["l21"])),
        err_recon_L2m1=float(np.sqrt(acc["recon"])),
        err_p_L21=float(np.sqrt(acc["p"])),
        axis_trace=_axis_trace(recon, space, u_h, qorder_err),
        recon_L2=float(np.sqrt(acc["recon_l2"])),
        div_inf=float(np.max(np.abs(div))),
        norm_u_V=energy_norm(case.u, case.grad_u, mesh, qorder_err),
        h_max=mesh.h_max(),
        n_velocity=space.ndof,
        n_free_velocity=int(np.count_nonzero(~space.fixed)),
        n_pressure=pressure.ndof,
    )


def eoc(errors, h) -> np.ndarray:
    """Rates ``log(e_k / e_{k+1}) / log(h_k / h_{k+1})``; NaN where undefined."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(h, dtype=float)
    if e.shape != h.shape or e.ndim != 1:
        raise ValueError("errors and mesh sizes must be 1D arrays of equal length")
    if len(e) < 2:
        raise ValueError("at least two levels are needed")
    rates = np.full(len(e) - 1, np.nan)
    ok = (e[:-1] > 0) & (e[1:] > 0) & np.isfinite(e[:-1]) & np.isfinite(e[1:])
    rates[ok] = np.log(e[:-1][ok] / e[1:][ok]) / np.log(h[:-1][ok] / h[1:][ok])
    return rates


def pressure_best_approx(case_or_p, mesh: Mesh, order: int = 10) -> float:
    """``L^2_1`` distance of a pressure from piecewise constants (weighted means)."""
    p = case_or_p.p if isinstance(case_or_p, ManufacturedCase) else case_or_p
    rule = triangle_rule(order)
    total = 0.0
    for tris in chunks(mesh.n_triangles, rule.n_points):
        geom = element_geometry(mesh, tris)
        x = reference_to_physical(geom, rule.points)
        w = rule.weights[None, :] * np.abs(geom.det)[:, None] * x[..., 0]
        px = np.asarray(p(x), dtype=float)
        mean = np.sum(w * px, axis=1) / np.sum(w, axis=1)
        total += np.sum(w * (px - mean[:, None]) ** 2)
    return float(np.sqrt(total))

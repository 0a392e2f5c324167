"""Manufactured axisymmetric Stokes solutions.

Every case stores the load split as ``f = nu * f_visc + f_pres`` with
``f_visc = -Delta_axi u`` and ``f_pres = grad p``, where::

    Delta_axi u = (Delta u_r + u_r,r / r - u_r / r^2,  Delta u_z + u_z,r / r)

The closed forms are hand-derived; :func:`verify_case` re-derives them by
central finite differences and is run before any experiment uses a case.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mesh import Mesh
from .quadrature import triangle_rule
from .spaces import element_geometry, reference_to_physical

__all__ = [
    "ManufacturedCase",
    "CaseVerificationError",
    "ShiftedPressure",
    "catalog",
    "get_case",
    "verify_case",
    "weighted_mean",
    "weighted_mean_shift",
]

Array = np.ndarray


class CaseVerificationError(AssertionError):
    pass


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    u: Callable[[Array], Array]
    grad_u: Callable[[Array], Array]  # (..., 2, 2), [c, d] = d_d u_c
    p: Callable[[Array], Array]
    f_visc: Callable[[Array], Array]
    f_pres: Callable[[Array], Array]
    regularity: str
    nus: tuple[float, ...]

    def f(self, nu: float) -> Callable[[Array], Array]:
        def load(x: Array) -> Array:
            return nu * self.f_visc(x) + self.f_pres(x)

        return load


def _vec(a, b) -> Array:
    a, b = np.broadcast_arrays(a, b)
    return np.stack([a, b], axis=-1)


def _mat(a, b, c, d) -> Array:
    a, b, c, d = np.broadcast_arrays(a, b, c, d)
    return np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2)


def _rz(x: Array) -> tuple[Array, Array]:
    x = np.asarray(x, dtype=float)
    return x[..., 0], x[..., 1]


def _ex1() -> ManufacturedCase:
    def u(x):
        r, z = _rz(x)
        return _vec(r, -2 * z)

    def grad_u(x):
        r, z = _rz(x)
        zero = np.zeros_like(r)
        return _mat(zero + 1, zero, zero, zero - 2)

    def p(x):
        r, z = _rz(x)
        return r**1.75 + z**2

    def f_visc(x):
        r, _ = _rz(x)
        return np.zeros(r.shape + (2,))

    def f_pres(x):
        r, z = _rz(x)
        return _vec(1.75 * r**0.75, 2 * z)

    return ManufacturedCase("ex1", u, grad_u, p, f_visc, f_pres, "L2", (1.0,))


def _ex2() -> ManufacturedCase:
    def u(x):
        r, z = _rz(x)
        return _vec(r**3 * np.sin(z), 4 * r**2 * np.cos(z))

    def grad_u(x):
        r, z = _rz(x)
        s, c = np.sin(z), np.cos(z)
        return _mat(3 * r**2 * s, r**3 * c, 8 * r * c, -4 * r**2 * s)

    def p(x):
        r, z = _rz(x)
        return np.sin(np.pi * (r**2 + z**2))

    def f_visc(x):
        r, z = _rz(x)
        return _vec(-(8 * r - r**3) * np.sin(z), -(16 - 4 * r**2) * np.cos(z))

    def f_pres(x):
        r, z = _rz(x)
        c = np.cos(np.pi * (r**2 + z**2))
        return _vec(2 * np.pi * r * c, 2 * np.pi * z * c)

    return ManufacturedCase("ex2", u, grad_u, p, f_visc, f_pres, "L2", _DECADES)


def _ex3() -> ManufacturedCase:
    def u(x):
        r, z = _rz(x)
        return _vec(r**2.1, -3.1 * r**1.1 * z)

    def grad_u(x):
        r, z = _rz(x)
        return _mat(2.1 * r**1.1, np.zeros_like(r), -3.41 * r**0.1 * z, -3.1 * r**1.1)

    def p(x):
        r, _ = _rz(x)
        return np.sqrt(r) - 8.0 / 9.0

    def f_visc(x):
        r, z = _rz(x)
        return _vec(-3.41 * r**0.1, 3.751 * r**-0.9 * z)

    def f_pres(x):
        r, _ = _rz(x)
        return _vec(0.5 / np.sqrt(r), np.zeros_like(r))

    return ManufacturedCase("ex3", u, grad_u, p, f_visc, f_pres, "L2_1 minus L2", _DECADES)


_DECADES = tuple(10.0**-k for k in range(9))


def catalog() -> list[ManufacturedCase]:
    return [_ex1(), _ex2(), _ex3()]


def get_case(name: str) -> ManufacturedCase:
    for case in catalog():
        if case.name == name:
            return case
    raise KeyError(f"unknown case {name!r}; choose from ex1, ex2, ex3")


def _central(fun, x: Array, h: float) -> Array:
    """Central differences ``(..., out, 2)`` of ``fun`` in r and z."""
    out = []
    for d in range(2):
        e = np.zeros(2)
        e[d] = h
        out.append((np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2 * h))
    return np.stack(out, axis=-1)


def fd_residuals(case: ManufacturedCase, nu: float, x: Array, h: float = 1e-5) -> dict[str, float]:
    """Relative discrepancies between closed forms and finite differences at ``x``."""
    r = x[:, 0]
    u = case.u(x)
    g = case.grad_u(x)
    g_fd = _central(case.u, x, h)
    # second derivatives from differences of the analytic gradient
    hess = _central(case.grad_u, x, h)  # (..., c, d, e)
    lap = hess[..., 0, 0] + hess[..., 1, 1]
    lap_axi = np.stack(
        [lap[:, 0] + g_fd[:, 0, 0] / r - u[:, 0] / r**2, lap[:, 1] + g_fd[:, 1, 0] / r], axis=-1
    )
    grad_p = _central(case.p, x, h)
    f_fd = -nu * lap_axi + grad_p
    f = case.f(nu)(x)
    div_axi = g[:, 0, 0] + g[:, 1, 1] + u[:, 0] / r
    return {
        "grad_u": float(np.max(np.abs(g - g_fd)) / max(np.max(np.abs(g)), 1.0)),
        "f": float(np.max(np.linalg.norm(f - f_fd, axis=-1) / np.maximum(np.linalg.norm(f, axis=-1), 1e-300))),
        "div_axi": float(np.max(np.abs(div_axi))),
        "axis_u_r": float(np.max(np.abs(case.u(_vec(np.zeros(5), np.linspace(0, 1, 5)))[:, 0]))),
    }


def verify_case(
    case: ManufacturedCase, nu: float = 1.0, n_points: int = 200, seed: int = 0, rtol: float = 1e-5
) -> dict[str, float]:
    """Finite-difference gate for a case; raises :class:`CaseVerificationError`."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.05, 0.95, size=(n_points, 2))
    res = fd_residuals(case, nu, x)
    limits = {"grad_u": rtol, "f": rtol, "div_axi": 1e-10, "axis_u_r": 0.0}
    for key, lim in limits.items():
        if not res[key] <= lim:
            raise CaseVerificationError(f"{case.name}: {key} check failed ({res[key]:.3e} > {lim:g})")
    return res


def weighted_mean(p: Callable[[Array], Array], mesh: Mesh, order: int = 20) -> float:
    """``int r p / int r`` over the mesh."""
    rule = triangle_rule(order)
    geom = element_geometry(mesh)
    x = reference_to_physical(geom, rule.points)
    w = rule.weights[None, :] * np.abs(geom.det)[:, None] * x[..., 0]
    return float(np.sum(w * p(x)) / np.sum(w))


@dataclass(frozen=True)
class ShiftedPressure:
    base: Callable[[Array], Array]
    shift: float

    def __call__(self, x: Array) -> Array:
        return self.base(x) - self.shift


def weighted_mean_shift(case_or_p, mesh: Mesh, order: int = 20) -> ShiftedPressure:
    """Pressure minus its weighted mean, so it is comparable to a discrete one."""
    p = case_or_p.p if isinstance(case_or_p, ManufacturedCase) else case_or_p
    return ShiftedPressure(p, weighted_mean(p, mesh, order))

"""Positive-weight quadrature on the reference triangle and reference edge.

The reference triangle is ``{(x, y): x, y >= 0, x + y <= 1}`` (area 1/2) and
the reference edge is ``[0, 1]``. Triangle rules are tensor Gauss-Legendre
rules on the square collapsed onto the triangle (Duffy map), so every node is
strictly interior and every weight positive, for any order.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

MAX_ORDER = 50

__all__ = ["QuadRule", "triangle_rule", "edge_rule", "map_to_physical", "MAX_ORDER"]


@dataclass(frozen=True, eq=False)
class QuadRule:
    """Quadrature nodes and weights on a reference element.

    ``points`` is ``(Q, 2)`` for triangle rules and ``(Q,)`` for edge rules.
    """

    points: np.ndarray
    weights: np.ndarray
    exactness_order: int

    @property
    def n_points(self) -> int:
        return len(self.weights)

    @property
    def barycentric(self) -> np.ndarray:
        """``(Q, 3)`` barycentric coordinates of triangle nodes."""
        x, y = self.points[:, 0], self.points[:, 1]
        return np.stack([1.0 - x - y, x, y], axis=1)


def _check_order(order) -> int:
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)):
        raise TypeError(f"quadrature order must be an integer, got {order!r}")
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"quadrature order must lie in [1, {MAX_ORDER}], got {order}")
    return int(order)


def _gauss01(m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


@functools.lru_cache(maxsize=None)
def _triangle_rule(order: int) -> QuadRule:
    m = -(-(order + 2) // 2)
    u, wu = _gauss01(m)
    v, wv = _gauss01(m)
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv) * (1.0 - U)
    pts = np.stack([U.ravel(), ((1.0 - U) * V).ravel()], axis=1)
    pts.setflags(write=False)
    w = W.ravel()
    w.setflags(write=False)
    return QuadRule(pts, w, order)


@functools.lru_cache(maxsize=None)
def _edge_rule(order: int) -> QuadRule:
    m = -(-(order + 1) // 2)
    s, w = _gauss01(m)
    s.setflags(write=False)
    w.setflags(write=False)
    return QuadRule(s, w, order)


def triangle_rule(order: int) -> QuadRule:
    """Rule on the reference triangle exact for total degree ``<= order``.

    Uses ``ceil((order + 2) / 2)`` Gauss points per collapsed direction; the
    extra point accounts for the ``(1 - u)`` Jacobian of the collapse.
    """
    return _triangle_rule(_check_order(order))


def edge_rule(order: int) -> QuadRule:
    """Gauss-Legendre rule on ``[0, 1]`` exact for degree ``<= order``."""
    return _edge_rule(_check_order(order))


def map_to_physical(rule: QuadRule, coords) -> tuple[np.ndarray, np.ndarray]:
    """Affine push-forward of ``rule`` onto a triangle ``(3, 2)`` or edge ``(2, 2)``.

    Returns physical nodes and weights scaled by the Jacobian (``2 * area`` for
    triangles, length for edges).
    """
    coords = np.asarray(coords, dtype=float)
    if coords.shape == (3, 2):
        if rule.points.ndim != 2:
            raise ValueError("triangle geometry needs a triangle rule")
        J = np.column_stack([coords[1] - coords[0], coords[2] - coords[0]])
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        if abs(det) <= 1e-300 or not np.isfinite(det):
            raise ValueError("degenerate triangle")
        return coords[0] + rule.points @ J.T, rule.weights * abs(det)
    if coords.shape == (2, 2):
        if rule.points.ndim != 1:
            raise ValueError("edge geometry needs an edge rule")
        d = coords[1] - coords[0]
        length = float(np.hypot(d[0], d[1]))
        if length <= 1e-300:
            raise ValueError("degenerate edge")
        return coords[0] + rule.points[:, None] * d, rule.weights * length
    raise ValueError(f"expected triangle (3, 2) or edge (2, 2) coordinates, got {coords.shape}")

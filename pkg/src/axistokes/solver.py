"""Direct solution of the bordered saddle-point system.

The unknowns are free velocity coefficients, elementwise pressures and one
multiplier ``mu`` for the weighted zero-mean condition ``sum_T p_T m_T = 0``::

    [ nu A   -B^T   0 ] [u ]   [F]
    [ -B      0     m ] [p ] = [-G]
    [  0      m^T   0 ] [mu]   [0]

The matrix is factorized once for ``nu = 1`` after the substitution
``p = nu * p~``; this is exact, so one factorization serves every viscosity
and every load vector on a mesh.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import ReducedSystem

__all__ = [
    "SolverError",
    "StokesSolution",
    "StokesFactorization",
    "factorize",
    "solve_stokes",
    "discrete_divergence_residual",
    "RESIDUAL_TOL",
]

RESIDUAL_TOL = 1e-10
_REFINEMENT_STEPS = 2


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class StokesSolution:
    u: np.ndarray
    p: np.ndarray
    multiplier: float
    residual: float
    nu: float
    info: dict = field(default_factory=dict)


def _kkt(A: sp.spmatrix, B: sp.spmatrix, m: np.ndarray, nu: float) -> sp.csc_matrix:
    mcol = sp.csr_matrix(m.reshape(-1, 1))
    return sp.bmat(
        [
            [nu * A, -B.T, None],
            [-B, None, mcol],
            [None, mcol.T, None],
        ],
        format="csc",
    )


class StokesFactorization:
    """LU factorization of the unit-viscosity KKT matrix of a reduced system."""

    def __init__(self, A: sp.spmatrix, B: sp.spmatrix, m: np.ndarray):
        self.A = sp.csr_matrix(A)
        self.B = sp.csr_matrix(B)
        self.m = np.asarray(m, dtype=float)
        self.nu_ = self.A.shape[0]
        self.np_ = self.B.shape[0]
        if self.nu_ == 0:
            raise SolverError(
                "structural deficiency: no free velocity dofs, the pressure is undetermined"
            )
        self.K = _kkt(self.A, self.B, self.m, 1.0)
        try:
            self.lu = spla.splu(self.K, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolverError(
                f"structural deficiency: singular KKT matrix ({exc}); "
                "check the mean constraint and the velocity constraints"
            ) from exc

    def condition_estimate(self) -> float:
        n = self.K.shape[0]
        inv = spla.LinearOperator(
            (n, n), matvec=self.lu.solve, rmatvec=lambda x: self.lu.solve(x, trans="T")
        )
        return float(spla.onenormest(self.K) * spla.onenormest(inv))

    def solve(self, F: np.ndarray, G: np.ndarray, nu: float) -> tuple[np.ndarray, np.ndarray, float, float]:
        """Return ``(u_free, p, mu, relative residual)`` for viscosity ``nu``."""
        nv = self.nu_
        rhs = np.concatenate([np.asarray(F, float) / nu, -np.asarray(G, float), [0.0]])
        x = self.lu.solve(rhs)
        for _ in range(_REFINEMENT_STEPS):
            x += self.lu.solve(rhs - self.K @ x)
        # residual of the factorized unit-viscosity form; with p = nu p~ it is the
        # nu-scaled system with its momentum rows divided by nu
        rel = float(np.linalg.norm(rhs - self.K @ x) / (np.linalg.norm(rhs) + np.finfo(float).tiny))
        u = x[:nv]
        p = nu * x[nv : nv + self.np_]
        mu = nu * x[-1]
        if not np.isfinite(rel) or rel > RESIDUAL_TOL and np.linalg.norm(rhs) > 0:
            raise SolverError(
                f"relative residual {rel:.3e} exceeds {RESIDUAL_TOL:g}; "
                f"condition estimate {self.condition_estimate():.3e}"
            )
        return u, p, float(mu), rel


def factorize(system: ReducedSystem) -> StokesFactorization:
    return StokesFactorization(system.A, system.B, system.m)


def solve_stokes(
    system: ReducedSystem, factorization: StokesFactorization | None = None
) -> StokesSolution:
    fac = factorization if factorization is not None else factorize(system)
    u_free, p, mu, rel = fac.solve(system.F, system.G, system.nu)
    m = system.m
    mean = abs(p @ m)
    if mean > 1e-12 * np.linalg.norm(p) * np.linalg.norm(m) + 1e-300:
        raise SolverError(f"weighted pressure mean {mean:.3e} not zero")
    return StokesSolution(
        u=system.expand(u_free),
        p=p,
        multiplier=mu,
        residual=rel,
        nu=system.nu,
        info={
            "n_free_velocity": len(system.free),
            "n_velocity": system.full.velocity_space.ndof,
            "n_pressure": len(p),
        },
    )


def discrete_divergence_residual(solution: StokesSolution, system: ReducedSystem) -> float:
    """``max_T |(B u_h)_T| / m_T`` over all triangles."""
    Bu = system.full.B @ solution.u
    return float(np.max(np.abs(Bu) / system.m))

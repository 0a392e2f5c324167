"""Batch experiments: convergence studies, viscosity sweeps, quadrature sweeps.

Every run on one mesh shares a single assembly of ``a`` and ``b`` and a
single factorization of the saddle-point matrix; only the load vector
depends on the reconstruction variant, the viscosity and the load
quadrature order. Rows are emitted in a fixed order, so identical
configurations produce byte-identical CSV files.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .analysis import error_norms, eoc
from .assembly import (
    ReducedSystem,
    SparseSystem,
    assemble_a,
    assemble_b,
    assemble_rhs,
    eliminate_constraints,
)
from .cases import ManufacturedCase, get_case, verify_case
from .hdiv import ReconVariant, reconstruction
from .mesh import classify, generate_unit_square_mesh
from .solver import discrete_divergence_residual, factorize, solve_stokes
from .spaces import apply_dirichlet, build_spaces

__all__ = [
    "RunConfig",
    "LevelRun",
    "VARIANTS",
    "run_convergence",
    "run_nu_sweep",
    "run_quadrature_sweep",
    "level_for_dofs",
    "count_dofs",
    "write_csv",
    "format_csv",
]

log = logging.getLogger(__name__)

VARIANTS = tuple(v.value for v in ReconVariant)
RESULT_FIELDS = (
    "err_energy",
    "err_u_L21",
    "err_recon_L2m1",
    "err_p_L21",
    "axis_trace",
    "recon_L2",
    "div_inf",
)


@dataclass(frozen=True)
class RunConfig:
    """Experiment configuration.

    ``variants``, ``nus`` and ``levels`` are swept in that nesting order
    (outermost: level). Defaults follow the standard quadrature setup:
    order 4 for ``a``, order 10 for loads and error norms.
    """

    case: str = "ex2"
    variants: tuple[str, ...] = ("bdm1_axi",)
    nus: tuple[float, ...] = (1.0,)
    levels: tuple[int, ...] = (4, 8, 16, 32)
    jitter: float = 0.2
    seed: int = 1
    qorder_a: int = 4
    qorder_rhs: int = 10
    qorder_err: int = 10
    out: str | None = None

    def __post_init__(self):
        for v in self.variants:
            ReconVariant(v)
        if any(not nu > 0 for nu in self.nus):
            raise ValueError("viscosities must be positive")
        if any(n < 1 for n in self.levels):
            raise ValueError("levels must be positive")
        get_case(self.case)


class LevelRun:
    """Shared per-mesh state: spaces, matrices and the factorization."""

    def __init__(self, case: ManufacturedCase, n: int, jitter: float, seed: int, qorder_a: int):
        self.case = case
        self.n = n
        self.mesh = generate_unit_square_mesh(n, jitter=jitter, seed=seed)
        self.topology = classify(self.mesh)
        vs, self.pressure = build_spaces(self.mesh, self.topology)
        self.velocity = apply_dirichlet(vs, case.u)
        self.A = assemble_a(self.velocity, qorder_a)
        self.B = assemble_b(self.velocity, self.pressure)
        self._recon = {}
        self._loads = {}

    @cached_property
    def _reduced_template(self) -> ReducedSystem:
        full = SparseSystem(self.velocity, self.pressure, self.A, self.B, np.zeros(self.velocity.ndof), 1.0)
        return eliminate_constraints(full)

    @cached_property
    def factorization(self):
        return factorize(self._reduced_template)

    @cached_property
    def _dirichlet_coupling(self) -> np.ndarray:
        # -A_fc u_c: scaled by nu for each solve
        return self._reduced_template.F

    def recon(self, variant: str):
        if variant not in self._recon:
            self._recon[variant] = reconstruction(self.velocity, variant)
        return self._recon[variant]

    def loads(self, variant: str, qorder_rhs: int) -> tuple[np.ndarray, np.ndarray]:
        key = (variant, qorder_rhs)
        if key not in self._loads:
            R = self.recon(variant)
            self._loads[key] = (
                assemble_rhs(self.velocity, R, self.case.f_visc, qorder_rhs),
                assemble_rhs(self.velocity, R, self.case.f_pres, qorder_rhs),
            )
        return self._loads[key]

    def system(self, variant: str, nu: float, qorder_rhs: int) -> ReducedSystem:
        F_visc, F_pres = self.loads(variant, qorder_rhs)
        full = SparseSystem(self.velocity, self.pressure, self.A, self.B, nu * F_visc + F_pres, nu)
        t = self._reduced_template
        F = full.F[t.free] + nu * self._dirichlet_coupling
        return ReducedSystem(full, t.free, t.A, t.B, F, t.G)

    def run(self, variant: str, nu: float, qorder_rhs: int, qorder_err: int) -> dict:
        system = self.system(variant, nu, qorder_rhs)
        try:
            sol = solve_stokes(system, self.factorization)
        except Exception as exc:
            raise RuntimeError(f"solve failed on level n={self.n} ({variant}, nu={nu:g}): {exc}") from exc
        report = error_norms(sol, self.case, self.velocity, self.pressure, self.recon(variant), qorder_err)
        out = report.as_dict()
        out["div_residual"] = discrete_divergence_residual(sol, system)
        out["n_dofs"] = out["n_free_velocity"] + out["n_pressure"]
        return out


def _config_columns(cfg: RunConfig, variant: str, nu: float, n: int, qorder_rhs: int) -> dict:
    return {
        "case": cfg.case,
        "variant": variant,
        "nu": nu,
        "n": n,
        "jitter": cfg.jitter,
        "seed": cfg.seed,
        "qorder_a": cfg.qorder_a,
        "qorder_rhs": qorder_rhs,
        "qorder_err": cfg.qorder_err,
    }


def _gate(case: ManufacturedCase, nus) -> None:
    for nu in sorted(set(nus)):
        verify_case(case, nu)


def run_convergence(config: RunConfig) -> list[dict]:
    """One row per (level, variant, nu) with all error fields and EOC columns.

    EOCs use the nominal mesh size ``h = 1/n`` of consecutive levels; the
    first level carries NaN.
    """
    case = get_case(config.case)
    _gate(case, config.nus)
    rows: dict[tuple, dict] = {}
    for n in config.levels:
        level = LevelRun(case, n, config.jitter, config.seed, config.qorder_a)
        for variant in config.variants:
            for nu in config.nus:
                res = level.run(variant, nu, config.qorder_rhs, config.qorder_err)
                res["h"] = 1.0 / n
                rows[(variant, nu, n)] = {**_config_columns(config, variant, nu, n, config.qorder_rhs), **res}
    ordered = []
    for variant in config.variants:
        for nu in config.nus:
            series = [rows[(variant, nu, n)] for n in config.levels]
            for name in RESULT_FIELDS[:4]:
                if len(series) > 1:
                    rates = eoc([r[name] for r in series], [r["h"] for r in series])
                else:
                    rates = []
                for r, rate in zip(series, [math.nan, *rates]):
                    r[f"eoc_{name}"] = float(rate)
            ordered.extend(series)
    _maybe_write(ordered, config.out)
    return ordered


def count_dofs(n: int) -> int:
    """Free velocity dofs plus pressure dofs on the level-``n`` unit-square mesh."""
    mesh = generate_unit_square_mesh(n)
    vs, ps = build_spaces(mesh, classify(mesh))
    vs = apply_dirichlet(vs, None)
    return int(np.count_nonzero(~vs.fixed)) + ps.ndof


def level_for_dofs(target: int) -> int:
    """Generator level whose dof count (:func:`count_dofs`) is closest to ``target``."""
    best, best_gap = 1, math.inf
    n = 1
    while True:
        d = count_dofs(n)
        gap = abs(d - target)
        if gap < best_gap:
            best, best_gap = n, gap
        if d > target:
            return best
        n += 1


def _nu_rows(level: LevelRun, config: RunConfig, qorder_rhs: int) -> list[dict]:
    out = []
    for variant in config.variants:
        series = []
        for nu in config.nus:
            res = level.run(variant, nu, qorder_rhs, config.qorder_err)
            series.append({**_config_columns(config, variant, nu, level.n, qorder_rhs), **res})
        if len(series) > 1:
            for k, row in enumerate(series):
                if k == 0:
                    row["slope_err_energy"] = math.nan
                else:
                    prev = series[k - 1]
                    row["slope_err_energy"] = float(
                        eoc([prev["err_energy"], row["err_energy"]], [prev["nu"], row["nu"]])[0]
                    )
        out.extend(series)
    return out


def run_nu_sweep(config: RunConfig, dofs: int | None = None) -> list[dict]:
    """One row per (variant, nu) on a single mesh.

    The mesh is ``config.levels[0]``, or the level closest to ``dofs``
    total degrees of freedom when given. ``slope_err_energy`` is the local
    log-log slope of the energy error against ``nu`` (present only for
    more than one viscosity).
    """
    case = get_case(config.case)
    _gate(case, config.nus)
    n = level_for_dofs(dofs) if dofs is not None else config.levels[0]
    log.info("viscosity sweep on level n=%d", n)
    level = LevelRun(case, n, config.jitter, config.seed, config.qorder_a)
    rows = _nu_rows(level, config, config.qorder_rhs)
    _maybe_write(rows, config.out)
    return rows


def run_quadrature_sweep(
    config: RunConfig, qorders=(10, 20, 50), dofs: int | None = None
) -> list[dict]:
    """Viscosity sweep repeated for each load quadrature order (rows tagged by order)."""
    case = get_case(config.case)
    _gate(case, config.nus)
    n = level_for_dofs(dofs) if dofs is not None else config.levels[0]
    level = LevelRun(case, n, config.jitter, config.seed, config.qorder_a)
    rows = []
    for q in qorders:
        rows.extend(_nu_rows(level, config, q))
    _maybe_write(rows, config.out)
    return rows


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.15e" % value
    return str(value)


def format_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    header: list[str] = []
    for row in rows:
        for key in row:
            if key not in header:
                header.append(key)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(row[k]) if k in row else "" for k in header])
    return buf.getvalue()


def write_csv(rows: list[dict], path) -> None:
    Path(path).write_text(format_csv(rows), encoding="utf-8", newline="")


def _maybe_write(rows, out) -> None:
    if out:
        write_csv(rows, out)

"""Scenario construction and experiment runs for the two test problems."""
from __future__ import annotations

import dataclasses
import logging
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import coefficients as coef
from .exceptions import NitscheError
from .fem import FeSpace
from .geometry import (
    DEFAULT_DELTA,
    K0,
    Channel,
    Ellipse,
    EllipseSpec,
    Well,
    build_partition,
)
from .interface import build_interface, check_assumption_B
from .mesh import build_mesh_pair, check_assumption_A
from .nitsche import assemble_nitsche, penalty_lower_bound
from .postproc import (
    ErrorReport,
    Timer,
    h1_seminorm_error_on,
    quadrature_levels,
    reference_solve,
    write_diagnostics,
    write_results,
)
from .solver import solve_spd
from .transition import C0RingTransition, C1WellTransition
from .upscaling import tabulate_effective
from .vtk import write_vtk

log = logging.getLogger(__name__)

DESK_EPS = {1: 0.02, 2: 0.0063}
FULL_EPS = {1: 0.01, 2: 0.0063}
DEFAULT_GAMMA = {1: 50.0, 2: 20.0}


@dataclass
class ExperimentConfig:
    """One scenario (example x defect) and its list of ``(h, H)`` pairs.

    ``h`` and ``H`` are lists of equal length, or one of them has length one
    and is broadcast.  ``L`` is the well half-width or the channel width and
    is ignored for the ellipses.  ``gamma="auto"`` uses the computed bound.
    """

    example: int = 1
    defect: str = "well"
    L: float | None = None
    delta: float | None = None
    eps: float | None = None
    R1: float = 2.5
    R2: float = 1.5
    h: tuple = (2.0**-8,)
    H: tuple = (2.0**-5,)
    gamma: object = None
    r: int = 1
    tol: float = 1e-10
    max_iter: int | None = None
    ref_n: int = 1024
    output: str = "out"
    rho: str = "c0"
    cache_dir: str | None = None
    upscale_grid: int = 17
    cell_n: int = 64
    vtk: bool = False
    full_scale: bool = False
    n_segments: int = 128

    def __post_init__(self):
        self.example = int(self.example)
        if self.example not in (1, 2):
            raise ValueError("example must be 1 or 2")
        if self.defect not in ("well", "channel", "ellipse"):
            raise ValueError(f"unknown defect {self.defect!r}")
        if self.rho not in ("c0", "c1"):
            raise ValueError("rho must be c0 or c1")
        if self.rho == "c1" and self.defect != "well":
            raise ValueError("the C1 transition is only defined for the well")
        self.h = tuple(float(v) for v in np.atleast_1d(self.h))
        self.H = tuple(float(v) for v in np.atleast_1d(self.H))
        if min(self.h + self.H) <= 0:
            raise ValueError("mesh sizes must be positive")
        if self.full_scale:
            if self.eps is None:
                self.eps = FULL_EPS[self.example]
            if self.ref_n == 1024:
                self.ref_n = 3000
        if self.eps is None:
            self.eps = DESK_EPS[self.example]
        if self.delta is None:
            self.delta = DEFAULT_DELTA[self.defect]
        if self.gamma is None:
            self.gamma = DEFAULT_GAMMA[self.example]

    def pairs(self):
        h, H = self.h, self.H
        if len(h) == 1:
            h = h * len(H)
        if len(H) == 1:
            H = H * len(h)
        if len(h) != len(H):
            raise ValueError("h and H lists must have equal length or length one")
        return list(zip(h, H))

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def shape(self):
        if self.defect == "well":
            return Well((0.5, 0.5), 0.05 if self.L is None else self.L)
        if self.defect == "channel":
            return Channel(width=0.05) if self.L is None else Channel(width=self.L)
        return Ellipse(
            (EllipseSpec((0.5, 0.35), 0.25, 0.01), EllipseSpec((0.5, 0.65), 0.25, 0.01))
        )


@dataclass
class Scenario:
    """Everything that does not depend on the mesh pair."""

    config: ExperimentConfig
    partition: object
    micro: coef.MatrixField
    macro: coef.MatrixField
    micro_descriptor: dict
    macro_descriptor: dict
    notes: dict = field(default_factory=dict)


def _ex2_effective(config):
    g = np.linspace(0.0, 1.0, config.upscale_grid)
    return tabulate_effective(coef.example2_fast, g, g, n_cell=config.cell_n, name="ex2 upscaled")


def build_scenario(config: ExperimentConfig, effective=None) -> Scenario:
    partition = build_partition(config.shape(), config.delta, config.n_segments)
    geom = {"defect": config.defect, "L": config.L, "delta": config.delta}
    if config.example == 1:
        micro = coef.example1_micro(config.R1, config.R2, config.eps)
        macro = coef.example1_effective(config.R1, config.R2)
        md = {"example": 1, "problem": "micro", "eps": config.eps, "R1": config.R1, "R2": config.R2}
        Md = {"example": 1, "problem": "homogenized", "R1": config.R1, "R2": config.R2}
        return Scenario(config, partition, micro, macro, md, Md)

    def in_k0(x):
        return partition.classify(x) == K0

    table = _ex2_effective(config) if effective is None else effective
    micro = coef.example2_micro(config.eps, in_k0)
    macro = coef.example2_macro(table, in_k0)
    md = {"example": 2, "problem": "micro", "eps": config.eps, **geom}
    Md = {
        "example": 2,
        "problem": "homogenized",
        "grid": config.upscale_grid,
        "cell_n": config.cell_n,
        **geom,
    }
    return Scenario(config, partition, micro, macro, md, Md, {"effective": table})


_REFERENCES = {}


def get_reference(scenario: Scenario, which):
    """Micro (``u^eps``) or homogenized (``u_0``) reference, memoized per process."""
    cfg = scenario.config
    if which == "micro":
        field_, desc, eps = scenario.micro, scenario.micro_descriptor, cfg.eps
    else:
        field_, desc, eps = scenario.macro, scenario.macro_descriptor, None
    key = (cfg.ref_n, tuple(sorted(desc.items())))
    if key not in _REFERENCES:
        log.info("reference solve %s n=%d", which, cfg.ref_n)
        _REFERENCES[key] = reference_solve(
            field_, cfg.ref_n, eps=eps, cache_dir=cfg.cache_dir, descriptor=desc
        )
    return _REFERENCES[key]


def clear_reference_memo():
    _REFERENCES.clear()


@dataclass
class HybridSolution:
    """Solved hybrid problem for one mesh pair."""

    scenario: Scenario
    meshes: object
    spaces: tuple
    interface: object
    coefficient: object
    system: object
    u: np.ndarray
    report: object

    @property
    def fine(self):
        return self.u[: self.spaces[0].n_dofs]

    @property
    def coarse(self):
        return self.u[self.spaces[0].n_dofs :]

    @property
    def dofs(self):
        return int(len(self.system.reduced.free))


def transition_for(scenario: Scenario, meshes):
    cfg = scenario.config
    if cfg.rho == "c1":
        L = 0.05 if cfg.L is None else cfg.L
        return C1WellTransition((0.5, 0.5), L, cfg.delta)
    return C0RingTransition(scenario.partition, meshes.ring)


def solve_hybrid(scenario: Scenario, h, H, gamma=None, meshes=None) -> HybridSolution:
    """Mesh, assemble and solve the hybrid problem for one ``(h, H)`` pair."""
    cfg = scenario.config
    if meshes is None:
        meshes = build_mesh_pair(scenario.partition, h, H)
    spaces = (FeSpace(meshes.inner, cfg.r), FeSpace(meshes.outer, cfg.r))
    interface = build_interface(meshes.inner, meshes.outer, scenario.partition)
    rho = transition_for(scenario, meshes)
    b = coef.HybridCoefficient(rho, scenario.micro, scenario.macro)
    if gamma is None:
        gamma = cfg.gamma
    sigma = meshes.sigma
    if gamma == "auto":
        gamma = penalty_lower_bound(cfg.r, sigma, *b.bounds)
    levels = quadrature_levels(meshes.inner.h_max, cfg.eps)
    system = assemble_nitsche(
        b, spaces, interface, float(gamma), 1.0, refine=(levels, 0), sigma=sigma,
        quad_order=4,
    )
    red = system.reduced
    max_iter = cfg.max_iter
    if max_iter is None:
        # CG iterations grow like sqrt(cond) and cond grows linearly in gamma
        n = len(red.rhs)
        max_iter = int(max(100, 50 * np.sqrt(n)) * max(1.0, np.sqrt(float(gamma) / 100.0)))
    x, report = solve_spd(red.matrix, red.rhs, tol=cfg.tol, max_iter=max_iter)
    u = red.expand(x)
    return HybridSolution(scenario, meshes, spaces, interface, b, system, u, report)


def evaluate_errors(sol: HybridSolution):
    """``(e(u^eps), e(u_0))``: relative H1-seminorm errors on K0 and K2."""
    sc = sol.scenario
    ref_micro = get_reference(sc, "micro")
    ref_macro = get_reference(sc, "macro")
    e_ueps = h1_seminorm_error_on("K0", sc.partition, (sol.spaces[0], sol.fine), ref_micro)
    e_u0 = h1_seminorm_error_on("K2", sc.partition, (sol.spaces[1], sol.coarse), ref_macro)
    return e_ueps, e_u0


def count_dofs(spaces):
    """Free dofs of ``X_h + X_H`` after removing the Dirichlet dofs on the outer boundary."""
    return int(sum(s.n_dofs - len(s.dirichlet_dofs) for s in spaces))


def export_vtk(path, sol: HybridSolution):
    """``v_h``, ``rho`` and the trace of ``b`` at the vertices of both meshes."""
    parts_v, parts_t, vals = [], [], []
    off = 0
    for space, u in ((sol.spaces[0], sol.fine), (sol.spaces[1], sol.coarse)):
        m = space.mesh
        parts_v.append(m.vertices)
        parts_t.append(m.triangles + off)
        vals.append(u[: m.n_vertices])
        off += m.n_vertices
    v = np.vstack(parts_v)
    rho = sol.coefficient.rho.evaluate(v)
    b = sol.coefficient.evaluate(v)
    write_vtk(
        path,
        v,
        np.vstack(parts_t),
        {"v_h": np.concatenate(vals), "rho": rho, "b_trace": b[:, 0, 0] + b[:, 1, 1]},
    )


def run_pair(scenario: Scenario, h, H, gamma=None, meshes=None) -> tuple[ErrorReport, HybridSolution]:
    cfg = scenario.config
    with Timer() as t, warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sol = solve_hybrid(scenario, h, H, gamma, meshes)
        e_ueps, e_u0 = evaluate_errors(sol)
    for w in caught:
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    flag_a, nu, _ = check_assumption_A(sol.meshes.inner)
    extra = {
        "gamma0": sol.system.gamma0,
        "sigma": sol.system.sigma,
        "assumption_A": flag_a,
        "nu": nu,
        "assumption_B": check_assumption_B(sol.interface),
        "interface_pieces": len(sol.interface),
        "cg_iterations": sol.report.iterations,
        "residual": sol.report.residual,
        "rho": cfg.rho,
        "eps": cfg.eps,
    }
    rep = ErrorReport(
        example=cfg.example,
        defect=cfg.defect,
        h=float(h),
        H=float(H),
        gamma=float(sol.system.gamma),
        e_ueps=float(e_ueps),
        e_u0=float(e_u0),
        dofs=sol.dofs,
        seconds=float(t.seconds),
        extra=extra,
    )
    log.info("h=%g H=%g gamma=%g e_ueps=%.4e e_u0=%.4e", h, H, rep.gamma, e_ueps, e_u0)
    return rep, sol


def run_experiment(config: ExperimentConfig, write=True, scenario=None):
    """Run every ``(h, H)`` pair; write results.csv, diagnostics.csv and VTK files."""
    sc = build_scenario(config) if scenario is None else scenario
    reports = []
    for h, H in config.pairs():
        try:
            rep, sol = run_pair(sc, h, H)
        except NitscheError as exc:
            raise type(exc)(f"[example {config.example}, {config.defect}, h={h}, H={H}] {exc}") from exc
        reports.append(rep)
        if write and config.vtk:
            os.makedirs(config.output, exist_ok=True)
            export_vtk(Path(config.output) / f"solution_h{h:g}_H{H:g}.vtk", sol)
    if write:
        save_reports(config.output, reports)
    return reports


def save_reports(output, reports, name="results.csv"):
    os.makedirs(output, exist_ok=True)
    write_results(Path(output) / name, reports)
    write_diagnostics(Path(output) / name.replace("results", "diagnostics"), reports)


def gamma_threshold(gammas, errors, rel_tol=0.05):
    """Smallest ``gamma`` from which on every error stays within ``rel_tol`` of the last one."""
    g = np.asarray(gammas, dtype=float)
    e = np.asarray(errors, dtype=float)
    order = np.argsort(g)
    g, e = g[order], e[order]
    ok = np.abs(e - e[-1]) <= rel_tol * e[-1]
    k = len(g) - 1
    while k > 0 and ok[k - 1]:
        k -= 1
    return float(g[k])


def sweep_gamma(config: ExperimentConfig, gammas, write=True):
    """Fixed mesh pair (the first one in ``config``), varying penalty."""
    sc = build_scenario(config)
    h, H = config.pairs()[0]
    meshes = build_mesh_pair(sc.partition, h, H)
    reports = [run_pair(sc, h, H, g, meshes)[0] for g in gammas]
    if write:
        save_reports(config.output, reports, "results_gamma.csv")
    return reports


def compare_rho(config: ExperimentConfig, write=True):
    """Run every pair with the C0 ring transition and the C1 cosine transition."""
    if config.defect != "well":
        raise ValueError("rho comparison needs the well defect")
    out = {}
    for kind in ("c0", "c1"):
        cfg = config.replace(rho=kind)
        out[kind] = run_experiment(cfg, write=False)
    if write:
        reps = out["c0"] + out["c1"]
        save_reports(config.output, reps, "results_rho.csv")
    return out

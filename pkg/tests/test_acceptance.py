"""Acceptance checks, one test per criterion.

Each test prints a ``criterion k: PASS/FAIL`` line; the lines are repeated
in the pytest terminal summary.  The desk-scale runs share reference
solutions through ``NITSCHE_CACHE_DIR`` (default ``.cache``).  Setting
``NITSCHE_FULL_SCALE=1`` adds the eps = 0.01, 3000 x 3000 reference check
of criterion 5 (hours of CPU time).  ``NITSCHE_REGEN_GOLDEN=1`` rewrites the
golden files of criterion 10 instead of comparing against them.
"""
import functools
import os
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from nitsche_hybrid.coefficients import example1_effective, example1_fast, example2_fast, hybridize
from nitsche_hybrid.exceptions import NitscheError
from nitsche_hybrid.experiments import (
    ExperimentConfig,
    build_scenario,
    gamma_threshold,
    get_reference,
    run_pair,
    transition_for,
)
from nitsche_hybrid.fem import FeSpace
from nitsche_hybrid.geometry import DEFAULT_DELTA, build_partition, default_shape
from nitsche_hybrid.interface import build_interface, weighted_average_and_jump
from nitsche_hybrid.mesh import build_mesh_pair
from nitsche_hybrid.nitsche import (
    assemble_nitsche,
    broken_energy_norm,
    energy_matrix,
    nitsche_matrix,
)
from nitsche_hybrid.postproc import convergence_rates, read_results, write_results
from nitsche_hybrid.solver import solve_spd
from nitsche_hybrid.upscaling import effective_matrix_at, solve_cell_problem, voigt_reuss_ok

from conftest import CACHE_DIR, record_acceptance
from oracles import dense_oracle, two_element_setup

GOLDEN = Path(__file__).parent / "golden"
FULL_SCALE = os.environ.get("NITSCHE_FULL_SCALE", "") not in ("", "0")
REGEN = os.environ.get("NITSCHE_REGEN_GOLDEN", "") not in ("", "0")


@functools.lru_cache(maxsize=None)
def _scenario(example=1, defect="well", rho="c0"):
    return build_scenario(ExperimentConfig(example=example, defect=defect, rho=rho, cache_dir=CACHE_DIR))


@functools.lru_cache(maxsize=None)
def _run(h, H, example=1, defect="well", rho="c0", gamma=None):
    """Desk-scale run of one pair; solver failures come back as ``None``."""
    sc = _scenario(example, defect, rho)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            return run_pair(sc, h, H, gamma)[0]
        except NitscheError:
            return None


def _references(example=1, defect="well"):
    sc = _scenario(example, defect)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        get_reference(sc, "micro")
        get_reference(sc, "macro")


def _fmt(values):
    return "(" + ", ".join(f"{v:.3g}" for v in values) + ")"


def test_criterion_01_patch_test():
    part = build_partition(default_shape("well"), DEFAULT_DELTA["well"])
    pair = build_mesh_pair(part, 2.0**-6, 2.0**-4)

    def exact(p):
        return 0.25 + p[:, 0] - 0.5 * p[:, 1]

    t0 = time.perf_counter()
    spaces = (FeSpace(pair.inner), FeSpace(pair.outer))
    itf = build_interface(pair.inner, pair.outer, part)
    gamma = 50.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        system = assemble_nitsche(None, spaces, itf, gamma, f=0.0, dirichlet=exact)
    x, _ = solve_spd(system.reduced.matrix, system.reduced.rhs, tol=1e-14)
    u = system.reduced.expand(x)
    ex = np.concatenate([s.interpolate(exact) for s in spaces])
    rel = broken_energy_norm(spaces, itf, gamma, u - ex) / broken_energy_norm(spaces, itf, gamma, ex)
    seconds = time.perf_counter() - t0
    ok = rel < 1e-10 and seconds < 1.0
    line = record_acceptance(1, ok, f"relative broken-norm error {rel:.2e} (< 1e-10), {seconds:.2f} s (< 1 s)")
    assert ok, line


def test_criterion_02_assembly_oracle():
    worst = 0.0
    for fine_split in (False, True):
        fine, coarse, itf = two_element_setup(fine_split)
        got = nitsche_matrix(None, (FeSpace(fine), FeSpace(coarse)), itf, 7.5).toarray()
        want = dense_oracle(fine, coarse, lambda x: np.eye(2), 7.5)
        worst = max(worst, float(np.max(np.abs(got - want))))
    ok = worst < 1e-12
    line = record_acceptance(2, ok, f"max entry difference to dense oracle {worst:.2e} (< 1e-12)")
    assert ok, line


def test_criterion_03_magic_formula_and_weights():
    rng = np.random.default_rng(2024)
    v1, v2, w1, w2 = rng.uniform(-10, 10, size=(4, 10_000))
    om = rng.uniform(0, 1, 10_000)
    v_low, _, v_jump = weighted_average_and_jump(v1, v2, om, 1 - om)
    _, w_up, w_jump = weighted_average_and_jump(w1, w2, om, 1 - om)
    scale = 1 + np.abs(v1 * w1) + np.abs(v2 * w2)
    magic = float(np.max(np.abs(v_low * w_jump + v_jump * w_up - (v1 * w1 - v2 * w2)) / scale))
    weight_err, cover_err = 0.0, 0.0
    for defect in ("well", "channel", "ellipse"):
        part = build_partition(default_shape(defect), DEFAULT_DELTA[defect])
        pair = build_mesh_pair(part, 2.0**-6 * 0.93, 2.0**-4 * 1.17)
        itf = build_interface(pair.inner, pair.outer, part)
        weight_err = max(weight_err, float(np.max(np.abs(itf.omega1 + itf.omega2 - 1))))
        cover_err = max(cover_err, abs(itf.lengths.sum() - part.gamma_length))
    ok = magic < 1e-13 and weight_err < 4e-16 and cover_err < 1e-10
    line = record_acceptance(
        3, ok,
        f"magic formula {magic:.1e} (< 1e-13), |w1+w2-1| {weight_err:.1e}, "
        f"sum |e| - |Gamma| {cover_err:.1e} (< 1e-10)",
    )
    assert ok, line


def test_criterion_04_coercivity_continuity():
    sc = _scenario()
    pair = build_mesh_pair(sc.partition, 2.0**-6, 2.0**-4)
    b = hybridize(transition_for(sc, pair), sc.micro, sc.macro)
    spaces = (FeSpace(pair.inner), FeSpace(pair.outer))
    itf = build_interface(pair.inner, pair.outer, sc.partition)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        system = assemble_nitsche(b, spaces, itf, 1.0, sigma=pair.sigma)
    gamma = system.gamma0
    B = nitsche_matrix(b, spaces, itf, gamma)
    S = energy_matrix(spaces, itf, gamma)
    lam, Lam = b.bounds
    c_low = min(0.5, lam / 2)
    c_up = 2 * max(1.0, Lam)
    n = B.shape[0]
    free = np.setdiff1d(np.arange(n), np.concatenate(
        [spaces[0].dirichlet_dofs, spaces[1].dirichlet_dofs + spaces[0].n_dofs]))
    coords = np.vstack([spaces[0].dof_coords, spaces[1].dof_coords])
    rng = np.random.default_rng(11)

    def draw(k):
        v = np.zeros(n)
        if k % 3 == 0:
            v[free] = rng.standard_normal(len(free))
        else:
            # smooth on each side; k % 3 == 2 gives a function continuous across the interface
            a = rng.standard_normal((2, 3))
            if k % 3 == 2:
                a[1] = a[0]
            for side, (lo, hi) in enumerate(((0, spaces[0].n_dofs), (spaces[0].n_dofs, n))):
                p = coords[lo:hi]
                v[lo:hi] = a[side, 0] + a[side, 1] * np.sin(np.pi * p[:, 0] * (1 + k % 5)) * np.sin(
                    np.pi * p[:, 1] * (1 + a[side, 2] ** 2))
            mask = np.zeros(n, dtype=bool)
            mask[free] = True
            v[~mask] = 0.0
        return v

    worst_c, worst_b, failures = np.inf, 0.0, 0
    for k in range(100):
        v, w = draw(k), draw(k + 1)
        nv, nw = np.sqrt(v @ (S @ v)), np.sqrt(w @ (S @ w))
        coer = (v @ (B @ v)) / nv**2
        cont = abs(w @ (B @ v)) / (nv * nw)
        worst_c = min(worst_c, coer)
        worst_b = max(worst_b, cont)
        failures += int(coer < c_low) + int(cont > c_up)
    ok = failures == 0
    line = record_acceptance(
        4, ok,
        f"gamma0={gamma:.3g}: min B(v,v)/|||v|||^2 = {worst_c:.3g} (>= {c_low:.3g}), "
        f"max |B(v,w)|/(|||v||| |||w|||) = {worst_b:.3g} (<= {c_up:.3g}), {failures} failures",
    )
    assert ok, line


def test_criterion_05_microscopic_convergence():
    t0 = time.perf_counter()
    _references()
    hs = (2.0**-7, 2.0**-8, 2.0**-9)
    reps = [_run(h, 2.0**-5) for h in hs]
    seconds = time.perf_counter() - t0
    e = [r.e_ueps for r in reps]
    e0 = [r.e_u0 for r in reps]
    rates = convergence_rates(e)
    spread = (max(e0) - min(e0)) / min(e0)
    ok = bool(np.all(np.diff(e) < 0) and np.all(rates >= 0.8) and spread < 0.10 and seconds <= 900)
    detail = (
        f"desk e(u_eps) {_fmt(e)} rates {_fmt(rates)} (>= 0.8), e(u_0) spread {spread:.1%} (< 10%), "
        f"{seconds:.0f} s (<= 900 s)"
    )
    if FULL_SCALE:
        cfg = ExperimentConfig(full_scale=True, cache_dir=CACHE_DIR)
        sc = build_scenario(cfg)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            full = [run_pair(sc, h, 2.0**-5)[0] for h in hs]
        pe = [r.e_ueps for r in full]
        pr = convergence_rates(pe)
        within = 4.60e-2 / 2 <= pe[-1] <= 4.60e-2 * 2
        ok = ok and bool(np.all(pr >= 0.8)) and within
        detail += f"; full scale e(u_eps) {_fmt(pe)} rates {_fmt(pr)}, finest vs 4.60e-2 within x2: {within}"
    else:
        detail += "; full-scale value check not requested (NITSCHE_FULL_SCALE)"
    line = record_acceptance(5, ok, detail)
    assert ok, line


def test_criterion_06_macroscopic_convergence():
    _references()
    Hs = (2.0**-4, 2.0**-5, 2.0**-6)
    reps = [_run(2.0**-9, H) for H in Hs]
    e0 = [r.e_u0 for r in reps]
    e = [r.e_ueps for r in reps]
    rates = convergence_rates(e0)
    spread = (max(e) - min(e)) / min(e)
    ok = bool(np.all(rates >= 1.0) and spread < 0.20)
    line = record_acceptance(
        6, ok,
        f"h=2^-9: e(u_0) {_fmt(e0)} rates {_fmt(rates)} (>= 1.0), e(u_eps) spread {spread:.1%} (< 20%)",
    )
    assert ok, line


def test_criterion_07_gamma_robustness():
    _references()
    h, H = 2.0**-7, 2.0**-5
    sweep = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0]
    errs = [(_run(h, H, gamma=g) or None) for g in sweep]
    e = [r.e_ueps if r is not None else np.inf for r in errs]
    g_star = gamma_threshold(sweep, e)
    above = [_run(h, H, gamma=k * g_star) for k in (2, 10, 100)]
    ea = [r.e_ueps if r is not None else np.inf for r in above]
    var = (max(ea) - min(ea)) / min(ea)
    ok = bool(np.all(np.isfinite(ea)) and var < 0.05)
    line = record_acceptance(
        7, ok,
        f"gamma* = {g_star:g}; e(u_eps) at (2, 10, 100) gamma* = {_fmt(ea)}, variation {var:.2%} (< 5%)",
    )
    assert ok, line


def test_criterion_08_rho_smoothness():
    _references()
    diffs = []
    parts = []
    for H, h in ((2.0**-5, 2.0**-8), (2.0**-6, 2.0**-9)):
        c0 = _run(h, H, rho="c0").e_ueps
        c1 = _run(h, H, rho="c1").e_ueps
        d = abs(c0 - c1) / max(c0, c1)
        diffs.append(d)
        parts.append(f"(H,h)=(2^{np.log2(H):.0f},2^{np.log2(h):.0f}): C0 {c0:.3e} C1 {c1:.3e} diff {d:.2%}")
    ok = max(diffs) < 0.05
    line = record_acceptance(8, ok, "; ".join(parts) + " (< 5%)")
    assert ok, line


def test_criterion_09_upscaling():
    A = effective_matrix_at([0.5, 0.5], lambda x, y: 2.0 + np.sin(2 * np.pi * y[:, 0]), n_cell=128)
    layered = float(np.max(np.abs(A - np.diag([np.sqrt(3.0), 2.0]))))
    g = np.linspace(0.0, 1.0, 17)
    ref = example1_effective()
    worst_rel, vr_fail = 0.0, 0
    for fast, check in ((example1_fast(), True), (example2_fast, False)):
        for x in g:
            for y in g:
                cp = solve_cell_problem([x, y], fast, n_cell=64)
                vr_fail += int(not voigt_reuss_ok(cp, tol=1e-10))
                if check:
                    want = ref.evaluate(np.array([[x, y]]))[0]
                    worst_rel = max(worst_rel, float(np.max(np.abs(cp.effective - want)) / np.max(np.abs(want))))
    ok = layered < 1e-3 and worst_rel < 0.01 and vr_fail == 0
    line = record_acceptance(
        9, ok,
        f"layered |A_h - diag(sqrt3, 2)| = {layered:.1e} (< 1e-3), example 1 worst relative "
        f"deviation {worst_rel:.2%} over 17x17 samples (< 1%), Voigt-Reuss violations {vr_fail} of 578",
    )
    assert ok, line


def _golden(name, reports):
    path = GOLDEN / f"{name}.csv"
    if REGEN or not path.exists():
        GOLDEN.mkdir(exist_ok=True)
        write_results(path, reports, include_seconds=False)
        return True, "written"
    want = read_results(path)
    same = len(want) == len(reports) and all(
        (a.h, a.H, a.dofs) == (b.h, b.H, b.dofs)
        and np.isclose(a.e_ueps, b.e_ueps, rtol=1e-6, atol=0)
        and np.isclose(a.e_u0, b.e_u0, rtol=1e-6, atol=0)
        for a, b in zip(want, reports)
    )
    return same, "matches" if same else "differs"


def test_criterion_10_channel_and_ellipse():
    _references(1, "channel")
    ch = [_run(2.0**-9, H, defect="channel") for H in (2.0**-4, 2.0**-5, 2.0**-6)]
    ch_rates = convergence_rates([r.e_u0 for r in ch])
    el = [_run(h, H, defect="ellipse") for H, h in ((2.0**-4, 2.0**-6), (2.0**-5, 2.0**-7), (2.0**-6, 2.0**-8))]
    el_e = [r.e_ueps for r in el]
    el_e0 = [r.e_u0 for r in el]
    monotone = bool(np.all(np.diff(el_e) < 0) and np.all(np.diff(el_e0) < 0))
    g_ch, s_ch = _golden("channel", ch)
    g_el, s_el = _golden("ellipse", el)
    ok = bool(np.all(ch_rates >= 0.9)) and monotone and g_ch and g_el
    line = record_acceptance(
        10, ok,
        f"channel e(u_0) {_fmt([r.e_u0 for r in ch])} rates {_fmt(ch_rates)} (>= 0.9); ellipse H/h=4 "
        f"e(u_eps) {_fmt(el_e)} e(u_0) {_fmt(el_e0)} monotone {monotone}; golden files {s_ch}/{s_el}",
    )
    assert ok, line


@pytest.mark.skipif(not FULL_SCALE, reason="full-scale DOF comparison only with NITSCHE_FULL_SCALE")
def test_dof_count_order_of_magnitude():
    rep = _run(2.0**-9, 2.0**-5)
    assert 28585 / 10 < rep.dofs < 28585 * 10

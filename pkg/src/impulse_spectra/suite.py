"""Invariant checks run by the ``verify`` subcommand.

Every check appends one :class:`~impulse_spectra.report.Check` to the report;
randomized checks draw from a generator seeded by the config.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .config import RunConfig
from .lattice import ComplexSeq, LatticeWindow, norm
from .operators import (
    GreenOperator,
    apply_A,
    apply_L,
    apply_L_inverse,
    bound_ratio,
    defect_scale,
    energy_identity_residual,
    energy_scale,
    hermiticity_defect_A,
    hermiticity_defect_L,
)
from .recurrence import IvpSpec, random_system, solve_ivp, wronskian, wronskian_profile, wronskian_terms_scale
from .report import Report
from .spectrum import assemble, charpoly_roots, eigenvalues, multiset_distance
from .weyl import base_solutions, energy_inequality, exact_base_wronskian, limit_points, wronskian_mismatch


def random_sites(rng: np.random.Generator, window: LatticeWindow, pad: int = 1) -> ComplexSeq:
    """Random values on the z0 sites, zero on the outer ``pad`` sites of each side."""
    v = rng.normal(size=window.n_sites) + 1j * rng.normal(size=window.n_sites)
    v[:pad] = 0.0
    v[len(v) - pad :] = 0.0
    return ComplexSeq.from_sites(window, v)


def check_wronskian_random(rep: Report, rng: np.random.Generator, trials: int, half_width: int = 50) -> None:
    worst_dev = worst_jump = worst_w0 = 0.0
    for _ in range(trials):
        window, coeff, imp = random_system(rng, half_width)
        seeds = rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))
        n0 = [int(rng.integers(window.lo, window.hi)) for _ in range(2)]
        y = solve_ivp(IvpSpec(n0[0], seeds[0, 0], seeds[0, 1]), coeff, imp, window)
        z = solve_ivp(IvpSpec(n0[1], seeds[1, 0], seeds[1, 1]), coeff, imp, window)
        prof = wronskian_profile(y, z, imp)
        # rounding during propagation moves W by about eps * max_k |y_k z_k|, so
        # the deviation is judged against the largest term anywhere on the window
        worst_dev = max(worst_dev, prof.max_deviation / prof.scale)
        worst_jump = max(worst_jump, prof.jump_error())
        worst_w0 = max(worst_w0, prof.w0_error())
    rep.check("wronskian.piecewise_constant", worst_dev <= 1e-9, worst_dev, 1e-9)
    rep.check("wronskian.junction_jump", worst_jump <= 1e-9, worst_jump, 1e-9)
    rep.check("wronskian.w0", worst_w0 <= 1e-9, worst_w0, 1e-9)


def check_base_wronskian(rep: Report, cfg: RunConfig) -> None:
    phi, theta = base_solutions(cfg.potential, cfg.delta, cfg.window)
    worst = 0.0
    for n in range(phi.start, phi.stop):
        s = max(1.0, wronskian_terms_scale(phi, theta, n))
        worst = max(worst, abs(wronskian(phi, theta, n) - exact_base_wronskian(n, cfg.delta)) / s)
    tol = cfg.tolerances.identity_tol
    rep.check("weyl.base_wronskian_exact", worst <= tol, worst, tol)
    rep.check("weyl.base_seed_values", abs(phi[2]) == 0 and theta[2] == 1, abs(phi[2]))


def check_defects(rep: Report, cfg: RunConfig, rng: np.random.Generator, trials: int) -> None:
    q, imp, win = cfg.potential, cfg.impulse, cfg.window
    worst_l = worst_a = worst_herm = 0.0
    for _ in range(trials):
        y, z = random_sites(rng, win), random_sites(rng, win)
        s = defect_scale(y, z, q, imp)
        dl = hermiticity_defect_L(y, z, q, imp)
        da = hermiticity_defect_A(y, z, q, imp)
        worst_l = max(worst_l, abs(dl.lhs - dl.rhs) / s)
        worst_a = max(worst_a, abs(da.lhs - da.rhs) / s)
        worst_herm = max(worst_herm, abs(dl.lhs) / s, abs(da.lhs) / s)
    rep.check("operators.defect_L", worst_l <= 1e-9, worst_l, 1e-9)
    rep.check("operators.defect_A", worst_a <= 1e-9, worst_a, 1e-9)
    if cfg.delta == 0:
        rep.check("operators.hermitian_at_zero_delta", worst_herm <= 1e-12, worst_herm, 1e-12)


def check_weyl(rep: Report, cfg: RunConfig):
    q = cfg.potential
    pair = limit_points(q, cfg.delta, cfg.window, cfg.tolerances.disk_tol)
    nest = 0.0
    for disks in (pair.forward_disks, pair.backward_disks):
        for d0, d1 in zip(disks, disks[1:]):
            nest = max(nest, abs(d1.center - d0.center) + d1.radius - d0.radius)
    rep.check("weyl.disk_nesting", nest <= 1e-10, nest, 1e-10)
    rad = 0.0
    cd = math.cos(cfg.delta)
    for d in pair.forward_disks + pair.backward_disks:
        if math.isfinite(d.energy):
            rad = max(rad, abs(d.radius * 2 * cd * d.energy - 1.0))
    rep.check("weyl.radius_formula", rad <= 1e-10, rad, 1e-10)
    gap_v = abs(pair.v_hat - pair.v_hat_alt) - pair.v_enclosure
    gap_u = abs(pair.u_hat - pair.u_hat_alt) - pair.u_enclosure
    rep.check("weyl.oracle_agreement_v", gap_v <= 1e-9, gap_v, 1e-9)
    rep.check("weyl.oracle_agreement_u", gap_u <= 1e-9, gap_u, 1e-9)
    em = cmath.exp(-1j * cfg.delta)
    rep.check("weyl.sign_v", (pair.v_hat * em).real > 0, (pair.v_hat * em).real)
    rep.check("weyl.sign_u", (pair.u_hat * em).real < 0, (pair.u_hat * em).real)
    for side in ("forward", "backward"):
        e = energy_inequality(pair, q, side)
        rep.check(f"weyl.energy_inequality_{side}", e.holds, e.lhs - e.rhs, e.slack)
    mism = wronskian_mismatch(pair) / abs(pair.u_hat - pair.v_hat)
    rep.check("weyl.solution_wronskian", mism <= 1e-8, mism, 1e-8)
    return pair


def dense_matrix(cfg: RunConfig, which: str = "L") -> np.ndarray:
    """Matrix of the truncated operator built column by column from apply_L."""
    win, q, imp = cfg.window, cfg.potential, cfg.impulse
    op = apply_L if which == "L" else apply_A
    return np.column_stack([op(ComplexSeq.indicator(win, n), q, imp).site_values() for n in win.z0_sites])


def check_green(rep: Report, cfg: RunConfig, pair, rng: np.random.Generator, trials: int) -> None:
    q, imp, win = cfg.potential, cfg.impulse, cfg.window
    g = GreenOperator.from_weyl(pair, q)
    lmat = dense_matrix(cfg)
    cut = win.n_sites // 10
    worst_res = worst_dense = worst_ratio = worst_energy = 0.0
    for _ in range(trials):
        f = random_sites(rng, win, pad=0)
        x = apply_L_inverse(g, f, verify=False)
        fn = norm(f)
        lx = apply_L(x, q, imp)
        worst_res = max(worst_res, float(np.max(np.abs(lx.site_values() - f.site_values()))) / fn)
        xd = np.linalg.solve(lmat, f.site_values())
        diff = np.abs(xd - x.site_values())
        inner = diff[cut : len(diff) - cut] if cut else diff
        worst_dense = max(worst_dense, float(np.max(inner)) / fn)
        worst_ratio = max(worst_ratio, bound_ratio(g, f, x))
        er = energy_identity_residual(x, f, q, imp, win.a, win.b)
        worst_energy = max(worst_energy, max(abs(t) for t in er) / energy_scale(x, f, q, win.a, win.b))
    rep.check("green.inverse_residual", worst_res <= 1e-8, worst_res, 1e-8)
    rep.check("green.dense_solve", worst_dense <= 1e-7, worst_dense, 1e-7)
    rep.check("green.norm_bound", worst_ratio <= 1 + 1e-9, worst_ratio, 1 + 1e-9)
    rep.check("operators.energy_identities", worst_energy <= 1e-8, worst_energy, 1e-8)
    smin = float(np.linalg.svd(lmat, compute_uv=False).min())
    floor = q.c * math.cos(cfg.delta) - 1e-9
    rep.check("operators.smallest_singular_value", smin >= floor, smin, floor)


def check_spectrum(rep: Report, cfg: RunConfig, rng: np.random.Generator) -> None:
    q, imp, win = cfg.potential, cfg.impulse, cfg.window
    mat = assemble("A", q, imp, win)
    agree = float(np.max(np.abs(mat.entries - dense_matrix(cfg, "A"))))
    rep.check("spectrum.matrix_matches_operator", agree <= 1e-14, agree, 1e-14)
    off = mat.off_tridiagonal()
    rep.check("spectrum.junction_structure", sorted(off) == [(-1, 2), (2, -1)], len(off), 2)
    res = eigenvalues(mat, cfg.tolerances.eigen_tol)
    rep.check("spectrum.residuals", max(res.residuals) <= cfg.tolerances.eigen_tol, max(res.residuals), cfg.tolerances.eigen_tol)
    if cfg.delta == 0:
        im = max(abs(lam.imag) for lam in res.eigenvalues)
        rep.check("spectrum.real_at_zero_delta", im <= 1e-10, im, 1e-10)
    small = LatticeWindow.symmetric(min(12, win.n_sites))
    sm = assemble("A", q, imp, small)
    dist = multiset_distance(eigenvalues(sm).eigenvalues, charpoly_roots(sm.entries))
    rep.check("spectrum.charpoly_oracle", dist <= 1e-6, dist, 1e-6)
    phases = np.exp(2j * np.pi * rng.uniform(size=mat.size))
    conj = (phases[:, None] * mat.entries) * np.conj(phases)[None, :]
    vals = np.linalg.eigvals(conj)
    sim = multiset_distance(res.eigenvalues, vals)
    rep.check("spectrum.similarity_invariance", sim <= 1e-9, sim, 1e-9)


def run_verify(cfg: RunConfig) -> Report:
    rep = Report("verify")
    rng = np.random.default_rng(cfg.verify.seed)
    trials = cfg.verify.trials
    check_wronskian_random(rep, rng, trials)
    check_base_wronskian(rep, cfg)
    check_defects(rep, cfg, rng, trials)
    pair = check_weyl(rep, cfg)
    check_green(rep, cfg, pair, rng, trials)
    check_spectrum(rep, cfg, rng)
    rep.summary["n_checks"] = len(rep.checks)
    rep.summary["n_failed"] = sum(not c.passed for c in rep.checks)
    return rep


__all__ = ["run_verify", "random_sites", "dense_matrix"]

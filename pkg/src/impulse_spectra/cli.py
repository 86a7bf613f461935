"""Command-line front end.

    impulse-spectra <ivp|weyl|green|spectrum|verify> --config CFG --out DIR [--format csv|json|both]

Exit codes: 0 all checks passed, 1 configuration error, 2 numerical failure
(a check failed or a computation could not be carried out), 3 internal
invariant breach.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .errors import ConfigError, ImpulseSpectraError, InvariantBreach
from .lattice import ComplexSeq, LatticeWindow, norm
from .operators import GreenOperator, apply_L_inverse, bound_ratio, green_kernel, verify_inverse
from .recurrence import CoefficientSeq, IvpSpec, equation_residuals, solve_ivp, wronskian, wronskian_profile
from .report import Report, write_manifest, write_report
from .spectrum import assemble, convergence_study, eigenvalues, tail_check
from .suite import random_sites, run_verify
from .weyl import limit_points, wronskian_mismatch

SUBCOMMANDS = ("ivp", "weyl", "green", "spectrum", "verify")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INVARIANT = 0, 1, 2, 3


def _role(window: LatticeWindow, n: int) -> str:
    if n in (0, 1):
        return "ghost"
    if n in (window.lo, window.hi):
        return "boundary"
    return "site"


def run_ivp(cfg: RunConfig) -> Report:
    rep = Report("ivp")
    win, imp, blk = cfg.window, cfg.impulse, cfg.ivp
    coeff = CoefficientSeq.spectral(cfg.potential, win, blk.lam, cfg.delta)
    y = solve_ivp(IvpSpec(blk.n0, blk.c0, blk.c1), coeff, imp, win)
    # companion seed (-conj c1, conj c0) is independent of (c0, c1)
    z = solve_ivp(IvpSpec(blk.n0, -blk.c1.conjugate(), blk.c0.conjugate()), coeff, imp, win)
    sol = rep.table("solution", "n", "role", "y", "mantissa", "exponent2")
    for n in y.indices:
        m, e = y.scaled(n)
        sol.add(n, _role(win, n), y[n], m, e)
    prof = wronskian_profile(y, z, imp)
    wt = rep.table("wronskian", "n", "W")
    for n in range(y.start, y.stop):
        wt.add(n, wronskian(y, z, n))
    rep.summary.update(
        omega_minus=prof.omega_minus,
        omega_plus=prof.omega_plus,
        w0=prof.w0,
        max_deviation=prof.max_deviation,
        term_scale=prof.scale,
    )
    tol = cfg.tolerances.identity_tol
    res = max(equation_residuals(y, coeff).values(), default=0.0)
    rep.check("ivp.equation_residual", res <= tol, res, tol)
    rep.check("ivp.junction_jump", prof.jump_error() <= tol, prof.jump_error(), tol)
    rep.check("ivp.w0", prof.w0_error() <= tol, prof.w0_error(), tol)
    return rep


def run_weyl(cfg: RunConfig) -> Report:
    rep = Report("weyl")
    q = cfg.potential
    pair = limit_points(q, cfg.delta, cfg.window, cfg.tolerances.disk_tol)
    for name, disks in (("forward_disks", pair.forward_disks), ("backward_disks", pair.backward_disks)):
        t = rep.table(name, "index", "center", "radius")
        for d in disks:
            t.add(d.index, d.center, d.radius)
    samples = cfg.weyl.samples or tuple(pair.psi.indices)
    st = rep.table("samples", "n", "psi", "chi")
    for n in samples:
        st.add(n, pair.psi[n], pair.chi[n])
    rep.summary.update(
        v_hat=pair.v_hat,
        u_hat=pair.u_hat,
        v_enclosure=pair.v_enclosure,
        u_enclosure=pair.u_enclosure,
        v_hat_alt=pair.v_hat_alt,
        u_hat_alt=pair.u_hat_alt,
        n_cancel_right=pair.n_cancel_right,
        n_cancel_left=pair.n_cancel_left,
        limit_circle_suspected=pair.limit_circle_suspected,
        skipped=list(pair.skipped),
    )
    for name, disks in (("forward", pair.forward_disks), ("backward", pair.backward_disks)):
        mono = all(d1.radius < d0.radius for d0, d1 in zip(disks, disks[1:]))
        rep.check(f"weyl.{name}_radius_decreasing", mono)
    for side, hat, alt, enc in (("v", pair.v_hat, pair.v_hat_alt, pair.v_enclosure), ("u", pair.u_hat, pair.u_hat_alt, pair.u_enclosure)):
        gap = abs(hat - alt) - enc
        rep.check(f"weyl.oracle_agreement_{side}", gap <= 1e-9, gap, 1e-9)
    mism = wronskian_mismatch(pair) / abs(pair.u_hat - pair.v_hat)
    rep.check("weyl.solution_wronskian", mism <= 1e-8, mism, 1e-8)
    return rep


def run_green(cfg: RunConfig) -> Report:
    rep = Report("green")
    q, win = cfg.potential, cfg.window
    pair = limit_points(q, cfg.delta, win, cfg.tolerances.disk_tol)
    g = GreenOperator.from_weyl(pair, q)
    ks = rep.table("kernel", "k", "n", "G")
    for k in cfg.green.slices:
        for n in win.z0_sites:
            ks.add(k, n, green_kernel(g, n, k))
    rng = np.random.default_rng(cfg.green.seed)
    rt = rep.table("random_f", "trial", "norm_f", "residual", "bound_ratio")
    worst_res, worst_ratio = 0.0, 0.0
    for i in range(cfg.green.random_f):
        f = random_sites(rng, win, pad=0)
        x = apply_L_inverse(g, f, verify=False)
        diag = verify_inverse(g, f, x, tol=math.inf)
        ratio = bound_ratio(g, f, x)
        rt.add(i, norm(f), diag["residual"], ratio)
        worst_res, worst_ratio = max(worst_res, diag["residual"]), max(worst_ratio, ratio)
    rep.summary.update(
        w_left=g.w_left,
        w_right=g.w_right,
        c_bound=g.c_bound,
        max_residual=worst_res,
        max_bound_ratio=worst_ratio,
    )
    rep.check("green.inverse_residual", worst_res <= 1e-8, worst_res, 1e-8)
    rep.check("green.norm_bound", worst_ratio <= 1 + 1e-9, worst_ratio, 1 + 1e-9)
    return rep


def run_spectrum(cfg: RunConfig) -> Report:
    rep = Report("spectrum")
    blk = cfg.spectrum
    mat = assemble(blk.which, cfg.potential, cfg.impulse, cfg.window)
    res = eigenvalues(mat, cfg.tolerances.eigen_tol)
    tails = tail_check(res, blk.tail_epsilon)
    et = rep.table("eigenvalues", "k", "lambda", "residual", "tail_n0")
    for k, (lam, r, n0) in enumerate(zip(res.eigenvalues, res.residuals, tails)):
        et.add(k, lam, r, n0)
    rep.summary.update(which=blk.which, n_sites=cfg.window.n_sites, max_residual=max(res.residuals))
    rep.check("spectrum.residuals", max(res.residuals) <= cfg.tolerances.eigen_tol, max(res.residuals), cfg.tolerances.eigen_tol)
    if cfg.delta == 0:
        im = max(abs(lam.imag) for lam in res.eigenvalues)
        rep.check("spectrum.real_at_zero_delta", im <= 1e-10, im, 1e-10)
    if blk.ladder:
        windows = [LatticeWindow.symmetric(n) for n in blk.ladder]
        table = convergence_study(cfg.potential, cfg.impulse, windows, blk.disk_radius, blk.which, tol=cfg.tolerances.eigen_tol)
        ct = rep.table("convergence", "n_sites", "a", "b", "count", "max_drift", "ambiguous")
        dt = rep.table("drift", "n_sites", "lambda", "drift")
        for row in table.rows:
            ct.add(row.n_sites, row.window.a, row.window.b, row.count, row.max_drift, len(row.ambiguous))
            for lam, d in zip(row.eigenvalues, row.drifts or (None,) * row.count):
                dt.add(row.n_sites, lam, d)
        rep.summary.update(disk_radius=blk.disk_radius, count_stabilized=table.count_stabilized, final_drift=table.final_drift)
    return rep


RUNNERS = {"ivp": run_ivp, "weyl": run_weyl, "green": run_green, "spectrum": run_spectrum, "verify": run_verify}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="impulse-spectra", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, type=Path, help="YAML run configuration")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--format", default="both", choices=("csv", "json", "both"))
    return p


def _manifest(args, raw: bytes | None, files: list[str], code: int, t0: float) -> None:
    args.out.mkdir(parents=True, exist_ok=True)
    write_manifest(
        args.out,
        {
            "tool": "impulse-spectra",
            "version": __version__,
            "subcommand": args.subcommand,
            "config_sha256": hashlib.sha256(raw).hexdigest() if raw is not None else None,
            "format": args.format,
            "files": files,
            "exit_code": code,
            "wall_time_s": time.perf_counter() - t0,
        },
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg, raw = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        try:
            raw = args.config.read_bytes()
        except OSError:
            raw = None
        _manifest(args, raw, [], EXIT_CONFIG, t0)
        return EXIT_CONFIG
    rep = None
    try:
        rep = RUNNERS[args.subcommand](cfg)
        code = EXIT_OK if rep.passed else EXIT_NUMERICAL
    except InvariantBreach as exc:
        print(f"invariant breach: {exc}", file=sys.stderr)
        code = EXIT_INVARIANT
    except ImpulseSpectraError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = EXIT_NUMERICAL
    files: list[str] = []
    if rep is not None:
        files = write_report(rep, args.out, args.format)
        for c in rep.checks:
            status = "PASS" if c.passed else "FAIL"
            value = "" if c.value is None else f" value={c.value:.3e}"
            print(f"{status} {c.name}{value}")
    _manifest(args, raw, files, code, t0)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Nested Weyl disks and the square-summable solutions psi (right) and chi (left).

With phi, theta the solutions seeded at n = 1 by (phi_1, dphi_1) = (1, -1)
and (theta_1, dtheta_1) = (1, 0), every trial solution phi + v theta whose
right boundary ratio is purely imaginary traces a circle C_b in the
v-plane.  The circles shrink and nest as b grows; their common point v_hat
gives psi = phi + v_hat theta.  The left-hand construction (disks K_a in the
u-plane) gives chi = phi + u_hat theta.

An independent route to the same solutions is backward (Miller) recurrence
from a far seed; :func:`minimal_solution_oracle` implements it and is also
used to materialize psi, chi where phi + v_hat theta loses digits.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantBreach, LatticeIndexError, WindowError, WindowTooSmall
from .lattice import ComplexSeq, ImpulseParams, LatticeWindow, PotentialSpec, ldexp_complex
from .recurrence import CoefficientSeq, IvpSpec, solve_ivp, wronskian

ENERGY_IDENTITY_TOL = 1e-8
# phi + v_hat theta is used only where its error bound stays below this
CANCEL_TOL = 1e-13
_EPS = 2.0**-52


@dataclass(frozen=True)
class WeylDisk:
    side: str  # "forward" (C_b) or "backward" (K_a)
    index: int
    center: complex
    radius: float
    energy: float  # E_b or E_a; may be inf past the double range
    identity_error: float

    def contains(self, other: "WeylDisk", slack: float = 1e-10) -> bool:
        return abs(other.center - self.center) + other.radius <= self.radius + slack


def base_solutions(q: PotentialSpec, delta: float, window: LatticeWindow) -> tuple[ComplexSeq, ComplexSeq]:
    """phi and theta of the homogeneous problem with standard junction."""
    q.check_bound(window.z0_sites)
    imp = ImpulseParams.standard(delta)
    coeff = CoefficientSeq.spectral(q, window)
    phi = solve_ivp(IvpSpec(1, 1.0, -1.0), coeff, imp, window)
    theta = solve_ivp(IvpSpec(1, 1.0, 0.0), coeff, imp, window)
    return phi, theta


def _energy_scaled(theta: ComplexSeq, q: PotentialSpec, sites: range, ref: int) -> float:
    """sum (|dtheta_n|^2 + q_n |theta_n|^2) over sites, in units of 2**(2 ref)."""
    terms = []
    for n in sites:
        t0 = theta.relative(n, ref)
        t1 = theta.relative(n + 1, ref)
        terms.append(abs(t1 - t0) ** 2)
        terms.append(q(n) * abs(t0) ** 2)
    return math.fsum(terms)


def _ref_exponent(seq: ComplexSeq, *ns: int) -> int:
    return max(seq.scaled(n)[1] for n in ns)


def forward_disk(b: int, phi: ComplexSeq, theta: ComplexSeq, delta: float, q: PotentialSpec) -> WeylDisk:
    """Disk C_b of admissible v for the right boundary at b."""
    if b < 2:
        raise WindowError("forward disks need b >= 2")
    for s in (phi, theta):
        if not s.covers(1, b + 1):
            raise LatticeIndexError(f"sequences must cover [1, {b + 1}]")
    ref = _ref_exponent(theta, b, b + 1)
    th_b, th_b1 = theta.relative(b, ref), theta.relative(b + 1, ref)
    ph_b, ph_b1 = phi.relative(b, ref), phi.relative(b + 1, ref)
    dth, dph = th_b1 - th_b, ph_b1 - ph_b
    ep, em = cmath.exp(1j * delta), cmath.exp(-1j * delta)
    energy = _energy_scaled(theta, q, range(2, b + 1), ref)
    denom_identity = 2.0 * math.cos(delta) * energy
    denom_raw = em * th_b1 * dth.conjugate() + ep * th_b1.conjugate() * dth
    err = abs(denom_raw - denom_identity) / denom_identity
    if err > ENERGY_IDENTITY_TOL:
        raise InvariantBreach(f"energy identity fails at b={b}: relative error {err:.3e}")
    center = -(em * ph_b1 * dth.conjugate() + ep * dph * th_b1.conjugate()) / denom_identity
    return WeylDisk("forward", b, center, _radius(denom_identity, ref, b), _descale_energy(energy, ref), err)


def backward_disk(a: int, phi: ComplexSeq, theta: ComplexSeq, delta: float, q: PotentialSpec) -> WeylDisk:
    """Disk K_a of admissible u for the left boundary at a."""
    if a > -1:
        raise WindowError("backward disks need a <= -1")
    for s in (phi, theta):
        if not s.covers(a - 1, 0):
            raise LatticeIndexError(f"sequences must cover [{a - 1}, 0]")
    ref = _ref_exponent(theta, a - 1, a)
    th_a, th_am1 = theta.relative(a, ref), theta.relative(a - 1, ref)
    ph_a, ph_am1 = phi.relative(a, ref), phi.relative(a - 1, ref)
    dth, dph = th_a - th_am1, ph_a - ph_am1
    ep, em = cmath.exp(1j * delta), cmath.exp(-1j * delta)
    energy = _energy_scaled(theta, q, range(a, 0), ref)
    denom_identity = -2.0 * math.cos(delta) * energy
    denom_raw = ep * th_a * dth.conjugate() + em * th_a.conjugate() * dth
    err = abs(denom_raw - denom_identity) / abs(denom_identity)
    if err > ENERGY_IDENTITY_TOL:
        raise InvariantBreach(f"energy identity fails at a={a}: relative error {err:.3e}")
    center = -(ep * ph_a * dth.conjugate() + em * dph * th_a.conjugate()) / denom_identity
    return WeylDisk("backward", a, center, _radius(-denom_identity, ref, a), _descale_energy(energy, ref), err)


def _radius(denom: float, ref: int, index: int) -> float:
    if not denom > 0:
        raise InvariantBreach(f"degenerate disk denominator at index {index}")
    r = math.ldexp(1.0 / denom, -2 * ref)
    if r == 0.0:
        raise WindowError(f"disk radius underflows double precision at index {index}")
    return r


def _descale_energy(energy: float, ref: int) -> float:
    try:
        return math.ldexp(energy, 2 * ref)
    except OverflowError:
        return math.inf


def disk_ladder(
    side: str, phi: ComplexSeq, theta: ComplexSeq, delta: float, q: PotentialSpec, indices
) -> tuple[list[WeylDisk], list[int]]:
    """Disks at the given indices, stopping at the overflow-safe depth.

    Returns the disks and the indices skipped because theta vanished at the
    boundary point.
    """
    disks, skipped = [], []
    for k in indices:
        boundary = k + 1 if side == "forward" else k
        if theta[boundary] == 0:
            skipped.append(k)
            continue
        try:
            if side == "forward":
                disks.append(forward_disk(k, phi, theta, delta, q))
            else:
                disks.append(backward_disk(k, phi, theta, delta, q))
        except WindowError:
            break
    return disks, skipped


@dataclass(frozen=True)
class OracleResult:
    psi_alt: ComplexSeq
    chi_alt: ComplexSeq
    v_hat_alt: complex
    u_hat_alt: complex


def _normalize_fit(raw: ComplexSeq, phi: ComplexSeq, theta: ComplexSeq, n1: int, n2: int) -> tuple[ComplexSeq, complex]:
    """Fit raw ~ s (phi + v theta) at n1, n2; return raw / s and v."""
    ref = max(raw.scaled(n1)[1], raw.scaled(n2)[1])
    rhs = np.array([raw.relative(n1, ref), raw.relative(n2, ref)])
    mat = np.array([[phi[n1], theta[n1]], [phi[n2], theta[n2]]])
    (s, t), *_ = np.linalg.lstsq(mat, rhs, rcond=None)
    v = complex(t / s)
    out = ComplexSeq(raw.start, raw.mantissas / s, raw.exponents - ref, raw.window)
    return out, v


def minimal_solution_oracle(
    q: PotentialSpec,
    delta: float,
    window: LatticeWindow,
    phi: ComplexSeq | None = None,
    theta: ComplexSeq | None = None,
) -> OracleResult:
    """Decaying solutions by backward recurrence from the window edges.

    psi_alt is seeded with y_{b+1} = 0, y_b = 1 and propagated down to the
    puncture (and across it); chi_alt mirrors this from the left edge.  Both
    are normalized to the form phi + v theta.
    """
    q.check_bound(window.z0_sites)
    if phi is None or theta is None:
        phi, theta = base_solutions(q, delta, window)
    imp = ImpulseParams.standard(delta)
    coeff = CoefficientSeq.spectral(q, window)
    raw_psi = solve_ivp(IvpSpec(window.b, 1.0, -1.0), coeff, imp, window)
    raw_chi = solve_ivp(IvpSpec(window.lo, 0.0, 1.0), coeff, imp, window)
    psi_alt, v_alt = _normalize_fit(raw_psi, phi, theta, 1, 2)
    chi_alt, u_alt = _normalize_fit(raw_chi, phi, theta, -1, 0)
    return OracleResult(psi_alt, chi_alt, v_alt, u_alt)


@dataclass(frozen=True)
class WeylPair:
    v_hat: complex
    u_hat: complex
    v_enclosure: float
    u_enclosure: float
    psi: ComplexSeq
    chi: ComplexSeq
    phi: ComplexSeq
    theta: ComplexSeq
    delta: float
    forward_disks: tuple[WeylDisk, ...]
    backward_disks: tuple[WeylDisk, ...]
    v_hat_alt: complex
    u_hat_alt: complex
    n_cancel_right: int
    n_cancel_left: int
    limit_circle_suspected: bool = False
    skipped: tuple[int, ...] = field(default=())

    @property
    def window(self) -> LatticeWindow:
        return self.psi.window


def _plateau(disks: list[WeylDisk]) -> bool:
    if len(disks) < 4:
        return False
    radii = [d.radius for d in disks[-4:]]
    return all(r1 / r0 > 0.999 for r0, r1 in zip(radii, radii[1:]))


def _required_index(disks: list[WeylDisk], tol: float) -> int:
    first, last = disks[0], disks[-1]
    span = abs(last.index - first.index)
    if span == 0 or last.radius >= first.radius:
        return 2 * abs(last.index) + 2
    rate = (math.log(first.radius) - math.log(last.radius)) / span
    return abs(last.index) + int(math.ceil((math.log(last.radius) - math.log(tol)) / rate)) + 1


def _stitch(direct: ComplexSeq, alt: ComplexSeq, keep: range) -> ComplexSeq:
    """Use direct values on ``keep`` and rescaled alt values elsewhere.

    The rescaling is anchored at the first kept index, next to the puncture,
    where the direct combination carries no cancellation.
    """
    anchor = keep[0]
    m_d, e_d = direct.scaled(anchor)
    m_a, e_a = alt.scaled(anchor)
    factor = m_d / m_a
    shift = e_d - e_a
    mant = np.array(alt.mantissas) * factor
    expo = np.array(alt.exponents) + shift
    for n in keep:
        i = n - direct.start
        mant[i], expo[i] = direct.scaled(n)
    lo_keep, hi_keep = min(keep), max(keep)
    for n in direct.indices:
        if (keep.step > 0 and n < lo_keep) or (keep.step < 0 and n > hi_keep):
            i = n - direct.start
            mant[i], expo[i] = direct.scaled(n)
    return ComplexSeq(direct.start, mant, expo, direct.window)


def _cancel_limit(phi, theta, combo, coef, radius, sites) -> list[int]:
    kept = []
    for n in sites:
        val = abs(combo[n])
        if val == 0 or not math.isfinite(val):
            break
        bound = (_EPS * (abs(phi[n]) + abs(coef) * abs(theta[n])) + radius * abs(theta[n])) / val
        if bound > CANCEL_TOL and kept:
            break
        kept.append(n)
    return kept


def limit_points(q: PotentialSpec, delta: float, window: LatticeWindow, tol: float = 1e-8) -> WeylPair:
    """Limit points v_hat, u_hat and the square-summable solutions psi, chi."""
    phi, theta = base_solutions(q, delta, window)
    fwd, skip_f = disk_ladder("forward", phi, theta, delta, q, range(2, window.b + 1))
    bwd, skip_b = disk_ladder("backward", phi, theta, delta, q, range(-1, window.a - 1, -1))
    suspected = False
    for disks, side in ((fwd, "forward"), (bwd, "backward")):
        if not disks:
            raise WindowTooSmall(f"no {side} disk could be formed")
        if disks[-1].radius > tol:
            if _plateau(disks):
                suspected = True
                continue
            need = _required_index(disks, tol)
            if side == "forward":
                raise WindowTooSmall(
                    f"forward disk radius {disks[-1].radius:.3e} > tol {tol:.1e}; need b >= {need}", required_b=need
                )
            raise WindowTooSmall(
                f"backward disk radius {disks[-1].radius:.3e} > tol {tol:.1e}; need a <= {-need}", required_a=-need
            )
    v_hat, r_f = fwd[-1].center, fwd[-1].radius
    u_hat, r_b = bwd[-1].center, bwd[-1].radius

    oracle = minimal_solution_oracle(q, delta, window, phi, theta)
    psi_direct = phi.lincomb(1.0, theta, v_hat)
    chi_direct = phi.lincomb(1.0, theta, u_hat)
    keep_r = _cancel_limit(phi, theta, psi_direct, v_hat, r_f, range(1, window.hi + 1))
    keep_l = _cancel_limit(phi, theta, chi_direct, u_hat, r_b, range(0, window.lo - 1, -1))
    psi = _stitch(psi_direct, oracle.psi_alt, range(1, keep_r[-1] + 1))
    chi = _stitch(chi_direct, oracle.chi_alt, range(0, keep_l[-1] - 1, -1))

    pair = WeylPair(
        v_hat=v_hat,
        u_hat=u_hat,
        v_enclosure=2.0 * r_f,
        u_enclosure=2.0 * r_b,
        psi=psi,
        chi=chi,
        phi=phi,
        theta=theta,
        delta=delta,
        forward_disks=tuple(fwd),
        backward_disks=tuple(bwd),
        v_hat_alt=oracle.v_hat_alt,
        u_hat_alt=oracle.u_hat_alt,
        n_cancel_right=keep_r[-1],
        n_cancel_left=keep_l[-1],
        limit_circle_suspected=suspected,
        skipped=tuple(skip_f + skip_b),
    )
    em = cmath.exp(-1j * delta)
    if not ((v_hat * em).real > 0 and (u_hat * em).real < 0):
        raise InvariantBreach("limit points violate the half-plane conditions")
    return pair


def exact_base_wronskian(n: int, delta: float) -> complex:
    """W_n(phi, theta) for the standard junction."""
    e = cmath.exp(2j * delta)
    if n <= -1:
        return e
    if n == 0:
        return -e
    return 1.0 + 0j


def wronskian_mismatch(pair: WeylPair) -> float:
    """max_n |W_n(psi, chi) - (u_hat - v_hat) W_n(phi, theta)| over the window."""
    diff = pair.u_hat - pair.v_hat
    worst = 0.0
    for n in range(pair.psi.start, pair.psi.stop):
        w = wronskian(pair.psi, pair.chi, n)
        worst = max(worst, abs(w - diff * exact_base_wronskian(n, pair.delta)))
    return worst


@dataclass(frozen=True)
class EnergyCheck:
    lhs: float
    rhs: float
    slack: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + self.slack


def _energy_of(seq: ComplexSeq, q: PotentialSpec, sites) -> float:
    terms = []
    for n in sites:
        terms.append(abs(seq[n + 1] - seq[n]) ** 2)
        terms.append(q(n) * abs(seq[n]) ** 2)
    return math.fsum(terms)


def energy_inequality(pair: WeylPair, q: PotentialSpec, side: str) -> EnergyCheck:
    """Truncated energy bound on psi (side='forward') or chi (side='backward').

    The slack bounds how far the energy can move when v_hat moves within its
    enclosure: |lhs(v) - lhs(v')| <= cos d (2 e sqrt(S_psi S_theta) + e^2 S_theta)
    by Cauchy-Schwarz in the energy inner product, plus e for the right side.
    """
    cd = math.cos(pair.delta)
    em = cmath.exp(-1j * pair.delta)
    if side == "forward":
        disk = pair.forward_disks[-1]
        sites = range(2, disk.index + 1)
        s_sol = _energy_of(pair.psi, q, sites)
        rhs = (pair.v_hat * em).real
        enc = pair.v_enclosure
    elif side == "backward":
        disk = pair.backward_disks[-1]
        sites = range(disk.index, 0)
        s_sol = _energy_of(pair.chi, q, sites)
        rhs = -(pair.u_hat * em).real
        enc = pair.u_enclosure
    else:
        raise ValueError("side must be 'forward' or 'backward'")
    s_theta = 1.0 / (2.0 * cd * disk.radius)
    lhs = cd * s_sol
    slack = enc * (1.0 + cd * (2.0 * math.sqrt(s_sol * s_theta) + enc * s_theta)) + 1e-12 * (abs(lhs) + abs(rhs))
    return EnergyCheck(lhs, rhs, slack)


def constant_potential_root(c: float) -> float:
    """Decaying characteristic root r of y_{n+1} - (c + 2) y_n + y_{n-1} = 0."""
    s = c + 2.0
    return (s - math.sqrt(s * s - 4.0)) / 2.0


__all__ = [
    "WeylDisk",
    "WeylPair",
    "OracleResult",
    "EnergyCheck",
    "base_solutions",
    "forward_disk",
    "backward_disk",
    "disk_ladder",
    "limit_points",
    "minimal_solution_oracle",
    "energy_inequality",
    "wronskian_mismatch",
    "exact_base_wronskian",
    "constant_potential_root",
    "ldexp_complex",
]

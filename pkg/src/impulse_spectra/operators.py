"""The operators L, M and A = M^{-1} L on a truncated window, the Green kernel of
L and the energy identities satisfied by solutions of L y = f.

Truncation is Dirichlet: values stored at a - 1 and b + 1 enter (L y)_a and
(L y)_b as they are, and are zero for sequences built with
:meth:`ComplexSeq.from_sites`.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DecayViolation, InvariantBreach, NotASolution, WindowError
from .lattice import (
    ComplexSeq,
    ImpulseParams,
    LatticeWindow,
    PotentialSpec,
    Weights,
    compensated_cumsum,
    csum,
    inner_product,
    norm,
)
from .recurrence import wronskian

DECAY_TOL = 1e-12


def _require_window(y: ComplexSeq) -> LatticeWindow:
    if y.window is None:
        raise WindowError("operator application needs a windowed sequence")
    return y.window


def with_ghosts(y: ComplexSeq, imp: ImpulseParams) -> ComplexSeq:
    """Copy of y with y_0, y_1 overwritten from the junction conditions."""
    y0, y1 = imp.ghosts(y[-1], y[2])
    return y.replace({0: y0, 1: y1})


def apply_L(y: ComplexSeq, q: PotentialSpec, imp: ImpulseParams) -> ComplexSeq:
    """(L y)_n = -(y_{n+1} - 2 y_n + y_{n-1}) + q_n y_n on the z0 sites."""
    win = _require_window(y)
    v = with_ghosts(y, imp).values
    offs = win.z0_offsets()
    out = np.zeros(win.full_size, dtype=np.complex128)
    out[offs] = -(v[offs + 1] - 2.0 * v[offs] + v[offs - 1]) + q.on(win.z0_sites) * v[offs]
    return ComplexSeq.on_window(win, out)


def apply_M(y: ComplexSeq, delta: float, inverse: bool = False) -> ComplexSeq:
    """Multiply by rho_n (or conj(rho_n) when ``inverse``) on the z0 sites."""
    win = _require_window(y)
    rho = Weights(delta).rho_on(win.z0_sites)
    if inverse:
        rho = np.conj(rho)
    out = np.zeros(win.full_size, dtype=np.complex128)
    offs = win.z0_offsets()
    out[offs] = rho * y.values[offs]
    return ComplexSeq.on_window(win, out)


def apply_A(y: ComplexSeq, q: PotentialSpec, imp: ImpulseParams) -> ComplexSeq:
    return apply_M(apply_L(y, q, imp), imp.delta, inverse=True)


# Hermiticity defects ---------------------------------------------------------

class Defect(NamedTuple):
    lhs: complex
    rhs: complex


def _check_decay(y: ComplexSeq, name: str) -> None:
    win = _require_window(y)
    ref = max(1.0, float(np.max(np.abs(y.values))))
    for n in (win.lo, win.a, win.b, win.hi):
        if abs(y[n]) > DECAY_TOL * ref:
            raise DecayViolation(f"{name} does not vanish at the window edge n={n}: |{name}_n| = {abs(y[n]):.3e}")


def _junction_terms(y: ComplexSeq, z: ComplexSeq, imp: ImpulseParams) -> tuple[complex, complex]:
    """(Delta y_{-1}) conj(z_{-1}) and y_{-1} conj(Delta z_{-1}) with ghosts filled."""
    yg, zg = with_ghosts(y, imp), with_ghosts(z, imp)
    dy = yg[0] - yg[-1]
    dz = zg[0] - zg[-1]
    return dy * zg[-1].conjugate(), yg[-1] * dz.conjugate()


def hermiticity_defect_L(y: ComplexSeq, z: ComplexSeq, q: PotentialSpec, imp: ImpulseParams) -> Defect:
    """<Ly, z> - <y, Lz> by summation, and its closed form at the junction."""
    _check_decay(y, "y")
    _check_decay(z, "z")
    lhs = inner_product(apply_L(y, q, imp), z) - inner_product(y, apply_L(z, q, imp))
    t1, t2 = _junction_terms(y, z, imp)
    e = cmath.exp(2j * imp.delta)
    rhs = (e.conjugate() - 1.0) * t1 - (e - 1.0) * t2
    return Defect(lhs, rhs)


def _energy_form(y: ComplexSeq, z: ComplexSeq, q: PotentialSpec, sites) -> complex:
    """sum [(nabla y_n)(nabla conj z_n) + q_n y_n conj z_n] over sites."""
    terms = []
    for n in sites:
        terms.append((y[n] - y[n - 1]) * (z[n] - z[n - 1]).conjugate() + q(n) * y[n] * z[n].conjugate())
    return csum(terms)


def hermiticity_defect_A(y: ComplexSeq, z: ComplexSeq, q: PotentialSpec, imp: ImpulseParams) -> Defect:
    """<Ay, z> - <y, Az> by summation, and its closed form.

    The closed form carries a junction term plus 2i sin(2 delta) times the
    difference of the right and left energy forms.  The nabla differences at
    n = 2 use the ghost y_1.
    """
    _check_decay(y, "y")
    _check_decay(z, "z")
    lhs = inner_product(apply_A(y, q, imp), z) - inner_product(y, apply_A(z, q, imp))
    win = y.window
    yg, zg = with_ghosts(y, imp), with_ghosts(z, imp)
    t1, t2 = _junction_terms(y, z, imp)
    e = cmath.exp(2j * imp.delta)
    s2 = 2j * math.sin(2.0 * imp.delta)
    left = _energy_form(yg, zg, q, range(win.a, 0))
    right = _energy_form(yg, zg, q, range(2, win.b + 1))
    rhs = (1.0 - e.conjugate()) * t1 - (1.0 - e) * t2 - s2 * left + s2 * right
    return Defect(lhs, rhs)


def defect_scale(y: ComplexSeq, z: ComplexSeq, q: PotentialSpec, imp: ImpulseParams) -> float:
    """Magnitude against which defect residuals are judged."""
    return norm(apply_L(y, q, imp)) * norm(z) + norm(y) * norm(apply_L(z, q, imp)) + 1e-300


# Green operator --------------------------------------------------------------

@dataclass(frozen=True)
class GreenOperator:
    psi: ComplexSeq
    chi: ComplexSeq
    w_left: complex  # W_k for k <= -1
    w_right: complex  # W_k for k >= 1
    c_bound: float
    delta: float
    q: PotentialSpec

    @classmethod
    def from_weyl(cls, pair, q: PotentialSpec, check_tol: float = 1e-8) -> "GreenOperator":
        """Build from a :class:`~impulse_spectra.weyl.WeylPair`."""
        diff = pair.u_hat - pair.v_hat
        e = cmath.exp(2j * pair.delta)
        g = cls(pair.psi, pair.chi, diff * e, diff, q.c, pair.delta, q)
        g.check(check_tol)
        return g

    @property
    def window(self) -> LatticeWindow:
        return self.psi.window

    def wronskian_at(self, k: int) -> complex:
        if k <= -1:
            return self.w_left
        if k == 0:
            return -self.w_left
        return self.w_right

    def wronskian_by_index(self) -> dict[int, complex]:
        win = self.window
        return {k: self.wronskian_at(k) for k in range(win.lo, win.hi)}

    def check(self, tol: float = 1e-8) -> float:
        """Largest relative gap between stored and directly computed Wronskians."""
        if abs(self.w_right) == 0:
            raise InvariantBreach("psi and chi are linearly dependent")
        if not (np.all(np.isfinite(self.psi.values)) and np.all(np.isfinite(self.chi.values))):
            raise WindowError("psi or chi leaves the double range on this window; use a smaller window")
        worst = 0.0
        for k, w in self.wronskian_by_index().items():
            worst = max(worst, abs(wronskian(self.psi, self.chi, k) - w) / abs(w))
        if worst > tol:
            raise InvariantBreach(f"stored Wronskians disagree with W(psi, chi) by {worst:.3e} relative")
        return worst


def green_kernel(g: GreenOperator, n: int, k: int) -> complex:
    """G_{nk}: chi_k psi_n / W_k for k <= n, chi_n psi_k / W_k for k >= n."""
    w = g.wronskian_at(k)
    if k <= n:
        return g.chi[k] * g.psi[n] / w
    return g.chi[n] * g.psi[k] / w


def _source(g: GreenOperator, f: ComplexSeq) -> np.ndarray:
    win = g.window
    if f.window != win:
        raise WindowError("f must live on the Green operator's window")
    src = np.zeros(win.full_size, dtype=np.complex128)
    offs = win.z0_offsets()
    src[offs] = f.values[offs]  # f_0 = f_1 = 0 and nothing at the boundary
    return src


def apply_L_inverse(g: GreenOperator, f: ComplexSeq, verify: bool = True, tol: float = 1e-8) -> ComplexSeq:
    """x_n = psi_n sum_{k<=n} chi_k f_k / W_k + chi_n sum_{k>n} psi_k f_k / W_k."""
    win = g.window
    src = _source(g, f)
    idx = np.arange(win.lo, win.hi + 1)
    w = np.array([g.wronskian_at(int(k)) for k in idx])
    psi, chi = g.psi.values, g.chi.values
    lower = compensated_cumsum(chi * src / w)
    upper_terms = psi * src / w
    upper = compensated_cumsum(upper_terms[::-1])[::-1]  # sum over k >= n
    upper = np.append(upper[1:], 0.0)  # sum over k > n
    x = psi * lower + chi * upper
    x[0] = x[-1] = 0.0  # Dirichlet truncation
    result = ComplexSeq.on_window(win, x)
    if verify:
        verify_inverse(g, f, result, tol)
    return result


def verify_inverse(g: GreenOperator, f: ComplexSeq, x: ComplexSeq, tol: float = 1e-8) -> dict[str, float]:
    """Check L x = f, the junction conditions and the norm bound."""
    win = g.window
    imp = ImpulseParams.standard(g.delta)
    fn = norm(f)
    scale = max(fn, 1e-300)
    lx = apply_L(x, g.q, imp)
    offs = win.z0_offsets()
    res = np.abs(lx.values[offs] - f.values[offs])
    worst = int(np.argmax(res))
    if res[worst] > tol * scale:
        raise NotASolution(
            f"L(L^-1 f) misses f by {res[worst]:.3e} at n={win.z0_sites[worst]}",
            worst_site=win.z0_sites[worst],
            residual=float(res[worst]),
        )
    xs = max(abs(x[-1]), abs(x[1]), abs(x[2]), 1e-300)
    e = cmath.exp(2j * g.delta)
    jump = max(abs(x[-1] - x[1]), abs((x[0] - x[-1]) - e * (x[2] - x[1]))) / xs
    if jump > tol:
        raise InvariantBreach(f"L^-1 f violates the junction conditions by {jump:.3e}")
    ratio = norm(x) * g.c_bound * math.cos(g.delta) / scale if fn > 0 else 0.0
    if ratio > 1.0 + 1e-9:
        raise InvariantBreach(f"norm bound exceeded: ratio {ratio:.12f}")
    return {"residual": float(res[worst]) / scale, "junction": jump, "bound_ratio": ratio}


def bound_ratio(g: GreenOperator, f: ComplexSeq, x: ComplexSeq) -> float:
    """||x|| c cos(delta) / ||f||, at most 1 for x = L^-1 f."""
    return norm(x) * g.c_bound * math.cos(g.delta) / norm(f)


# energy identities -----------------------------------------------------------

class EnergyResiduals(NamedTuple):
    right: complex  # left minus right side of the identity on [2, b]
    left: complex  # same on [a, -1]
    combined: float  # real identity weighted by sigma_n


def _check_solution(y: ComplexSeq, f: ComplexSeq, q: PotentialSpec, imp: ImpulseParams, a: int, b: int, tol: float):
    if not y.covers(a - 1, b + 1) or not f.covers(a, b):
        raise WindowError(f"y must cover [{a - 1}, {b + 1}] and f must cover [{a}, {b}]")
    scale = max(float(np.max(np.abs(y.values))) * (2.0 + max(abs(q(n)) for n in (a, b)) + 2.0), 1e-300)
    worst_site, worst = None, 0.0
    for n in range(a, b + 1):
        if n in (0, 1):
            continue
        r = abs(-(y[n + 1] - 2 * y[n] + y[n - 1]) + q(n) * y[n] - f[n])
        if r > worst:
            worst_site, worst = n, r
    if worst > tol * scale:
        raise NotASolution(f"y does not solve L y = f: residual {worst:.3e} at n={worst_site}", worst_site, worst)
    e = cmath.exp(2j * imp.delta)
    jump = max(abs(y[-1] - y[1]), abs((y[0] - y[-1]) - e * (y[2] - y[1])))
    if jump > tol * scale:
        raise NotASolution(f"y violates the junction conditions by {jump:.3e}", -1, jump)


def energy_identity_residual(
    y: ComplexSeq,
    f: ComplexSeq,
    q: PotentialSpec,
    imp: ImpulseParams,
    a: int,
    b: int,
    tol: float = 1e-8,
) -> EnergyResiduals:
    """Residuals of the summed energy identities for a solution of L y = f.

    y must carry its ghost values y_0, y_1; the junction is the standard
    one (y_{-1} = y_1, Delta y_{-1} = e^{2i delta} Delta y_1).
    """
    if not imp.standard_mode:
        raise ValueError("energy identities assume the standard junction")
    if a > -1 or b < 2:
        raise WindowError("need a <= -1 and b >= 2")
    _check_solution(y, f, q, imp, a, b, tol)

    def d(n):
        return y[n + 1] - y[n]

    def energy(sites):
        return math.fsum(abs(d(n)) ** 2 + q(n) * abs(y[n]) ** 2 for n in sites)

    def bracket(lo, hi):
        return d(hi) * y[hi + 1].conjugate() - d(lo) * y[lo + 1].conjugate()

    e_right, e_left = energy(range(2, b + 1)), energy(range(a, 0))
    src_right = csum(f[n] * y[n].conjugate() for n in range(2, b + 1))
    src_left = csum(f[n] * y[n].conjugate() for n in range(a, 0))
    r57 = e_right - (bracket(1, b) + src_right)
    r58 = e_left - (bracket(a - 1, -1) + src_left)
    ep, em = cmath.exp(1j * imp.delta), cmath.exp(-1j * imp.delta)
    boundary = em * bracket(a - 1, -1) + ep * bracket(1, b)
    rhs62 = (boundary + em * src_left + ep * src_right).real
    r62 = math.cos(imp.delta) * (e_left + e_right) - rhs62
    return EnergyResiduals(r57, r58, r62)


def energy_scale(y: ComplexSeq, f: ComplexSeq, q: PotentialSpec, a: int, b: int) -> float:
    vals = [abs(y[n + 1] - y[n]) ** 2 + abs(q(n)) * abs(y[n]) ** 2 + abs(f[n] * y[n]) for n in range(a, b + 1) if n not in (0, 1)]
    return math.fsum(vals) + abs(y[b + 1]) ** 2 + abs(y[a - 1]) ** 2 + 1e-300


__all__ = [
    "apply_L",
    "apply_M",
    "apply_A",
    "with_ghosts",
    "Defect",
    "hermiticity_defect_L",
    "hermiticity_defect_A",
    "defect_scale",
    "GreenOperator",
    "green_kernel",
    "apply_L_inverse",
    "verify_inverse",
    "bound_ratio",
    "EnergyResiduals",
    "energy_identity_residual",
    "energy_scale",
]

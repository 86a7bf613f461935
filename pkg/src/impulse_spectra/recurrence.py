"""Second-order difference equations with impulse conditions.

The homogeneous problem is

    -y_{n+1} + (p_n + 2) y_n - y_{n-1} = 0,   n in Z \\ {0, 1},
    y_{-1} = d1 y_1,   y_0 - y_{-1} = d2 (y_2 - y_1).

Solutions are propagated outward from the seed, crossing the puncture with
the junction map.  Growing solutions are carried as mantissas with a shared
power-of-two exponent that is rebased whenever the running pair leaves
[1e-100, 1e100].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import FundamentalSystemDegenerate, InvariantBreach, LatticeIndexError, WindowError
from .lattice import (
    PUNCTURE,
    SCALE_HIGH,
    SCALE_LOW,
    ComplexSeq,
    ImpulseParams,
    LatticeWindow,
    PotentialSpec,
    Weights,
    ldexp_complex,
)


@dataclass(frozen=True)
class IvpSpec:
    """Seed y_{n0} = c0, y_{n0+1} - y_{n0} = c1."""

    n0: int
    c0: complex
    c1: complex

    @property
    def c1_prime(self) -> complex:
        return self.c0 + self.c1


class CoefficientSeq:
    """Coefficients p_n on the z0 sites of a window."""

    def __init__(self, window: LatticeWindow, p: Mapping[int, complex] | np.ndarray):
        self.window = window
        if isinstance(p, Mapping):
            missing = [n for n in window.z0_sites if n not in p]
            if missing:
                raise WindowError(f"coefficients missing at sites {missing[:5]}")
            arr = np.array([p[n] for n in window.z0_sites], dtype=np.complex128)
        else:
            arr = np.array(p, dtype=np.complex128)
            if arr.shape != (window.n_sites,):
                raise WindowError("need exactly one coefficient per z0 site")
        arr.setflags(write=False)
        self.p = arr
        self._index = {n: i for i, n in enumerate(window.z0_sites)}

    @classmethod
    def spectral(
        cls, q: PotentialSpec, window: LatticeWindow, lam: complex = 0.0, delta: float = 0.0
    ) -> "CoefficientSeq":
        """p_n = q_n - lam * rho_n, the coefficients of the eigenvalue problem."""
        sites = window.z0_sites
        rho = Weights(delta).rho_on(sites)
        return cls(window, q.on(sites) - lam * rho)

    def at(self, n: int) -> complex:
        try:
            return complex(self.p[self._index[n]])
        except KeyError:
            raise LatticeIndexError(f"no coefficient at n={n}") from None

    def p_tilde(self, n: int) -> complex:
        return self.at(n) + 2.0


def _rebase(prev: complex, cur: complex, e: int) -> tuple[complex, complex, int]:
    m = max(abs(prev), abs(cur))
    if m > SCALE_HIGH or 0.0 < m < SCALE_LOW:
        k = math.frexp(m)[1]
        prev, cur, e = ldexp_complex(prev, -k), ldexp_complex(cur, -k), e + k
    return prev, cur, e


def solve_ivp(spec: IvpSpec, coeff: CoefficientSeq, imp: ImpulseParams, window: LatticeWindow) -> ComplexSeq:
    """Unique solution on the window's full range through the given seed."""
    if coeff.window != window:
        raise WindowError("coefficients are given on a different window")
    lo, hi = window.lo, window.hi
    n0 = spec.n0
    if not (lo <= n0 and n0 + 1 <= hi):
        raise LatticeIndexError(f"seed index {n0} must satisfy {lo} <= n0 < {hi}")
    a, b = window.a, window.b
    mant = np.zeros(window.full_size, dtype=np.complex128)
    expo = np.zeros(window.full_size, dtype=np.int64)
    pt = coeff.p_tilde

    def store(n: int, val: complex, e: int) -> None:
        mant[n - lo] = val
        expo[n - lo] = e

    def march_up(prev, cur, e, first, last):
        # (prev, cur) = (y_{first-1}, y_first); equations at first..last give y_{first+1}..y_{last+1}
        for n in range(first, last + 1):
            prev, cur = cur, pt(n) * cur - prev
            prev, cur, e = _rebase(prev, cur, e)
            store(n + 1, cur, e)
        return prev, cur, e

    def march_down(cur, nxt, e, first, last):
        # (cur, nxt) = (y_first, y_{first+1}); equations at first..last (descending) give y_{first-1}..
        for n in range(first, last - 1, -1):
            cur, nxt = pt(n) * cur - nxt, cur
            nxt, cur, e = _rebase(nxt, cur, e)
            store(n - 1, cur, e)
        return cur, nxt, e

    def left_to_right(ym1, y0, e):
        y1 = ym1 / imp.d1
        y2 = y1 + (y0 - ym1) / imp.d2
        store(1, y1, e)
        store(2, y2, e)
        return y1, y2

    def right_to_left(y1, y2, e):
        ym1 = imp.d1 * y1
        y0 = ym1 + imp.d2 * (y2 - y1)
        store(-1, ym1, e)
        store(0, y0, e)
        return ym1, y0

    c0, c1p = complex(spec.c0), complex(spec.c1_prime)
    store(n0, c0, 0)
    store(n0 + 1, c1p, 0)
    if n0 <= -2:
        march_down(c0, c1p, 0, n0, a)
        ym1, y0, e = march_up(c0, c1p, 0, n0 + 1, -1)
        y1, y2 = left_to_right(ym1, y0, e)
        march_up(y1, y2, e, 2, b)
    elif n0 == -1:
        march_down(c0, c1p, 0, -1, a)
        y1, y2 = left_to_right(c0, c1p, 0)
        march_up(y1, y2, 0, 2, b)
    elif n0 == 0:
        ym1 = imp.d1 * c1p
        y2 = c1p + (c0 - ym1) / imp.d2
        store(-1, ym1, 0)
        store(2, y2, 0)
        march_down(ym1, c0, 0, -1, a)
        march_up(c1p, y2, 0, 2, b)
    elif n0 == 1:
        march_up(c0, c1p, 0, 2, b)
        ym1, y0 = right_to_left(c0, c1p, 0)
        march_down(ym1, y0, 0, -1, a)
    else:
        march_up(c0, c1p, 0, n0 + 1, b)
        cur, nxt, e = march_down(c0, c1p, 0, n0, 2)
        # after the sweep, (cur, nxt) = (y_1, y_2) sharing exponent e
        ym1, y0 = right_to_left(cur, nxt, e)
        march_down(ym1, y0, e, -1, a)
    if not expo.any():
        return ComplexSeq.on_window(window, mant)
    return ComplexSeq.on_window(window, mant, expo)


def equation_residuals(y: ComplexSeq, coeff: CoefficientSeq, h: ComplexSeq | None = None) -> dict[int, float]:
    """Relative residual of -y_{n+1} + p~_n y_n - y_{n-1} = h_n at each z0 site with both neighbours stored."""
    out = {}
    for n in coeff.window.z0_sites:
        if not y.covers(n - 1, n + 1):
            continue
        terms = (y[n + 1], coeff.p_tilde(n) * y[n], y[n - 1])
        rhs = 0j if h is None else h[n]
        r = -terms[0] + terms[1] - terms[2] - rhs
        scale = sum(abs(t) for t in terms) + abs(rhs)
        out[n] = abs(r) / scale if scale > 0 else abs(r)
    return out


def _scaled_product(y: ComplexSeq, i: int, z: ComplexSeq, j: int) -> tuple[complex, int]:
    my, ey = y.scaled(i)
    mz, ez = z.scaled(j)
    return my * mz, ey + ez


def wronskian(y: ComplexSeq, z: ComplexSeq, n: int) -> complex:
    """W_n(y, z) = y_n z_{n+1} - y_{n+1} z_n."""
    t1, e1 = _scaled_product(y, n, z, n + 1)
    t2, e2 = _scaled_product(y, n + 1, z, n)
    ref = max(e1, e2)
    return ldexp_complex(ldexp_complex(t1, e1 - ref) - ldexp_complex(t2, e2 - ref), ref)


def wronskian_terms_scale(y: ComplexSeq, z: ComplexSeq, n: int) -> float:
    return max(abs(y[n] * z[n + 1]), abs(y[n + 1] * z[n]))


@dataclass(frozen=True)
class WronskianProfile:
    omega_minus: complex
    omega_plus: complex
    w0: complex
    max_deviation: float
    scale: float
    junction_scale: float
    d1: complex
    d2: complex

    def jump_error(self) -> float:
        """Relative mismatch of omega_- = d1 d2 omega_+."""
        return abs(self.omega_minus - self.d1 * self.d2 * self.omega_plus) / self._ref()

    def w0_error(self) -> float:
        """Relative mismatch of W_0 = -d2 omega_+."""
        return abs(self.w0 + self.d2 * self.omega_plus) / self._ref()

    def _ref(self) -> float:
        ref = max(abs(self.omega_minus), abs(self.d1 * self.d2 * self.omega_plus), self.junction_scale)
        return ref if ref > 0 else 1.0


def wronskian_profile(y: ComplexSeq, z: ComplexSeq, imp: ImpulseParams) -> WronskianProfile:
    lo = max(y.start, z.start)
    hi = min(y.stop, z.stop) - 1
    if lo > -1 or hi < 1:
        raise LatticeIndexError("sequences must cover [-1, 2]")
    om_m = wronskian(y, z, -1)
    om_p = wronskian(y, z, 1)
    w0 = wronskian(y, z, 0)
    dev = 0.0
    scale = 0.0
    for n in range(lo, hi + 1):
        scale = max(scale, wronskian_terms_scale(y, z, n))
        if n <= -1:
            dev = max(dev, abs(wronskian(y, z, n) - om_m))
        elif n >= 1:
            dev = max(dev, abs(wronskian(y, z, n) - om_p))
    jscale = max(wronskian_terms_scale(y, z, n) for n in (-1, 0, 1))
    return WronskianProfile(om_m, om_p, w0, dev, scale, jscale, complex(imp.d1), complex(imp.d2))


def particular_solution(
    h: ComplexSeq,
    u: ComplexSeq,
    v: ComplexSeq,
    coeff: CoefficientSeq | None = None,
    tol: float = 1e-9,
) -> ComplexSeq:
    """Variation-of-constants solution of the nonhomogeneous problem.

    ``x`` satisfies ``-x_{n+1} + p~_n x_n - x_{n-1} = h_n`` on z0 sites with
    x_{-1} = x_0 = x_1 = x_2 = 0, given a fundamental system ``u``, ``v``.
    The values h_0, h_1 are ignored (taken as zero).  When ``coeff`` is
    given, the equation residual is checked against ``tol``.
    """
    if u.start != v.start or len(u) != len(v):
        raise WindowError("u and v must cover the same range")
    lo, hi = u.start, u.stop
    if lo > -1 or hi < 3:
        raise LatticeIndexError("fundamental system must cover [-1, 3]")

    def h_at(s: int) -> complex:
        if s in PUNCTURE or not h.covers(s, s):
            return 0j
        return h[s]

    def w_at(s: int) -> complex:
        w = wronskian(u, v, s)
        scale = abs(u[s]) * abs(v[s + 1]) + abs(u[s + 1]) * abs(v[s])
        if not abs(w) >= 1e-13 * scale or w == 0:
            raise FundamentalSystemDegenerate(f"Wronskian vanishes at s={s}: |W|={abs(w):.3e}, scale={scale:.3e}")
        return w

    w_at(-1)
    w_at(1)
    uu, vv = u.values, v.values
    x = np.zeros(len(u), dtype=np.complex128)

    # n >= 1: x_n = u_n sum_{s=1}^{n} v_s h_s / W_s - v_n sum_{s=1}^{n} u_s h_s / W_s
    su = sv = 0j
    for n in range(1, hi + 1):
        hs = h_at(n)
        if hs != 0 and n + 1 <= hi:
            w = w_at(n)
            sv += vv[n - lo] * hs / w
            su += uu[n - lo] * hs / w
        elif hs != 0:
            raise LatticeIndexError(f"h_{n} needs the fundamental system at n+1={n + 1}")
        x[n - lo] = uu[n - lo] * sv - vv[n - lo] * su
    # n <= 0: x_n = -u_n sum_{s=n}^{0} v_s h_s / W_s + v_n sum_{s=n}^{0} u_s h_s / W_s
    su = sv = 0j
    for n in range(0, lo - 1, -1):
        hs = h_at(n)
        if hs != 0:
            w = w_at(n)
            sv += vv[n - lo] * hs / w
            su += uu[n - lo] * hs / w
        x[n - lo] = -uu[n - lo] * sv + vv[n - lo] * su

    window = u.window if u.window == v.window else None
    out = ComplexSeq(lo, x, window=window)
    if any(out[n] != 0 for n in (-1, 0, 1, 2)):
        raise InvariantBreach("particular solution must vanish at n = -1, 0, 1, 2")
    if coeff is not None:
        res = equation_residuals(out, coeff, h)
        if res:
            worst = max(res, key=res.get)
            if res[worst] > tol:
                raise InvariantBreach(f"particular solution residual {res[worst]:.3e} at n={worst}")
    return out


def random_system(
    rng: np.random.Generator, half_width: int, spread: float = 1.0
) -> tuple[LatticeWindow, CoefficientSeq, ImpulseParams]:
    """Random complex coefficients and impulse data on a random window, for self-tests."""
    a = -int(rng.integers(1, half_width + 1))
    b = int(rng.integers(2, half_width + 2))
    window = LatticeWindow(a, b)
    p = spread * (rng.uniform(-1, 1, window.n_sites) + 1j * rng.uniform(-1, 1, window.n_sites))
    d1, d2 = (r * np.exp(1j * t) for r, t in zip(rng.uniform(0.5, 2.0, 2), rng.uniform(0, 2 * np.pi, 2)))
    # random (d1, d2) are outside the delta parametrisation; delta is not used by propagation
    imp = ImpulseParams(0.0, complex(d1), complex(d2))
    return window, CoefficientSeq(window, p), imp


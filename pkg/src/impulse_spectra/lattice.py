"""Index windows on the punctured lattice Z \\ {0, 1}, complex sequences and
the difference calculus used throughout the package.

A :class:`LatticeWindow` ``[a, b]`` (``a <= -1``, ``b >= 2``) stores values on
the full range ``[a - 1, b + 1]``: the outer two entries carry boundary
values, the entries at 0 and 1 carry the ghost values fixed by the impulse
conditions.  Only the remaining sites belong to the Hilbert space.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import LatticeIndexError, PotentialBoundError, WindowError

PUNCTURE = (0, 1)

# rebase threshold for scaled propagation (mantissa * 2**exponent)
SCALE_HIGH = 1e100
SCALE_LOW = 1e-100


@dataclass(frozen=True)
class LatticeWindow:
    a: int
    b: int

    def __post_init__(self) -> None:
        if int(self.a) != self.a or int(self.b) != self.b:
            raise WindowError("window bounds must be integers")
        if self.a > -1 or self.b < 2:
            raise WindowError(f"window needs a <= -1 and b >= 2, got a={self.a}, b={self.b}")

    @classmethod
    def symmetric(cls, n_sites: int) -> "LatticeWindow":
        """Window holding ``n_sites`` punctured-lattice sites, split evenly."""
        if n_sites < 2:
            raise WindowError("at least two sites are required")
        left = n_sites // 2
        return cls(-left, n_sites - left + 1)

    @property
    def lo(self) -> int:
        return self.a - 1

    @property
    def hi(self) -> int:
        return self.b + 1

    @property
    def full_size(self) -> int:
        return self.hi - self.lo + 1

    @property
    def full_range(self) -> range:
        return range(self.lo, self.hi + 1)

    @property
    def z0_sites(self) -> tuple[int, ...]:
        return tuple(n for n in range(self.a, self.b + 1) if n not in PUNCTURE)

    @property
    def n_sites(self) -> int:
        return self.b - self.a - 1

    def offset(self, n: int) -> int:
        if not self.lo <= n <= self.hi:
            raise LatticeIndexError(f"index {n} outside [{self.lo}, {self.hi}]")
        return n - self.lo

    def z0_offsets(self) -> np.ndarray:
        return np.array([n - self.lo for n in self.z0_sites], dtype=np.intp)


def _descale(mant: np.ndarray, expo: np.ndarray) -> np.ndarray:
    out = np.empty(mant.shape, dtype=np.complex128)
    with np.errstate(over="ignore", under="ignore"):
        out.real = np.ldexp(mant.real, expo)
        out.imag = np.ldexp(mant.imag, expo)
    return out


def ldexp_complex(z: complex, k: int) -> complex:
    """z * 2**k, saturating to inf instead of raising on overflow."""
    try:
        return complex(math.ldexp(z.real, k), math.ldexp(z.imag, k))
    except OverflowError:
        with np.errstate(over="ignore"):
            return complex(float(np.ldexp(z.real, k)), float(np.ldexp(z.imag, k)))


class ComplexSeq:
    """Immutable complex sequence over the contiguous index range [start, stop].

    Values may be held in scaled form, ``mantissa * 2**exponent`` per index,
    so that rapidly growing solutions survive past the double range.  Plain
    indexing and :attr:`values` always return descaled numbers (possibly
    ``inf`` beyond the representable range); :meth:`scaled` gives the raw
    pair for scale-aware consumers.
    """

    __slots__ = ("start", "window", "_mant", "_exp", "_values")

    def __init__(
        self,
        start: int,
        values: Sequence[complex] | np.ndarray,
        exponents: Sequence[int] | np.ndarray | None = None,
        window: LatticeWindow | None = None,
    ):
        mant = np.array(values, dtype=np.complex128)
        if mant.ndim != 1 or mant.size == 0:
            raise WindowError("sequence values must be a non-empty 1-d array")
        if exponents is None:
            expo = np.zeros(mant.size, dtype=np.int64)
        else:
            expo = np.array(exponents, dtype=np.int64)
            if expo.shape != mant.shape:
                raise WindowError("exponent ledger must match the values in length")
        if window is not None and (start != window.lo or mant.size != window.full_size):
            raise WindowError("values do not cover the window's full range")
        mant.setflags(write=False)
        expo.setflags(write=False)
        self.start = int(start)
        self.window = window
        self._mant = mant
        self._exp = expo
        if expo.any():
            self._values = _descale(mant, expo)
        else:
            self._values = mant
        self._values.setflags(write=False)

    # construction helpers
    @classmethod
    def on_window(cls, window: LatticeWindow, values=None, exponents=None) -> "ComplexSeq":
        if values is None:
            values = np.zeros(window.full_size, dtype=np.complex128)
        return cls(window.lo, values, exponents, window)

    @classmethod
    def from_mapping(cls, window: LatticeWindow, mapping: Mapping[int, complex]) -> "ComplexSeq":
        vals = np.zeros(window.full_size, dtype=np.complex128)
        for n, v in mapping.items():
            vals[window.offset(n)] = v
        return cls.on_window(window, vals)

    @classmethod
    def indicator(cls, window: LatticeWindow, n: int, value: complex = 1.0) -> "ComplexSeq":
        return cls.from_mapping(window, {n: value})

    @classmethod
    def from_sites(cls, window: LatticeWindow, site_values: Sequence[complex]) -> "ComplexSeq":
        """Place one value per z0 site; ghost and boundary entries are zero."""
        vals = np.zeros(window.full_size, dtype=np.complex128)
        site_values = np.asarray(site_values, dtype=np.complex128)
        if site_values.size != window.n_sites:
            raise WindowError("need exactly one value per z0 site")
        vals[window.z0_offsets()] = site_values
        return cls.on_window(window, vals)

    # basic accessors
    @property
    def stop(self) -> int:
        return self.start + self._mant.size - 1

    @property
    def indices(self) -> range:
        return range(self.start, self.stop + 1)

    def __len__(self) -> int:
        return self._mant.size

    def covers(self, lo: int, hi: int) -> bool:
        return self.start <= lo and hi <= self.stop

    def _pos(self, n: int) -> int:
        if not self.start <= n <= self.stop:
            raise LatticeIndexError(f"index {n} outside [{self.start}, {self.stop}]")
        return n - self.start

    def __getitem__(self, n: int) -> complex:
        return complex(self._values[self._pos(n)])

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def mantissas(self) -> np.ndarray:
        return self._mant

    @property
    def exponents(self) -> np.ndarray:
        return self._exp

    @property
    def is_scaled(self) -> bool:
        return bool(self._exp.any())

    def scaled(self, n: int) -> tuple[complex, int]:
        i = self._pos(n)
        return complex(self._mant[i]), int(self._exp[i])

    def relative(self, n: int, ref_exp: int) -> complex:
        """Value at n expressed in units of 2**ref_exp."""
        m, e = self.scaled(n)
        return ldexp_complex(m, e - ref_exp)

    def site_values(self) -> np.ndarray:
        if self.window is None:
            raise WindowError("sequence is not attached to a window")
        return self._values[self.window.z0_offsets()]

    def replace(self, mapping: Mapping[int, complex]) -> "ComplexSeq":
        vals = np.array(self._values)
        for n, v in mapping.items():
            vals[self._pos(n)] = v
        return ComplexSeq(self.start, vals, window=self.window)

    def restrict(self, lo: int, hi: int) -> "ComplexSeq":
        i, j = self._pos(lo), self._pos(hi)
        return ComplexSeq(lo, self._mant[i : j + 1], self._exp[i : j + 1])

    # arithmetic keeps the exponent ledger when possible
    def lincomb(self, alpha: complex, other: "ComplexSeq", beta: complex) -> "ComplexSeq":
        """Return ``alpha * self + beta * other`` index by index."""
        if other.start != self.start or len(other) != len(self):
            raise WindowError("sequences cover different index ranges")
        window = self.window if self.window == other.window else None
        if not self.is_scaled and not other.is_scaled:
            return ComplexSeq(self.start, alpha * self._mant + beta * other._mant, window=window)
        ref = np.maximum(self._exp, other._exp)
        with np.errstate(under="ignore"):
            m1 = _descale(self._mant, self._exp - ref)
            m2 = _descale(other._mant, other._exp - ref)
        return ComplexSeq(self.start, alpha * m1 + beta * m2, ref, window)

    def scale(self, factor: complex) -> "ComplexSeq":
        return ComplexSeq(self.start, factor * self._mant, self._exp, self.window)

    def __add__(self, other: "ComplexSeq") -> "ComplexSeq":
        return self.lincomb(1.0, other, 1.0)

    def __sub__(self, other: "ComplexSeq") -> "ComplexSeq":
        return self.lincomb(1.0, other, -1.0)

    def __mul__(self, factor: complex) -> "ComplexSeq":
        return self.scale(factor)

    __rmul__ = __mul__

    def __neg__(self) -> "ComplexSeq":
        return self.scale(-1.0)

    def __repr__(self) -> str:
        return f"ComplexSeq(start={self.start}, len={len(self)}, scaled={self.is_scaled})"


@dataclass(frozen=True)
class ImpulseParams:
    """Junction data y_{-1} = d1 y_1, dy_{-1} = d2 dy_1 plus the angle delta."""

    delta: float
    d1: complex
    d2: complex

    def __post_init__(self) -> None:
        if not (0.0 <= self.delta < math.pi / 2):
            raise ValueError(f"delta must lie in [0, pi/2), got {self.delta!r}")
        if self.d1 == 0 or self.d2 == 0:
            raise ValueError("impulse coefficients d1, d2 must be nonzero")

    @classmethod
    def standard(cls, delta: float) -> "ImpulseParams":
        """d1 = 1, d2 = e^{2i delta}: the junction used by the spectral operators."""
        return cls(float(delta), 1.0 + 0j, cmath.exp(2j * delta))

    @property
    def standard_mode(self) -> bool:
        e = cmath.exp(2j * self.delta)
        return abs(self.d1 - 1.0) <= 1e-14 and abs(self.d2 - e) <= 1e-14

    def ghosts(self, y_m1: complex, y_2: complex) -> tuple[complex, complex]:
        """Ghost values (y_0, y_1) from the two neighbouring sites."""
        y_1 = y_m1 / self.d1
        y_0 = y_m1 + self.d2 * (y_2 - y_1)
        return y_0, y_1


POTENTIAL_KINDS = ("constant", "power", "explicit")


@dataclass(frozen=True)
class PotentialSpec:
    """Real potential q_n with lower bound c: constant c, c + |n|**m, or a table."""

    kind: str
    c: float
    m: float = 0.0
    explicit_values: Mapping[int, float] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in POTENTIAL_KINDS:
            raise ValueError(f"potential kind must be one of {POTENTIAL_KINDS}, got {self.kind!r}")
        if not (self.c > 0 and math.isfinite(self.c)):
            raise PotentialBoundError(f"potential lower bound c must be > 0, got {self.c!r}")
        if self.m < 0:
            raise ValueError(f"growth exponent m must be >= 0, got {self.m!r}")
        if self.kind == "explicit":
            if not self.explicit_values:
                raise ValueError("explicit potential needs a table of values")
            for n, v in self.explicit_values.items():
                if isinstance(v, complex) or not math.isfinite(float(v)):
                    raise ValueError(f"q_{n} must be a finite real number")

    @classmethod
    def constant(cls, c: float) -> "PotentialSpec":
        return cls("constant", float(c))

    @classmethod
    def power(cls, c: float, m: float) -> "PotentialSpec":
        return cls("power", float(c), float(m))

    @classmethod
    def explicit(cls, values: Mapping[int, float], c: float | None = None) -> "PotentialSpec":
        vals = {int(n): float(v) for n, v in values.items()}
        return cls("explicit", float(min(vals.values()) if c is None else c), 0.0, vals)

    def __call__(self, n: int) -> float:
        if self.kind == "constant":
            return self.c
        if self.kind == "power":
            return self.c + abs(n) ** self.m
        try:
            return float(self.explicit_values[n])
        except KeyError:
            raise LatticeIndexError(f"explicit potential has no value at n={n}") from None

    def on(self, indices: Iterable[int]) -> np.ndarray:
        return np.array([self(n) for n in indices], dtype=float)

    def check_bound(self, indices: Iterable[int]) -> None:
        for n in indices:
            if n in PUNCTURE:
                continue
            if self(n) < self.c:
                raise PotentialBoundError(f"q_{n} = {self(n)!r} is below the bound c = {self.c!r}")


@dataclass(frozen=True)
class Weights:
    """Unimodular weights: rho_n for the operator M and sigma_n for the energy identity."""

    delta: float

    def rho(self, n: int) -> complex:
        if n <= -1:
            return cmath.exp(2j * self.delta)
        if n >= 2:
            return cmath.exp(-2j * self.delta)
        raise LatticeIndexError(f"rho is defined only off the puncture, got n={n}")

    def sigma(self, n: int) -> complex:
        return cmath.exp(-1j * self.delta) if n <= -1 else cmath.exp(1j * self.delta)

    def rho_on(self, sites: Iterable[int]) -> np.ndarray:
        return np.array([self.rho(n) for n in sites], dtype=np.complex128)


# compensated summation -------------------------------------------------------

def csum(values: Iterable[complex]) -> complex:
    """Correctly rounded complex sum (real and imaginary parts via fsum)."""
    vals = np.asarray(list(values), dtype=np.complex128)
    return complex(math.fsum(vals.real.tolist()), math.fsum(vals.imag.tolist()))


def compensated_cumsum(values: np.ndarray) -> np.ndarray:
    """Running sums with Neumaier compensation, separately per component."""
    vals = np.asarray(values, dtype=np.complex128)
    out = np.empty_like(vals)
    for part, setter in ((vals.real, "real"), (vals.imag, "imag")):
        s = 0.0
        comp = 0.0
        acc = np.empty(vals.size)
        for i, x in enumerate(part.tolist()):
            t = s + x
            if abs(s) >= abs(x):
                comp += (s - t) + x
            else:
                comp += (x - t) + s
            s = t
            acc[i] = s + comp
        if setter == "real":
            out.real = acc
        else:
            out.imag = acc
    return out


# difference calculus ---------------------------------------------------------

def forward_diff(s: ComplexSeq) -> ComplexSeq:
    """(Delta s)_n = s_{n+1} - s_n on [start, stop - 1]."""
    if len(s) < 2:
        raise WindowError("forward difference needs at least two values")
    v = s.values
    return ComplexSeq(s.start, v[1:] - v[:-1])


def backward_diff(s: ComplexSeq) -> ComplexSeq:
    """(nabla s)_n = s_n - s_{n-1} on [start + 1, stop]."""
    if len(s) < 2:
        raise WindowError("backward difference needs at least two values")
    v = s.values
    return ComplexSeq(s.start + 1, v[1:] - v[:-1])


def second_diff(s: ComplexSeq, n: int) -> complex:
    return s[n + 1] - 2 * s[n] + s[n - 1]


class SbpResiduals(NamedTuple):
    """Left minus right side of each summation-by-parts identity."""

    delta_form: complex  # sum (Df) g = f_{b+1} g_b - f_a g_{a-1} - sum f (nabla g)
    nabla_form: complex  # sum (nabla f) g = f_b g_{b+1} - f_{a-1} g_a - sum f (Dg)
    second_nabla: complex  # sum (D nabla f) g = [(Df) g]_{a-1}^b - sum (nabla f)(nabla g)
    second_delta: complex  # sum (D nabla f) g = [(Df) g_{+1}]_{a-1}^b - sum (Df)(Dg)
    green: complex  # sum [(D nabla f) g - f (D nabla g)] = [(Df) g - f (Dg)]_{a-1}^b

    def max_abs(self) -> float:
        return max(abs(r) for r in self)


def sbp_residuals(f: ComplexSeq, g: ComplexSeq, a: int, b: int) -> SbpResiduals:
    if a >= b:
        raise WindowError("summation by parts needs a < b")
    for s in (f, g):
        if not s.covers(a - 1, b + 1):
            raise LatticeIndexError(f"sequence must cover [{a - 1}, {b + 1}]")
    ks = range(a, b + 1)

    def D(s, k):
        return s[k + 1] - s[k]

    def N(s, k):
        return s[k] - s[k - 1]

    def DN(s, k):
        return s[k + 1] - 2 * s[k] + s[k - 1]

    r1 = csum(D(f, k) * g[k] for k in ks) - (
        f[b + 1] * g[b] - f[a] * g[a - 1] - csum(f[k] * N(g, k) for k in ks)
    )
    r2 = csum(N(f, k) * g[k] for k in ks) - (
        f[b] * g[b + 1] - f[a - 1] * g[a] - csum(f[k] * D(g, k) for k in ks)
    )
    lhs = csum(DN(f, k) * g[k] for k in ks)
    r3 = lhs - (D(f, b) * g[b] - D(f, a - 1) * g[a - 1] - csum(N(f, k) * N(g, k) for k in ks))
    r4 = lhs - (D(f, b) * g[b + 1] - D(f, a - 1) * g[a] - csum(D(f, k) * D(g, k) for k in ks))
    r5 = csum(DN(f, k) * g[k] - f[k] * DN(g, k) for k in ks) - (
        (D(f, b) * g[b] - f[b] * D(g, b)) - (D(f, a - 1) * g[a - 1] - f[a - 1] * D(g, a - 1))
    )
    return SbpResiduals(r1, r2, r3, r4, r5)


def inner_product(y: ComplexSeq, z: ComplexSeq) -> complex:
    """<y, z> = sum over punctured-lattice sites of y_n conj(z_n)."""
    if y.window is None or y.window != z.window:
        raise WindowError("inner product needs two sequences on the same window")
    offs = y.window.z0_offsets()
    return csum(y.values[offs] * np.conj(z.values[offs]))


def norm(y: ComplexSeq) -> float:
    if y.window is None:
        raise WindowError("norm needs a windowed sequence")
    v = y.values[y.window.z0_offsets()]
    return math.sqrt(math.fsum((v.real**2 + v.imag**2).tolist()))

from __future__ import annotations

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from impulse_spectra.errors import FundamentalSystemDegenerate, LatticeIndexError, WindowError
from impulse_spectra.lattice import ComplexSeq, ImpulseParams, LatticeWindow, PotentialSpec
from impulse_spectra.recurrence import (
    CoefficientSeq,
    IvpSpec,
    equation_residuals,
    particular_solution,
    random_system,
    solve_ivp,
    wronskian,
    wronskian_profile,
)


def _junction_error(y, imp):
    scale = max(abs(y[n]) for n in (-1, 0, 1, 2))
    return max(abs(y[-1] - imp.d1 * y[1]), abs((y[0] - y[-1]) - imp.d2 * (y[2] - y[1]))) / scale


@pytest.mark.parametrize("n0", [-7, -2, -1, 0, 1, 2, 6])
def test_solution_satisfies_equation_and_junction(n0):
    rng = np.random.default_rng(n0 + 100)
    w = LatticeWindow(-7, 8)
    p = rng.uniform(-1, 1, w.n_sites) + 1j * rng.uniform(-1, 1, w.n_sites)
    coeff = CoefficientSeq(w, p)
    imp = ImpulseParams(0.0, 1.3 - 0.2j, 0.7 + 0.5j)
    y = solve_ivp(IvpSpec(n0, 1.0 + 0.5j, -0.3j), coeff, imp, w)
    assert y[n0] == 1.0 + 0.5j
    assert abs((y[n0 + 1] - y[n0]) - (-0.3j)) < 1e-15
    assert max(equation_residuals(y, coeff).values()) < 1e-14
    assert _junction_error(y, imp) < 1e-14


def test_seed_outside_window_rejected():
    w = LatticeWindow(-3, 4)
    coeff = CoefficientSeq.spectral(PotentialSpec.constant(2), w)
    with pytest.raises(LatticeIndexError):
        solve_ivp(IvpSpec(w.hi, 1, 0), coeff, ImpulseParams.standard(0), w)


def test_coefficients_must_match_window():
    w = LatticeWindow(-3, 4)
    coeff = CoefficientSeq.spectral(PotentialSpec.constant(2), LatticeWindow(-2, 4))
    with pytest.raises(WindowError):
        solve_ivp(IvpSpec(1, 1, 0), coeff, ImpulseParams.standard(0), w)


def test_constant_coefficients_follow_characteristic_root():
    # delta = 0, q = 2: theta_3 = 3, theta_4 = 11 from y_{n+1} = 4 y_n - y_{n-1}
    w = LatticeWindow(-5, 6)
    coeff = CoefficientSeq.spectral(PotentialSpec.constant(2), w)
    th = solve_ivp(IvpSpec(1, 1, 0), coeff, ImpulseParams.standard(0), w)
    assert [th[n].real for n in (1, 2, 3, 4)] == [1, 1, 3, 11]


def test_scaled_propagation_over_huge_growth():
    # q = 10 grows like 11.9^n; 700 steps leave the double range by far
    w = LatticeWindow(-700, 701)
    coeff = CoefficientSeq.spectral(PotentialSpec.constant(10), w)
    imp = ImpulseParams.standard(0.4)
    y = solve_ivp(IvpSpec(1, 1, 0), coeff, imp, w)
    assert y.is_scaled
    m, e = y.scaled(701)
    assert e > 1024 and 0 < abs(m) < 1e101
    z = solve_ivp(IvpSpec(1, 1, -1), coeff, imp, w)
    prof = wronskian_profile(y, z, imp)
    assert prof.jump_error() < 1e-12
    assert prof.max_deviation <= 1e-9 * prof.scale
    # near the puncture the terms are O(1) and W(phi, theta) = 1 exactly
    assert abs(wronskian(z, y, 3) - 1.0) < 1e-12


def test_wronskian_profile_of_base_pair():
    w = LatticeWindow(-6, 7)
    for delta in (0.0, 0.5):
        coeff = CoefficientSeq.spectral(PotentialSpec.constant(2), w)
        imp = ImpulseParams.standard(delta)
        phi = solve_ivp(IvpSpec(1, 1, -1), coeff, imp, w)
        theta = solve_ivp(IvpSpec(1, 1, 0), coeff, imp, w)
        prof = wronskian_profile(phi, theta, imp)
        e = cmath.exp(2j * delta)
        assert abs(prof.omega_plus - 1) < 1e-14
        assert abs(prof.omega_minus - e) < 1e-12
        assert abs(prof.w0 + e) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_wronskian_jump_relations_random(seed):
    rng = np.random.default_rng(seed)
    w, coeff, imp = random_system(rng, 20)
    y = solve_ivp(IvpSpec(int(rng.integers(w.lo, w.hi)), 1.0, 0.5j), coeff, imp, w)
    z = solve_ivp(IvpSpec(int(rng.integers(w.lo, w.hi)), -0.2, 1.0), coeff, imp, w)
    prof = wronskian_profile(y, z, imp)
    assert prof.max_deviation <= 1e-9 * prof.scale
    assert prof.jump_error() <= 1e-9
    assert prof.w0_error() <= 1e-9


def test_particular_solution_solves_nonhomogeneous_problem():
    rng = np.random.default_rng(3)
    w, coeff, imp = random_system(rng, 10)
    u = solve_ivp(IvpSpec(1, 1, 0), coeff, imp, w)
    v = solve_ivp(IvpSpec(1, 0, 1), coeff, imp, w)
    h = ComplexSeq.from_sites(w, rng.normal(size=w.n_sites) + 1j * rng.normal(size=w.n_sites))
    x = particular_solution(h, u, v, coeff)
    assert all(x[n] == 0 for n in (-1, 0, 1, 2))
    res = equation_residuals(x, coeff, h)
    assert max(res.values()) < 1e-12


def test_particular_solution_rejects_dependent_pair():
    w = LatticeWindow(-4, 5)
    coeff = CoefficientSeq.spectral(PotentialSpec.constant(2), w)
    imp = ImpulseParams.standard(0.2)
    u = solve_ivp(IvpSpec(1, 1, 0), coeff, imp, w)
    h = ComplexSeq.indicator(w, 3)
    with pytest.raises(FundamentalSystemDegenerate):
        particular_solution(h, u, u.scale(2.0))


def test_spectral_coefficients():
    w = LatticeWindow(-2, 3)
    c = CoefficientSeq.spectral(PotentialSpec.constant(2), w, lam=1.0, delta=math.pi / 4)
    assert abs(c.at(-1) - (2 - 1j)) < 1e-15
    assert abs(c.at(2) - (2 + 1j)) < 1e-15
    assert abs(c.p_tilde(3) - (4 + 1j)) < 1e-15
    with pytest.raises(LatticeIndexError):
        c.at(0)

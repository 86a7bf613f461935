from __future__ import annotations

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from impulse_spectra.errors import DecayViolation, NotASolution, WindowError
from impulse_spectra.lattice import ComplexSeq, ImpulseParams, LatticeWindow, PotentialSpec, inner_product, norm
from impulse_spectra.operators import (
    GreenOperator,
    apply_A,
    apply_L,
    apply_L_inverse,
    apply_M,
    bound_ratio,
    defect_scale,
    energy_identity_residual,
    energy_scale,
    green_kernel,
    hermiticity_defect_A,
    hermiticity_defect_L,
    verify_inverse,
    with_ghosts,
)
from impulse_spectra.weyl import constant_potential_root, limit_points

Q2 = PotentialSpec.constant(2.0)


def random_compact(rng, window, pad=1):
    v = rng.normal(size=window.n_sites) + 1j * rng.normal(size=window.n_sites)
    v[:pad] = 0
    v[len(v) - pad :] = 0
    return ComplexSeq.from_sites(window, v)


def dense_L(q, imp, window):
    return np.column_stack([apply_L(ComplexSeq.indicator(window, n), q, imp).site_values() for n in window.z0_sites])


def test_L_on_indicator_couples_across_junction():
    w = LatticeWindow(-4, 5)
    ly = apply_L(ComplexSeq.indicator(w, 2), Q2, ImpulseParams.standard(0.0))
    expect = {-1: -1.0, 2: 4.0, 3: -1.0}
    for n in w.z0_sites:
        assert ly[n] == expect.get(n, 0.0)


def test_L_of_zero_is_zero():
    w = LatticeWindow(-3, 4)
    ly = apply_L(ComplexSeq.on_window(w), Q2, ImpulseParams.standard(0.7))
    assert not np.any(ly.values)


def test_ghosts_follow_junction_conditions():
    w = LatticeWindow(-3, 4)
    imp = ImpulseParams.standard(0.5)
    y = with_ghosts(ComplexSeq.from_mapping(w, {-1: 2.0, 2: 1j}), imp)
    e = cmath.exp(1j)
    assert y[1] == 2.0
    assert abs(y[0] - ((1 - e) * 2.0 + e * 1j)) < 1e-15


@pytest.mark.parametrize("delta", [0.0, 0.5])
def test_L_annihilates_minimal_solution(delta):
    w = LatticeWindow(-30, 31)
    pair = limit_points(Q2, delta, w)
    ly = apply_L(pair.psi, Q2, ImpulseParams.standard(delta))
    scale = float(np.max(np.abs(pair.psi.values)))
    for n in w.z0_sites:
        if w.a < n < w.b:
            assert abs(ly[n]) <= 1e-8 * scale


def test_M_examples():
    w = LatticeWindow(-4, 5)
    y = ComplexSeq.indicator(w, -3)
    assert abs(apply_M(y, math.pi / 6)[-3] - cmath.exp(1j * math.pi / 3)) < 1e-15
    rng = np.random.default_rng(1)
    z = random_compact(rng, w, pad=0)
    assert np.array_equal(apply_M(z, 0.0).values, z.values)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.5))
def test_M_is_unitary(seed, delta):
    rng = np.random.default_rng(seed)
    w = LatticeWindow(-6, 7)
    y = random_compact(rng, w, pad=0)
    my = apply_M(y, delta)
    assert abs(norm(my) - norm(y)) <= 1e-14 * norm(y)
    back = apply_M(my, delta, inverse=True)
    assert np.max(np.abs(back.values - y.values)) <= 1e-15 * np.max(np.abs(y.values))


def test_A_is_M_inverse_of_L():
    w = LatticeWindow(-3, 4)
    imp = ImpulseParams.standard(0.3)
    y = ComplexSeq.from_sites(w, [1, 2j, 3, -1, 0.5, 1j])
    ay = apply_A(y, Q2, imp)
    ly = apply_L(y, Q2, imp)
    for n in w.z0_sites:
        rho = cmath.exp(2j * 0.3) if n < 0 else cmath.exp(-2j * 0.3)
        assert abs(ay[n] * rho - ly[n]) < 1e-14


def test_defect_L_hand_example():
    delta = math.pi / 4
    imp = ImpulseParams.standard(delta)
    w = LatticeWindow(-4, 5)
    # y_{-1} = 1, Delta y_{-1} = e^{2i delta} (y_2 - 1) = i; z_{-1} = 1, Delta z_{-1} = 0
    y = ComplexSeq.from_mapping(w, {-1: 1.0, 2: 1 + 1j * cmath.exp(-2j * delta)})
    z = ComplexSeq.from_mapping(w, {-1: 1.0, 2: 1.0})
    d = hermiticity_defect_L(y, z, Q2, imp)
    expect = (cmath.exp(-2j * delta) - 1) * 1j
    assert abs(d.rhs - expect) < 1e-15
    assert abs(d.lhs - d.rhs) <= 1e-10


@pytest.mark.parametrize("which", ["L", "A"])
def test_defects_vanish_at_zero_delta(which):
    rng = np.random.default_rng(5)
    w = LatticeWindow(-8, 9)
    imp = ImpulseParams.standard(0.0)
    q = PotentialSpec.power(1.0, 1.0)
    fn = hermiticity_defect_L if which == "L" else hermiticity_defect_A
    for _ in range(10):
        y, z = random_compact(rng, w), random_compact(rng, w)
        d = fn(y, z, q, imp)
        s = defect_scale(y, z, q, imp)
        assert abs(d.lhs) <= 1e-12 * s and abs(d.rhs) <= 1e-12 * s


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([math.pi / 6, math.pi / 4, 1.2]))
def test_defect_identities_random(seed, delta):
    rng = np.random.default_rng(seed)
    w = LatticeWindow(-7, 8)
    imp = ImpulseParams.standard(delta)
    q = PotentialSpec.power(0.5, 2.0)
    y, z = random_compact(rng, w), random_compact(rng, w)
    s = defect_scale(y, z, q, imp)
    for fn in (hermiticity_defect_L, hermiticity_defect_A):
        d = fn(y, z, q, imp)
        assert abs(d.lhs - d.rhs) <= 1e-9 * s


def test_defect_L_nonzero_for_real_y_when_delta_positive():
    w = LatticeWindow(-4, 5)
    imp = ImpulseParams.standard(0.4)
    y = ComplexSeq.from_mapping(w, {-2: 0.5, -1: 1.0, 2: 2.0, 3: 1.0})
    d = hermiticity_defect_L(y, y, Q2, imp)
    assert abs(d.lhs) > 1e-3
    assert abs(d.lhs - d.rhs) < 1e-12


def test_defect_A_split_for_equal_arguments():
    delta = 0.5
    w = LatticeWindow(-5, 6)
    imp = ImpulseParams.standard(delta)
    y = random_compact(np.random.default_rng(2), w)
    d = hermiticity_defect_A(y, y, Q2, imp)
    # the energy sums are real, so they carry the imaginary part together
    # with the imaginary part of the junction terms
    yg = with_ghosts(y, imp)
    dy = yg[0] - yg[-1]
    e = cmath.exp(2j * delta)
    junction = (1 - e.conjugate()) * dy * yg[-1].conjugate() - (1 - e) * yg[-1] * dy.conjugate()
    energies = d.rhs - junction
    assert abs(energies.real) < 1e-12
    assert abs(d.lhs.real - junction.real) < 1e-12
    assert abs(d.lhs.imag - (junction + energies).imag) < 1e-12


def test_defect_requires_decay():
    w = LatticeWindow(-4, 5)
    imp = ImpulseParams.standard(0.2)
    y = ComplexSeq.from_mapping(w, {-4: 1.0, 2: 1.0})
    z = ComplexSeq.from_mapping(w, {2: 1.0})
    with pytest.raises(DecayViolation):
        hermiticity_defect_L(y, z, Q2, imp)
    with pytest.raises(DecayViolation):
        hermiticity_defect_A(z, y, Q2, imp)


# Green operator --------------------------------------------------------------


def green(q, delta, window):
    return GreenOperator.from_weyl(limit_points(q, delta, window), q)


def test_green_wronskians_match_direct_values():
    g = green(Q2, 0.6, LatticeWindow(-20, 21))
    assert g.check() <= 1e-8
    wk = g.wronskian_by_index()
    assert wk[-5] == g.w_left and wk[0] == -g.w_left and wk[3] == g.w_right
    assert abs(g.w_left - g.w_right * cmath.exp(1.2j)) < 1e-15


def test_green_kernel_branches_and_decay():
    g = green(Q2, 0.0, LatticeWindow(-30, 31))
    for k in (-5, 2, 7):
        assert green_kernel(g, k, k) == g.chi[k] * g.psi[k] / g.wronskian_at(k)
        for n in (-8, 3, 9):
            lo, hi = min(n, k), max(n, k)
            assert abs(green_kernel(g, n, k) * g.wronskian_at(k) - g.psi[hi] * g.chi[lo]) < 1e-15
    r = constant_potential_root(2.0)
    for n in range(6, 14):
        assert abs(green_kernel(g, n + 1, 4) / green_kernel(g, n, 4) - r) < 1e-8


def test_inverse_of_unit_vector_is_kernel_column():
    w = LatticeWindow(-15, 16)
    g = green(Q2, 0.4, w)
    for k0 in (-3, 2, 9):
        x = apply_L_inverse(g, ComplexSeq.indicator(w, k0))
        for n in w.z0_sites:
            assert abs(x[n] - green_kernel(g, n, k0)) <= 1e-14


def test_inverse_of_zero_is_zero():
    w = LatticeWindow(-10, 11)
    g = green(Q2, 0.4, w)
    x = apply_L_inverse(g, ComplexSeq.on_window(w))
    assert not np.any(x.values)


@pytest.mark.parametrize("delta", [0.0, math.pi / 6, math.pi / 4, math.pi / 3 - 0.1])
@pytest.mark.parametrize("c", [0.5, 1.0, 2.0, 10.0])
def test_inverse_residual_and_norm_bound(delta, c):
    q = PotentialSpec.constant(c)
    w = LatticeWindow(-40, 41) if c >= 1 else LatticeWindow(-60, 61)
    g = green(q, delta, w)
    rng = np.random.default_rng(int(100 * c + 10 * delta))
    for _ in range(8):
        f = random_compact(rng, w, pad=0)
        x = apply_L_inverse(g, f, verify=False)
        diag = verify_inverse(g, f, x)
        assert diag["residual"] <= 1e-8
        assert bound_ratio(g, f, x) <= 1 + 1e-9


def test_inverse_matches_dense_solve():
    delta = math.pi / 4
    w = LatticeWindow(-30, 31)
    imp = ImpulseParams.standard(delta)
    g = green(Q2, delta, w)
    mat = dense_L(Q2, imp, w)
    rng = np.random.default_rng(11)
    cut = w.n_sites // 10
    for _ in range(10):
        f = random_compact(rng, w, pad=0)
        x = apply_L_inverse(g, f)
        xd = np.linalg.solve(mat, f.site_values())
        diff = np.abs(xd - x.site_values())[cut:-cut]
        assert diff.max() <= 1e-7 * norm(f)
        assert norm(x) <= norm(f) / math.sqrt(2) + 1e-9


def test_smallest_singular_value_floor():
    for delta, c in ((0.0, 0.5), (math.pi / 4, 2.0), (1.0, 10.0)):
        w = LatticeWindow(-20, 21)
        mat = dense_L(PotentialSpec.constant(c), ImpulseParams.standard(delta), w)
        assert np.linalg.svd(mat, compute_uv=False).min() >= c * math.cos(delta) - 1e-9


def test_verify_inverse_rejects_wrong_answer():
    w = LatticeWindow(-10, 11)
    g = green(Q2, 0.3, w)
    f = ComplexSeq.indicator(w, 3)
    x = apply_L_inverse(g, f)
    bad = x.replace({4: x[4] + 1e-3})
    with pytest.raises(NotASolution) as err:
        verify_inverse(g, f, bad)
    assert err.value.worst_site in (3, 4, 5)


def test_inverse_requires_matching_window():
    g = green(Q2, 0.3, LatticeWindow(-10, 11))
    with pytest.raises(WindowError):
        apply_L_inverse(g, ComplexSeq.indicator(LatticeWindow(-9, 11), 3))


# energy identities ------------------------------------------------------------


def test_energy_identities_of_minimal_solution():
    delta = 0.5
    w = LatticeWindow(-30, 31)
    imp = ImpulseParams.standard(delta)
    pair = limit_points(Q2, delta, w)
    y = with_ghosts(pair.psi, imp)
    f = ComplexSeq.on_window(w)
    res = energy_identity_residual(y, f, Q2, imp, -10, 10)
    s = energy_scale(y, f, Q2, -10, 10)
    assert max(abs(r) for r in res) <= 1e-9 * s


def test_energy_identities_of_zero():
    w = LatticeWindow(-4, 5)
    z = ComplexSeq.on_window(w)
    res = energy_identity_residual(z, z, Q2, ImpulseParams.standard(0.3), -4, 5)
    assert res == (0, 0, 0)


@pytest.mark.parametrize("delta", [0.0, 0.7])
def test_energy_identities_of_green_solution(delta):
    w = LatticeWindow(-25, 26)
    q = PotentialSpec.power(1.0, 1.0)
    imp = ImpulseParams.standard(delta)
    g = green(q, delta, w)
    rng = np.random.default_rng(4)
    for _ in range(5):
        f = random_compact(rng, w, pad=0)
        x = apply_L_inverse(g, f)
        res = energy_identity_residual(x, f, q, imp, w.a, w.b)
        assert max(abs(r) for r in res) <= 1e-8 * energy_scale(x, f, q, w.a, w.b)


def test_energy_identities_reject_non_solution():
    w = LatticeWindow(-6, 7)
    imp = ImpulseParams.standard(0.3)
    y = with_ghosts(ComplexSeq.from_mapping(w, {-1: 1.0, 2: 1.0, 3: 0.5}), imp)
    with pytest.raises(NotASolution):
        energy_identity_residual(y, ComplexSeq.on_window(w), Q2, imp, w.a, w.b)
    with pytest.raises(ValueError):
        energy_identity_residual(y, y, Q2, ImpulseParams(0.3, 2.0, 1.0), w.a, w.b)


def test_inner_product_is_conjugate_linear_in_second_slot():
    w = LatticeWindow(-2, 3)
    y = ComplexSeq.from_sites(w, [1, 0, 0, 0])
    z = ComplexSeq.from_sites(w, [1j, 0, 0, 0])
    assert inner_product(y, z) == -1j

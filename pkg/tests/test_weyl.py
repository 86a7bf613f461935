from __future__ import annotations

import cmath
import math

import pytest

from impulse_spectra.errors import LatticeIndexError, WindowError, WindowTooSmall
from impulse_spectra.lattice import LatticeWindow, PotentialSpec
from impulse_spectra.recurrence import wronskian, wronskian_terms_scale
from impulse_spectra.weyl import (
    backward_disk,
    base_solutions,
    constant_potential_root,
    disk_ladder,
    energy_inequality,
    exact_base_wronskian,
    forward_disk,
    limit_points,
    minimal_solution_oracle,
    wronskian_mismatch,
)

Q2 = PotentialSpec.constant(2.0)
POTENTIALS = [
    PotentialSpec.constant(2.0),
    PotentialSpec.constant(0.7),
    PotentialSpec.power(1.0, 1.0),
    PotentialSpec.power(0.5, 2.0),
    PotentialSpec.explicit({n: 1.5 + 0.5 * math.sin(n) for n in range(-40, 42)}, c=1.0),
]


def closed_form(c: float, delta: float) -> tuple[complex, complex]:
    r = constant_potential_root(c)
    v = r / (1 - r)
    return complex(v), -1 - cmath.exp(2j * delta) * r / (1 - r)


@pytest.mark.parametrize("delta", [0.0, 0.4, 1.3])
def test_base_solutions_seed_values(delta):
    phi, theta = base_solutions(Q2, delta, LatticeWindow(-5, 6))
    assert phi[1] == 1 and phi[2] == 0
    assert theta[1] == 1 and theta[2] == 1
    assert theta[-1] == 1 and theta[0] == 1
    assert abs(phi[0] - (1 - cmath.exp(2j * delta))) < 1e-15
    assert abs(wronskian(phi, theta, 0) + cmath.exp(2j * delta)) < 1e-15


def test_base_solutions_hand_values():
    _, theta = base_solutions(Q2, 0.0, LatticeWindow(-5, 6))
    assert theta[3] == 3 and theta[4] == 11


@pytest.mark.parametrize("delta", [0.0, math.pi / 6, math.pi / 4, 1.4])
@pytest.mark.parametrize("q", POTENTIALS, ids=["c2", "c07", "lin", "quad", "table"])
def test_base_wronskian_exact_values(q, delta):
    phi, theta = base_solutions(q, delta, LatticeWindow(-12, 13))
    for n in range(phi.start, phi.stop):
        s = max(1.0, wronskian_terms_scale(phi, theta, n))
        assert abs(wronskian(phi, theta, n) - exact_base_wronskian(n, delta)) <= 1e-12 * s


def test_forward_disk_hand_radius():
    phi, theta = base_solutions(Q2, 0.0, LatticeWindow(-3, 4))
    d = forward_disk(2, phi, theta, 0.0, Q2)
    assert d.energy == 6.0
    assert abs(d.radius - 1 / 12) < 1e-16


def test_backward_disk_hand_radius():
    phi, theta = base_solutions(Q2, 0.0, LatticeWindow(-3, 4))
    d = backward_disk(-1, phi, theta, 0.0, Q2)
    assert d.energy == 2.0
    assert abs(d.radius - 1 / 4) < 1e-16


@pytest.mark.parametrize("delta", [0.0, 0.6, 1.2])
def test_disk_boundary_points_have_imaginary_boundary_ratio(delta):
    # points on C_b make Re(e^{i delta} Delta y_b conj(y_{b+1})) vanish; K_a mirrors it
    phi, theta = base_solutions(Q2, delta, LatticeWindow(-6, 7))
    for b in (2, 3, 5):
        d = forward_disk(b, phi, theta, delta, Q2)
        for t in (0.1, 1.7, 4.0):
            v = d.center + d.radius * cmath.exp(1j * t)
            y = [phi[n] + v * theta[n] for n in (b, b + 1)]
            s = max(abs(phi[n]) + abs(v * theta[n]) for n in (b, b + 1))
            val = cmath.exp(1j * delta) * (y[1] - y[0]) * y[1].conjugate()
            assert abs(val.real) <= 1e-13 * s**2
    for a in (-1, -2, -4):
        d = backward_disk(a, phi, theta, delta, Q2)
        for t in (0.1, 1.7, 4.0):
            u = d.center + d.radius * cmath.exp(1j * t)
            y = [phi[n] + u * theta[n] for n in (a - 1, a)]
            s = max(abs(phi[n]) + abs(u * theta[n]) for n in (a - 1, a))
            val = cmath.exp(-1j * delta) * (y[1] - y[0]) * y[1].conjugate()
            assert abs(val.real) <= 1e-13 * s**2


def test_disk_argument_checks():
    phi, theta = base_solutions(Q2, 0.0, LatticeWindow(-3, 4))
    with pytest.raises(WindowError):
        forward_disk(1, phi, theta, 0.0, Q2)
    with pytest.raises(WindowError):
        backward_disk(0, phi, theta, 0.0, Q2)
    with pytest.raises(LatticeIndexError):
        forward_disk(5, phi, theta, 0.0, Q2)


@pytest.mark.parametrize("q", POTENTIALS, ids=["c2", "c07", "lin", "quad", "table"])
@pytest.mark.parametrize("delta", [0.0, 0.7, 1.4])
def test_disks_nest_and_shrink(q, delta):
    phi, theta = base_solutions(q, delta, LatticeWindow(-40, 41))
    for side, idx in (("forward", range(2, 42)), ("backward", range(-1, -41, -1))):
        disks, skipped = disk_ladder(side, phi, theta, delta, q, idx)
        assert not skipped
        for i, d0 in enumerate(disks):
            assert d0.radius > 0
            for d1 in disks[i + 1 : i + 4]:
                assert d1.radius < d0.radius
                assert d0.contains(d1, 1e-10)


def test_ladder_stops_at_overflow_safe_depth():
    q = PotentialSpec.constant(50.0)
    w = LatticeWindow(-200, 200)
    phi, theta = base_solutions(q, 0.0, w)
    disks, _ = disk_ladder("forward", phi, theta, 0.0, q, range(2, w.b + 1))
    assert 2 < len(disks) < w.b - 1
    assert disks[-1].radius > 0


@pytest.mark.parametrize("c,delta", [(2.0, 0.0), (2.0, 0.5), (10.0, 1.2), (0.5, 0.3), (1.0, math.pi / 4)])
def test_limit_points_match_constant_potential_closed_form(c, delta):
    q = PotentialSpec.constant(c)
    pair = limit_points(q, delta, LatticeWindow(-60, 61))
    v, u = closed_form(c, delta)
    assert abs(pair.v_hat - v) <= pair.v_enclosure + 1e-12
    assert abs(pair.u_hat - u) <= pair.u_enclosure + 1e-12
    em = cmath.exp(-1j * delta)
    assert (pair.v_hat * em).real > 0
    assert (pair.u_hat * em).real < 0


def test_psi_ratio_approaches_root():
    pair = limit_points(Q2, 0.0, LatticeWindow(-30, 31))
    r = 2 - math.sqrt(3)
    assert abs(pair.v_hat.imag) < 1e-15 and pair.v_hat.real > 0
    # the truncated solutions feel the window edge at relative size r^(2 (b - n))
    for n in range(2, 16):
        assert abs(pair.psi[n + 1] / pair.psi[n] - r) < 1e-8
        assert abs(pair.chi[-n - 1] / pair.chi[-n] - r) < 1e-8


@pytest.mark.parametrize("q", POTENTIALS, ids=["c2", "c07", "lin", "quad", "table"])
@pytest.mark.parametrize("delta", [0.0, 0.9])
def test_limit_point_invariants(q, delta):
    pair = limit_points(q, delta, LatticeWindow(-40, 41))
    assert pair.v_hat != pair.u_hat
    assert wronskian_mismatch(pair) <= 1e-8 * abs(pair.u_hat - pair.v_hat)
    assert abs(pair.v_hat - pair.v_hat_alt) <= pair.v_enclosure + 1e-9
    assert abs(pair.u_hat - pair.u_hat_alt) <= pair.u_enclosure + 1e-9
    for side in ("forward", "backward"):
        assert energy_inequality(pair, q, side).holds
    # psi, chi are the stated combinations where no cancellation occurs
    for n in (1, 2):
        assert abs(pair.psi[n] - (pair.phi[n] + pair.v_hat * pair.theta[n])) < 1e-14
    for n in (-1, 0):
        assert abs(pair.chi[n] - (pair.phi[n] + pair.u_hat * pair.theta[n])) < 1e-14


def test_psi_tail_sums_decay_geometrically():
    pair = limit_points(Q2, 0.0, LatticeWindow(-30, 31))
    r = constant_potential_root(2.0)
    b = 31
    tails = [math.fsum(abs(pair.psi[n]) ** 2 for n in range(n1, b + 1)) for n1 in range(1, 20)]
    for t0, t1 in zip(tails, tails[1:]):
        assert t1 / t0 <= r**2 + 0.05


def test_window_too_small_reports_requirement():
    q = PotentialSpec.constant(0.5)
    with pytest.raises(WindowTooSmall) as err:
        limit_points(q, 0.0, LatticeWindow(-6, 7), tol=1e-8)
    assert err.value.required_b is not None or err.value.required_a is not None
    need = err.value.required_b
    if need is not None:
        pair = limit_points(q, 0.0, LatticeWindow(-need - 2, need + 2), tol=1e-8)
        assert pair.v_enclosure <= 2e-8


def test_oracle_alone_matches_closed_form():
    res = minimal_solution_oracle(Q2, 0.0, LatticeWindow(-30, 31))
    v, u = closed_form(2.0, 0.0)
    assert abs(res.v_hat_alt - v) < 1e-13
    assert abs(res.u_hat_alt - u) < 1e-13
    r = constant_potential_root(2.0)
    assert abs(res.psi_alt[11] / res.psi_alt[10] - r) < 1e-12

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import TrigOracle, p0_oracle
from slsampling.problem import PotentialSpec, reference_problem, validate
from slsampling.shooting import (IntegrationError, ShotState, central_difference,
                                 integrate_segment, omega, omega_chain, omega_derivative,
                                 omega_rescaled, proportionality, shoot_left, shoot_right,
                                 transmission_residuals, boundary_residuals, wronskian,
                                 wronskian_on_grid)

# a problem with every constant generic and a nonzero potential
P1 = reference_problem(c2=2.5, b=3.5, beta1=1.0, delta=1.5, gamma=-0.7, alpha1=2.0,
                       alpha2=0.5, alpha1p=1.0, alpha2p=-1.0,
                       q=PotentialSpec.polynomial([0.5, 1.0]))


def test_integrate_segment_constant_solution(p0):
    rec = integrate_segment(p0, 0.0, ShotState(1.0, 0.0, 0.0), 1.0)
    assert rec.last.u == pytest.approx(1.0, abs=1e-14)
    assert rec.last.up == pytest.approx(0.0, abs=1e-14)
    assert rec.x.size >= 64


def test_integrate_segment_cosine(p0):
    rec = integrate_segment(p0, math.pi ** 2, ShotState(1.0, 0.0, 0.0), 1.0)
    assert rec.last.u == pytest.approx(-1.0, abs=1e-9)
    assert rec.last.up == pytest.approx(0.0, abs=1e-8)


def test_integrate_segment_hyperbolic():
    p = validate(reference_problem(q=PotentialSpec.polynomial([1.0])))
    rec = integrate_segment(p, 0.0, ShotState(0.0, 1.0, 0.0), 1.0)
    assert rec.last.u == pytest.approx(math.sinh(1.0), rel=1e-9)
    assert rec.last.up == pytest.approx(math.cosh(1.0), rel=1e-9)


def test_integrate_segment_backward_is_stored_forward(p0):
    rec = integrate_segment(p0, 4.0, ShotState(1.0, 0.0, 3.0), 2.0)
    assert np.all(np.diff(rec.x) > 0)
    assert rec.x[0] == 2.0 and rec.x[-1] == 3.0
    assert rec.last.u == 1.0
    assert rec.first.u == pytest.approx(math.cos(2.0), abs=1e-9)


def test_integrate_segment_rejects_crossing_an_interface(p0):
    with pytest.raises(ValueError):
        integrate_segment(p0, 1.0, ShotState(1.0, 0.0, 0.5), 1.5)


def test_integrate_segment_reports_lambda_on_failure(p0):
    with pytest.raises(IntegrationError) as exc:
        integrate_segment(p0, 1e30, ShotState(1.0, 0.0, 0.0), 1.0, tol=1e-14, atol=1e-300)
    assert exc.value.lam == 1e30


def test_shoot_left_at_zero_is_constant(p0):
    phi = shoot_left(p0, 0.0)
    for seg in phi.segments:
        assert np.allclose(seg.u, 1.0, atol=1e-13)
        assert np.allclose(seg.up, 0.0, atol=1e-13)


def test_shoot_left_second_segment_at_one(p0):
    phi = shoot_left(p0, 1.0)
    x = phi.segment(2).x
    expected = math.cos(1) * np.cos(x - 1) + (math.cos(1) - math.sin(1)) * np.sin(x - 1)
    assert np.max(np.abs(phi.segment(2).u - expected)) < 1e-9
    assert phi.c1_plus.u == pytest.approx(math.cos(1), abs=1e-10)
    assert phi.c1_plus.up == pytest.approx(math.cos(1) - math.sin(1), abs=1e-10)


def test_shoot_right_at_zero_is_linear(p0):
    chi = shoot_right(p0, 0.0)
    seg = chi.segment(3)
    assert np.max(np.abs(seg.u - (3 - seg.x))) < 1e-12
    assert chi.at_b.u == 0.0 and chi.at_b.up == -1.0


@pytest.mark.parametrize("lam", [-7.3, 0.0, 1.0, 12.5, 333.0])
def test_boundary_and_transmission_residuals(lam):
    p = validate(P1)
    phi, chi = shoot_left(p, lam), shoot_right(p, lam)
    for sol in (phi, chi):
        scale = 1 + max(max(abs(s.u).max(), abs(s.up).max()) for s in sol.segments) * (1 + abs(lam))
        assert max(abs(r) for r in transmission_residuals(sol, p)) <= 1e-10 * scale
    assert boundary_residuals(phi, p)[0] == 0.0
    b2 = boundary_residuals(chi, p)[1]
    assert abs(b2) <= 1e-12 * (1 + abs(lam)) * (1 + chi.max_abs())


def test_wronskian_of_solution_with_itself_vanishes(p0):
    phi = shoot_left(p0, 3.0)
    x = np.linspace(0.1, 2.9, 15)
    assert np.max(np.abs([wronskian(phi, phi, xi) for xi in x])) < 1e-14


def test_wronskian_mismatched_lambda(p0):
    with pytest.raises(ValueError, match="different lam"):
        wronskian(shoot_left(p0, 1.0), shoot_right(p0, 2.0), 0.5)


def test_wronskian_on_first_segment_equals_value_at_a(p0):
    phi, chi = shoot_left(p0, 1.0), shoot_right(p0, 1.0)
    at_a = p0.beta2 * chi.at_a.up + p0.beta1 * chi.at_a.u
    W = wronskian_on_grid(phi, chi, 1)
    assert np.max(np.abs(W - at_a)) <= 1e-9 * (1 + abs(at_a))


@pytest.mark.parametrize("lam", [-3.0, 1.0, 40.0, 250.0])
def test_wronskian_constant_per_segment(lam):
    p = validate(P1)
    phi, chi = shoot_left(p, lam), shoot_right(p, lam)
    for i in (1, 2, 3):
        W = wronskian_on_grid(phi, chi, i)
        assert np.max(np.abs(W - W[0])) <= 1e-9 * (1 + abs(W[0]))


def test_omega_at_zero_and_against_oracle(p0):
    assert omega(p0, 0.0) == pytest.approx(-1.0, abs=1e-12)
    O = p0_oracle()
    # frozen oracle values
    for lam, ref in [(-10.0, -72351.55853742977), (1.0, 0.12113633734819973),
                     (50.0, 5946.752090490879), (400.0, 401724.24081404385)]:
        assert O.omega_real(lam) == pytest.approx(ref, rel=1e-13)
        assert abs(omega(p0, lam) - ref) <= 1e-8 * (1 + abs(ref))


def test_omega_oracle_generic_constants():
    spec = reference_problem(c2=2.5, b=3.5, beta1=1.0, delta=1.5, gamma=-0.7, alpha1=2.0,
                             alpha2=0.5, alpha1p=1.0, alpha2p=-1.0)
    p = validate(spec)
    O = TrigOracle.of(p)
    for lam in np.linspace(-10, 400, 23):
        ref = O.omega_real(lam)
        assert abs(omega(p, lam) - ref) <= 1e-8 * (1 + abs(ref))


@settings(max_examples=20, deadline=None)
@given(st.floats(-50.0, 2000.0))
def test_omega_chain(lam):
    # the chain error scales with rtol; 1e-10 leaves ~1e-9 at lam ~ 1e3
    p = validate(P1)
    w1, w2, w3 = omega_chain(p, lam, 1e-12, 1e-14)
    assert abs(w1 - w2) <= 1e-9 * (1 + abs(w1))
    assert abs(w1 - w3) <= 1e-9 * (1 + abs(w1))
    assert abs(w1 - omega(p, lam, 1e-12, 1e-14)) <= 1e-8 * (1 + abs(w1))


def test_omega_growth_bound(p0):
    # |omega(s^2)| <= C s^5 on the real axis
    vals = [abs(omega(p0, s * s)) / s ** 5 for s in (20.0, 40.0, 80.0)]
    assert max(vals) < 10.0


def test_omega_rescaled_keeps_sign_for_large_negative(p0):
    w, ls = omega_rescaled(p0, -1e6)
    assert ls > 700
    assert math.isinf(omega(p0, -1e6))
    assert np.sign(w) == np.sign(p0_oracle().omega_real(-400.0))


def test_omega_derivative_against_complex_step(p0):
    O = p0_oracle()
    assert O.omega_prime(0.0) == pytest.approx(1.5, rel=1e-14)
    assert omega_derivative(p0, 0.0) == pytest.approx(1.5, rel=1e-6)
    for lam in (-4.936719732317599, 0.904600536695445, 59.9162650285688, 900.0):
        assert omega_derivative(p0, lam) == pytest.approx(O.omega_prime(lam), rel=1e-6)


def test_central_difference_exact_on_quadratics():
    f = lambda x: 3.0 * x * x - 2.0 * x + 7.0
    assert central_difference(f, 1.25, 0.125) == pytest.approx(5.5, abs=1e-13)


def test_omega_derivative_rejects_bad_step(p0):
    with pytest.raises(ValueError):
        omega_derivative(p0, 1.0, h=0.0)


def test_proportionality_at_eigenvalue(p0):
    lam = 6.4171501024718856
    mean, cov = proportionality(shoot_left(p0, lam), shoot_right(p0, lam))
    assert mean != 0.0
    assert cov <= 1e-6
    _, cov_off = proportionality(shoot_left(p0, lam + 0.5), shoot_right(p0, lam + 0.5))
    assert cov_off > 1e-2


def test_omega_scale_is_irrelevant_to_the_sampling_ratio(p0):
    # ratio omega(lam)/omega'(lam_n) is unchanged by a constant factor in omega
    lam, ln = 3.0, 6.4171501024718856
    r1 = omega(p0, lam) / omega_derivative(p0, ln)
    c = 123.0
    r2 = (c * omega(p0, lam)) / (c * omega_derivative(p0, ln))
    assert r2 == pytest.approx(r1, rel=1e-15)

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nkesn import (
    STANDARD_START,
    CartPoleState,
    IntegrationError,
    PhysicsParams,
    SuccessDomain,
    derivatives,
    in_success_domain,
    mechanical_energy,
    rk4_step,
)
from oracles import lagrangian_derivatives, rk4_reference

angles = st.floats(-0.6, 0.6)
rates = st.floats(-3.0, 3.0)
states = st.builds(CartPoleState, st.floats(-2.4, 2.4), rates, angles, rates, angles, rates)
forces = st.floats(-10.0, 10.0)


@given(states, forces)
def test_derivatives_match_lagrangian_oracle(s, force):
    got = np.array(derivatives(s, force))
    want = lagrangian_derivatives(s, force)
    np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)


@given(states, forces)
def test_rk4_matches_reference_integrator(s, force):
    got = np.array(rk4_step(s, force))
    want = rk4_reference(lambda v: lagrangian_derivatives(v, force), s, 0.01)
    np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)


def test_gravity_tips_a_leaning_pole_further():
    rates_ = derivatives(CartPoleState(theta1=0.1), 0.0)
    assert rates_.theta1_dot > 0.0
    assert rates_.x_c_dot < 0.0  # reaction pushes the cart away from the lean


def test_positive_force_moves_cart_forward_and_tips_poles_back():
    rates_ = derivatives(CartPoleState(), 10.0)
    assert rates_.x_c_dot > 0.0
    assert rates_.theta1_dot < 0.0 and rates_.theta2_dot < 0.0


def test_upright_rest_is_an_equilibrium():
    assert rk4_step(CartPoleState(), 0.0) == CartPoleState()


def test_small_lean_grows_like_inverted_pendulum():
    # a very heavy cart barely moves, leaving theta'' = (3 g / 4 l) theta
    params = PhysicsParams(cart_mass=1e9, mu_cart=0.0, mu_pole=0.0)
    theta0 = 1e-6
    s = CartPoleState(theta1=theta0)
    for _ in range(50):
        s = rk4_step(s, 0.0, params)
    omega = math.sqrt(3.0 * 9.8 / (4.0 * 0.5))
    assert s.theta1 == pytest.approx(theta0 * math.cosh(omega * 0.5), rel=1e-6)


def test_rk4_error_shrinks_fourth_order():
    start = CartPoleState(0.0, 0.1, 0.05, -0.1, -0.02, 0.1)
    horizon = 0.2

    def run(dt):
        params = PhysicsParams(dt=dt)
        s = start
        for _ in range(int(round(horizon / dt))):
            s = rk4_step(s, 3.0, params)
        return np.array(s)

    reference = run(horizon / 3200)
    err_coarse = np.linalg.norm(run(0.01) - reference)
    err_fine = np.linalg.norm(run(0.005) - reference)
    assert 12.0 < err_coarse / err_fine < 20.0


def test_frictionless_energy_is_conserved():
    params = PhysicsParams(mu_cart=0.0, mu_pole=0.0)
    s = CartPoleState(0.0, 0.3, 0.2, -0.5, -0.1, 1.0)
    e0 = mechanical_energy(s, params)
    for _ in range(100):
        s = rk4_step(s, 0.0, params)
    assert abs(mechanical_energy(s, params) - e0) / abs(e0) < 1e-6


def test_friction_dissipates_energy():
    params = PhysicsParams(mu_cart=0.5, mu_pole=0.01)
    s = CartPoleState(0.0, 0.5, 0.05, 0.0, 0.0, 0.0)
    e0 = mechanical_energy(s, params)
    s = rk4_step(s, 0.0, params)
    assert mechanical_energy(s, params) < e0


@given(states, forces)
def test_mirror_image_evolves_as_mirror_image(s, force):
    mirrored = CartPoleState(*(-v for v in s))
    a = np.array(rk4_step(s, force))
    b = np.array(rk4_step(mirrored, -force))
    np.testing.assert_allclose(b, -a, rtol=1e-14, atol=1e-300)


def test_success_domain_bounds_are_inclusive():
    dom = SuccessDomain()
    assert in_success_domain(CartPoleState(x_c=2.4, theta1=dom.angle_limit, theta2=-dom.angle_limit))
    assert not in_success_domain(CartPoleState(x_c=-2.4000001))
    assert not in_success_domain(CartPoleState(theta2=math.radians(36.001)))
    assert in_success_domain(STANDARD_START)


def test_standard_start():
    assert STANDARD_START == CartPoleState(0.0, 0.0, math.radians(4.5), 0.0, 0.0, 0.0)


def test_non_finite_step_raises():
    with pytest.raises(IntegrationError):
        rk4_step(CartPoleState(theta1_dot=1e200), 0.0)


@pytest.mark.parametrize("field,value", [("cart_mass", 0.0), ("dt", -0.01), ("mu_cart", -1.0),
                                         ("pole1_length", float("nan"))])
def test_invalid_physics_rejected(field, value):
    with pytest.raises(ValueError, match=field):
        PhysicsParams(**{field: value})


def test_state_array_round_trip():
    s = CartPoleState(1, 2, 3, 4, 5, 6)
    assert CartPoleState.from_array(s.as_array()) == s


@pytest.mark.parametrize("start", [CartPoleState(0.1, 0.2, 0.15, -0.3, -0.05, 0.4),
                                   CartPoleState(0.0, -0.1, 0.05, -0.1, -0.02, 0.1)])
def test_step_halving_differences_shrink_sixteenfold(start):
    def advance(h, n):
        params = PhysicsParams(dt=h)
        s = start
        for _ in range(n):
            s = rk4_step(s, 2.0, params)
        return np.array(s)

    one, two, four = advance(0.01, 1), advance(0.005, 2), advance(0.0025, 4)
    ratio = np.linalg.norm(one - two) / np.linalg.norm(two - four)
    assert 14.0 < ratio < 18.0


def test_steps_are_bit_reproducible():
    s = CartPoleState(0.3, -0.2, 0.1, 0.05, -0.02, 0.3)
    assert rk4_step(s, 1.7) == rk4_step(s, 1.7)


@given(states, st.floats(0.0, 1.0), st.floats(0.0, 0.5))
def test_enlarging_the_domain_never_rejects(s, extra_x, extra_angle):
    small = SuccessDomain(1.0, 0.3)
    big = SuccessDomain(1.0 + extra_x, 0.3 + extra_angle)
    assert not in_success_domain(s, small) or in_success_domain(s, big)

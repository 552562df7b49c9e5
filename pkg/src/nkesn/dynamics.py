"""Cart with two hinged poles of different length (no-velocity benchmark).

Equations of motion follow Wieland's two-pole model: each pole is a uniform
rod hinged on the cart and the poles interact only through the cart.  Angles
are measured from vertical, positive toward +x; a positive force pushes the
cart toward +x.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels


class IntegrationError(ArithmeticError):
    """An integration step produced a non-finite state."""


class CartPoleState(NamedTuple):
    x_c: float = 0.0
    x_c_dot: float = 0.0
    theta1: float = 0.0
    theta1_dot: float = 0.0
    theta2: float = 0.0
    theta2_dot: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=np.float64)

    @classmethod
    def from_array(cls, arr) -> "CartPoleState":
        return cls(*(float(v) for v in arr))


@dataclass(frozen=True)
class PhysicsParams:
    """Physical constants; pole lengths are FULL lengths in metres."""

    cart_mass: float = 1.0
    pole1_mass: float = 0.1
    pole2_mass: float = 0.01
    pole1_length: float = 1.0
    pole2_length: float = 0.1
    mu_cart: float = 0.0005
    mu_pole: float = 0.000002
    gravity: float = 9.8
    dt: float = 0.01

    def __post_init__(self):
        for name in ("cart_mass", "pole1_mass", "pole2_mass", "pole1_length", "pole2_length",
                     "dt", "gravity"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        for name in ("mu_cart", "mu_pole"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be non-negative, got {value!r}")

    def kernel_vector(self) -> np.ndarray:
        # the equations of motion use half-lengths (pivot to centre of mass)
        return np.array([
            self.cart_mass, self.pole1_mass, self.pole2_mass,
            0.5 * self.pole1_length, 0.5 * self.pole2_length,
            self.mu_cart, self.mu_pole, self.gravity, self.dt,
        ], dtype=np.float64)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SuccessDomain:
    x_limit: float = 2.4
    angle_limit: float = math.radians(36.0)

    def to_dict(self) -> dict:
        return asdict(self)


def derivatives(state: CartPoleState, force: float, params: PhysicsParams = PhysicsParams()
                ) -> CartPoleState:
    """Time derivatives of ``state`` under a constant ``force`` (N).

    The result is packed in a ``CartPoleState`` whose fields hold the rates
    (x_c_dot, x_c_ddot, theta1_dot, theta1_ddot, theta2_dot, theta2_ddot).
    """
    return CartPoleState(*_kernels.derivs(*(float(v) for v in state), float(force),
                                          params.kernel_vector()))


def rk4_step(state: CartPoleState, force: float, params: PhysicsParams = PhysicsParams()
             ) -> CartPoleState:
    """Advance ``state`` by ``params.dt``.

    Raises:
        IntegrationError: if the successor state is not finite.
    """
    out = np.empty(6)
    if not _kernels.rk4(np.asarray(state, dtype=np.float64), float(force),
                        params.kernel_vector(), out):
        raise IntegrationError(f"non-finite state after RK4 step from {state}")
    return CartPoleState.from_array(out)


def in_success_domain(state: CartPoleState, domain: SuccessDomain = SuccessDomain()) -> bool:
    return bool(abs(state.x_c) <= domain.x_limit
                and abs(state.theta1) <= domain.angle_limit
                and abs(state.theta2) <= domain.angle_limit)


def mechanical_energy(state: CartPoleState, params: PhysicsParams = PhysicsParams()) -> float:
    """Kinetic plus potential energy (J) of cart and both rods.

    Each rod contributes translational energy of its centre of mass, rotational
    energy about it (I = m (2l)^2 / 12) and potential ``m g l cos(theta)``.
    """
    xd = state.x_c_dot
    energy = 0.5 * params.cart_mass * xd * xd
    for m, full, th, thd in ((params.pole1_mass, params.pole1_length, state.theta1, state.theta1_dot),
                             (params.pole2_mass, params.pole2_length, state.theta2, state.theta2_dot)):
        l = 0.5 * full
        energy += 0.5 * m * (xd * xd + 2.0 * xd * l * math.cos(th) * thd
                             + (4.0 / 3.0) * l * l * thd * thd)
        energy += m * params.gravity * l * math.cos(th)
    return energy


STANDARD_START = CartPoleState(theta1=math.radians(4.5))

#!/usr/bin/env python3
# %% [markdown]
# # The double-pole cart
#
# Two poles (1 m and 0.1 m) hinged on one cart.  With no force applied, the
# upright position is an unstable equilibrium: a 4.5 degree lean on the long
# pole grows until the system leaves the success domain.

# %%
import math

import numpy as np

from nkesn import (
    STANDARD_START,
    CartPoleState,
    PhysicsParams,
    in_success_domain,
    mechanical_energy,
    rk4_step,
)

# %% Passive fall from the training start state
s = STANDARD_START
t = 0
while in_success_domain(s):
    s = rk4_step(s, 0.0)
    t += 1
print(f"no force: left the success domain after {t} steps ({t * 0.01:.2f} s)")
print("final state:", np.round(s, 3))

# %% A constant push tips both poles backwards
s = CartPoleState()
for _ in range(20):
    s = rk4_step(s, 10.0)
print(f"after 0.2 s at +10 N: x_c={s.x_c:.3f} m, theta1={math.degrees(s.theta1):.2f} deg, "
      f"theta2={math.degrees(s.theta2):.2f} deg")

# %% Without friction, RK4 at dt = 0.01 holds mechanical energy nearly constant
frictionless = PhysicsParams(mu_cart=0.0, mu_pole=0.0)
s = CartPoleState(theta1=0.2, theta2_dot=1.0)
e0 = mechanical_energy(s, frictionless)
for _ in range(100):
    s = rk4_step(s, 0.0, frictionless)
print(f"relative energy drift over 1 s: {abs(mechanical_energy(s, frictionless) - e0) / e0:.2e}")

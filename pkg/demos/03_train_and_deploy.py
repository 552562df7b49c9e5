#!/usr/bin/env python3
# %% [markdown]
# # Neuron selection as an NK landscape
#
# A random echo state network gets N probe neurons, each wired to K+1 of the N
# outputs.  Scoring each output on every on/off pattern of its probes fills
# the landscape tables (N * 2**(K+1) episodes), the DP picks the selection
# vector, and the fitness-weighted ensemble of outputs drives the cart.

# %%
import numpy as np

from nkesn import (
    EpisodeCounter,
    NetworkConfig,
    build_landscape,
    build_network,
    ensemble_weights,
    generalization_test,
    solve_adjacent_dp,
    trajectory,
)
from nkesn.trainer import pattern_vector

# %% Build a network and its landscape
net = build_network(NetworkConfig(n_outputs=20, k=3, seed=0))
counter = EpisodeCounter()
build = build_landscape(net, counter=counter)
print(f"episodes spent: {counter.count}")
print("survival steps per output (rows) and probe pattern (columns):")
print(build.steps)

# %% The all-off pattern is the same passive fall for every output
print("all-off column:", build.steps[:, 0])

# %% Solve and deploy the ensemble
sol = solve_adjacent_dp(build.landscape)
w = ensemble_weights(build.landscape, sol.x)
print("x* =", sol.bitstring(), " f(x*) =", round(sol.value, 6))
print("ensemble weights:", np.round(w.array, 3))

# %% Score it on the 625 generalization starts
report = generalization_test(net, sol.bits, w)
print(f"generalization: {report.successes}/625 starts balanced for 1000 steps")

# %% Watch one episode of the best single controller
i, p = np.unravel_index(np.argmax(build.landscape.tables), build.landscape.tables.shape)
rows, fit = trajectory(net, pattern_vector(net.masks, i, p, 20), int(i))
print(f"best single output {i} pattern {p}: {fit.steps_survived} steps, f={fit.f:.4f}")
for row in rows[::10]:
    print(f"t={row.t:4d}  force={row.force:+7.3f}  x_c={row.state.x_c:+.3f}  "
          f"theta1={np.degrees(row.state.theta1):+7.2f} deg")

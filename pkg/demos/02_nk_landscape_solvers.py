#!/usr/bin/env python3
# %% [markdown]
# # Solving NK landscapes
#
# An NK landscape sums N lookup tables, each reading K+1 bits.  With the
# adjacent (wrapped) neighborhood, dynamic programming finds the global
# optimum; enumeration confirms it for small N, and hill climbing with
# restarts handles random neighborhoods.

# %%
import time

import numpy as np

from nkesn import (
    Neighborhood,
    evaluate,
    random_landscape,
    solve_adjacent_dp,
    solve_exhaustive,
    solve_local_search,
)

rng = np.random.default_rng(7)

# %% DP against enumeration on an adjacent landscape
land = random_landscape(20, 3, rng)
t0 = time.perf_counter()
dp = solve_adjacent_dp(land)
t1 = time.perf_counter()
ex = solve_exhaustive(land)
t2 = time.perf_counter()
print(f"DP          {dp.bitstring()}  f={dp.value:.6f}  ({1e3 * (t1 - t0):.1f} ms)")
print(f"enumeration {ex.bitstring()}  f={ex.value:.6f}  ({1e3 * (t2 - t1):.1f} ms)")
print("identical:", dp == ex)

# %% DP scales linearly in N
big = random_landscape(2000, 4, rng)
t0 = time.perf_counter()
sol = solve_adjacent_dp(big)
print(f"N=2000, K=4: f*={sol.value:.6f} in {time.perf_counter() - t0:.2f} s")

# %% Random neighborhoods: local search from many starts
rand = random_landscape(18, 3, rng, Neighborhood.RANDOM)
best = solve_exhaustive(rand)
for restarts in (1, 5, 25):
    ls = solve_local_search(rand, seed=0, restarts=restarts)
    print(f"{restarts:>3} restarts: f={ls.value:.6f}  gap to optimum {best.value - ls.value:.2e}")

# %% Every bit of the optimum matters: flipping any single bit cannot help
x = list(best.x)
gains = []
for q in range(rand.n):
    x[q] ^= 1
    gains.append(evaluate(rand, x) - best.value)
    x[q] ^= 1
print("largest single-flip gain at the optimum:", max(gains))

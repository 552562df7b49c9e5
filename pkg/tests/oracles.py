"""Independent reference implementations used only by the tests.

Nothing here imports the package's kernels; each oracle re-derives its result
from first principles so that agreement is meaningful.
"""

import itertools
import math

import numpy as np


def lagrangian_derivatives(state, force, cart_mass=1.0, masses=(0.1, 0.01),
                           full_lengths=(1.0, 0.1), mu_cart=0.0005, mu_pole=0.000002,
                           gravity=9.8):
    """Rates from the cart + two-rod Lagrangian, solved as a 3x3 linear system.

    Generalized coordinates (x, theta1, theta2); rods are uniform with the pivot
    at one end, so the centre of mass sits at half-length ``l`` and the
    inertia about the pivot is ``(4/3) m l^2``.
    """
    x, xd, t1, t1d, t2, t2d = (float(v) for v in state)
    thetas, rates = (t1, t2), (t1d, t2d)
    halves = [0.5 * L for L in full_lengths]
    sgn = (xd > 0) - (xd < 0)

    mass = np.zeros((3, 3))
    rhs = np.zeros(3)
    mass[0, 0] = cart_mass + sum(masses)
    rhs[0] = force - mu_cart * sgn
    for k, (m, l, th, thd) in enumerate(zip(masses, halves, thetas, rates), start=1):
        mass[0, k] = mass[k, 0] = m * l * math.cos(th)
        mass[k, k] = (4.0 / 3.0) * m * l * l
        rhs[0] += m * l * math.sin(th) * thd * thd
        rhs[k] = m * gravity * l * math.sin(th) - mu_pole * thd
    acc = np.linalg.solve(mass, rhs)
    return np.array([xd, acc[0], t1d, acc[1], t2d, acc[2]])


def rk4_reference(f, state, h):
    s = np.asarray(state, dtype=float)
    k1 = f(s)
    k2 = f(s + 0.5 * h * k1)
    k3 = f(s + 0.5 * h * k2)
    k4 = f(s + h * k3)
    return s + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def block_power_spectral_radius(matrix, block=8, iters=20000, seed=1):
    """Spectral radius by orthogonal (block power) iteration.

    A block of vectors is repeatedly multiplied and re-orthonormalized; the
    eigenvalues of the small projected matrix converge to the dominant ones,
    complex conjugate pairs included.
    """
    a = np.asarray(matrix, dtype=float)
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((a.shape[0], block)))
    prev = None
    for it in range(iters):
        q, _ = np.linalg.qr(a @ q)
        if it % 50 == 49:
            est = max(abs(np.linalg.eigvals(q.T @ a @ q)))
            if prev is not None and abs(est - prev) < 1e-14:
                return est
            prev = est
    return prev


def dense_network_run(net, inputs, bits):
    """Plain matrix-vector forward pass of the reservoir, probes and masked outputs."""
    cfg = net.config
    r = np.zeros(cfg.reservoir_size)
    n = cfg.n_outputs
    x = np.asarray(bits, dtype=float)
    w_full = np.zeros((n, n))
    for i, row in enumerate(net.masks.rows):
        for j, q in enumerate(row):
            w_full[i, q] = net.w_out[i, j]
    outs = []
    for u in inputs:
        r = np.tanh(net.w_in @ np.asarray(u) + net.w_res @ r + net.res_threshold)
        s = np.tanh(net.w_probe @ r + net.probe_threshold)
        outs.append(np.tanh(w_full @ (x * s)))
    return np.array(outs)


def nk_value(masks, tables, x):
    """NK objective by direct table lookup with the ascending-index bit order."""
    total = 0.0
    for i, row in enumerate(masks):
        idx = sum(int(x[q]) << j for j, q in enumerate(sorted(row)))
        total += tables[i][idx]
    return total / len(masks)


def brute_force_optimum(masks, tables):
    """(value, x) of the lexicographically smallest maximizer."""
    n = len(masks)
    best_val, best_x = -math.inf, None
    for x in itertools.product((0, 1), repeat=n):
        v = nk_value(masks, tables, x)
        if v > best_val:
            best_val, best_x = v, x
    return best_val, best_x


def generalization_grid():
    """The 625 start states built by explicit nested loops over percentages."""
    halfwidths = [2.14, 1.35, 3.6 * math.pi / 180.0, 8.6 * math.pi / 180.0]
    percents = [5, 25, 50, 75, 95]
    levels = [[lo + p / 100.0 * (hi - lo) for p in percents] for lo, hi in
              ((-h, h) for h in halfwidths)]
    grid = []
    for a in levels[0]:
        for b in levels[1]:
            for c in levels[2]:
                for d in levels[3]:
                    grid.append((a, b, c, d, 0.0, 0.0))
    return grid

"""Compiled inner loops shared by every public code path.

The Python-level API (``dynamics.rk4_step``, ``EchoNetwork.step``, the replay
dump) and the batched episode runner all call the functions below, so a single
step computed interactively is bit-identical to the same step inside a batch.
Nothing here uses fastmath; summation orders are fixed and documented inline.

Physics parameters travel as a float64 vector ``phys``::

    [cart_mass, m1, m2, half_len1, half_len2, mu_cart, mu_pole, gravity, dt]
"""

import math

import numpy as np
from numba import njit, prange

# Column order of a state vector.
X, X_DOT, TH1, TH1_DOT, TH2, TH2_DOT = range(6)

FORCE_SCALE = 10.0
STABLE_WINDOW = 100
STABLE_NUMERATOR = 0.75
STABLE_EPS = 1e-6


@njit(cache=True)
def sgn(v):
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


@njit(cache=True)
def derivs(x, xd, t1, t1d, t2, t2d, force, phys):
    cart_mass = phys[0]
    m1 = phys[1]
    m2 = phys[2]
    l1 = phys[3]
    l2 = phys[4]
    mu_c = phys[5]
    mu_p = phys[6]
    g = phys[7]

    s1 = math.sin(t1)
    c1 = math.cos(t1)
    s2 = math.sin(t2)
    c2 = math.cos(t2)
    fr1 = mu_p * t1d / (m1 * l1)
    fr2 = mu_p * t2d / (m2 * l2)

    # effective force and mass each pole exerts on the cart
    f1 = m1 * l1 * t1d * t1d * s1 + 0.75 * m1 * c1 * (fr1 - g * s1)
    f2 = m2 * l2 * t2d * t2d * s2 + 0.75 * m2 * c2 * (fr2 - g * s2)
    em1 = m1 * (1.0 - 0.75 * c1 * c1)
    em2 = m2 * (1.0 - 0.75 * c2 * c2)

    xdd = (force - mu_c * sgn(xd) + f1 + f2) / (cart_mass + em1 + em2)
    t1dd = -0.75 * (xdd * c1 - g * s1 + fr1) / l1
    t2dd = -0.75 * (xdd * c2 - g * s2 + fr2) / l2
    return xd, xdd, t1d, t1dd, t2d, t2dd


@njit(cache=True)
def rk4(s, force, phys, out):
    """Classical RK4 over one ``dt`` with the force held constant.

    Returns False when any component of the successor is non-finite.
    """
    h = phys[8]
    x, xd, t1, t1d, t2, t2d = s[0], s[1], s[2], s[3], s[4], s[5]
    a0, a1, a2, a3, a4, a5 = derivs(x, xd, t1, t1d, t2, t2d, force, phys)
    hh = 0.5 * h
    b0, b1, b2, b3, b4, b5 = derivs(
        x + hh * a0, xd + hh * a1, t1 + hh * a2, t1d + hh * a3, t2 + hh * a4, t2d + hh * a5,
        force, phys,
    )
    c0, c1, c2, c3, c4, c5 = derivs(
        x + hh * b0, xd + hh * b1, t1 + hh * b2, t1d + hh * b3, t2 + hh * b4, t2d + hh * b5,
        force, phys,
    )
    d0, d1, d2, d3, d4, d5 = derivs(
        x + h * c0, xd + h * c1, t1 + h * c2, t1d + h * c3, t2 + h * c4, t2d + h * c5,
        force, phys,
    )
    w = h / 6.0
    out[0] = x + w * (a0 + 2.0 * b0 + 2.0 * c0 + d0)
    out[1] = xd + w * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
    out[2] = t1 + w * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
    out[3] = t1d + w * (a3 + 2.0 * b3 + 2.0 * c3 + d3)
    out[4] = t2 + w * (a4 + 2.0 * b4 + 2.0 * c4 + d4)
    out[5] = t2d + w * (a5 + 2.0 * b5 + 2.0 * c5 + d5)
    for k in range(6):
        if not math.isfinite(out[k]):
            return False
    return True


@njit(cache=True)
def in_domain(s, x_limit, angle_limit):
    return abs(s[0]) <= x_limit and abs(s[2]) <= angle_limit and abs(s[4]) <= angle_limit


@njit(cache=True)
def reservoir_update(u, state, new_state, w_in, res_ptr, res_col, res_val, res_thr):
    """One synchronous tanh update of the reservoir, written back into ``state``.

    Summation order: input terms, recurrent terms by ascending column, threshold.
    """
    n_res = state.shape[0]
    n_in = u.shape[0]
    for j in range(n_res):
        acc = 0.0
        for k in range(n_in):
            acc += w_in[j, k] * u[k]
        for e in range(res_ptr[j], res_ptr[j + 1]):
            acc += res_val[e] * state[res_col[e]]
        acc += res_thr[j]
        new_state[j] = math.tanh(acc)
    for j in range(n_res):
        state[j] = new_state[j]


@njit(cache=True)
def probe_activation(q, state, w_probe, probe_thr):
    acc = 0.0
    for c in range(state.shape[0]):
        acc += w_probe[q, c] * state[c]
    acc += probe_thr[q]
    return math.tanh(acc)


@njit(cache=True)
def output_activation(i, probes, bits, masks, w_out):
    """Masked output neuron; only switched-on probes contribute.

    Skipping a switched-off probe is bit-identical to adding ``w * S * 0``:
    the running sum starts at +0.0 and can never become -0.0.
    """
    acc = 0.0
    for j in range(masks.shape[1]):
        q = masks[i, j]
        if bits[q] != 0:
            acc += w_out[i, j] * probes[q]
    return math.tanh(acc)


@njit(cache=True)
def network_step(u, bits, state, scratch, probes, y, w_in, res_ptr, res_col, res_val,
                 res_thr, w_probe, probe_thr, masks, w_out):
    """Full network step: all probe and output activations are written out."""
    reservoir_update(u, state, scratch, w_in, res_ptr, res_col, res_val, res_thr)
    for q in range(probes.shape[0]):
        probes[q] = probe_activation(q, state, w_probe, probe_thr)
    for i in range(y.shape[0]):
        y[i] = output_activation(i, probes, bits, masks, w_out)


@njit(cache=True)
def stable_term(s):
    return abs(s[0]) + abs(s[1]) + abs(s[2]) + abs(s[3])


@njit(cache=True)
def episode(bits, weights, start, t_max, steps_per_action, x_limit, angle_limit, phys,
            w_in, res_ptr, res_col, res_val, res_thr, w_probe, probe_thr, masks, w_out,
            input_scale):
    """Run one control episode from ``start`` with a freshly zeroed reservoir.

    ``weights`` selects the controller: the force is ``10 * sum_i a_i y_i`` over
    outputs with nonzero weight, accumulated in index order.  A one-hot weight
    vector therefore reproduces a single output exactly.

    Returns ``(t, denominator, aborted)`` where ``t`` counts steps that ended
    inside the success domain, ``denominator`` is the stability sum over states
    ``t-100 .. t`` (0.0 when ``t < 100``) and ``aborted`` flags a non-finite
    integration step.
    """
    n_out = masks.shape[0]
    n_res = w_in.shape[0]

    active = np.empty(n_out, dtype=np.int64)
    n_active = 0
    for i in range(n_out):
        if weights[i] != 0.0:
            active[n_active] = i
            n_active += 1
    needed = np.zeros(w_probe.shape[0], dtype=np.bool_)
    for a in range(n_active):
        i = active[a]
        for j in range(masks.shape[1]):
            q = masks[i, j]
            if bits[q] != 0:
                needed[q] = True
    needed_idx = np.nonzero(needed)[0]

    state = np.zeros(n_res)
    scratch = np.empty(n_res)
    probes = np.zeros(w_probe.shape[0])
    u = np.empty(3)
    s = start.copy()
    nxt = np.empty(6)

    window = STABLE_WINDOW + 1
    ring = np.zeros(window)
    ring[0] = stable_term(s)

    t = 0
    ok = True
    while t < t_max:
        u[0] = s[0] / input_scale[0]
        u[1] = s[2] / input_scale[1]
        u[2] = s[4] / input_scale[2]
        reservoir_update(u, state, scratch, w_in, res_ptr, res_col, res_val, res_thr)
        for k in range(needed_idx.shape[0]):
            q = needed_idx[k]
            probes[q] = probe_activation(q, state, w_probe, probe_thr)
        y_ens = 0.0
        for a in range(n_active):
            i = active[a]
            y_ens += weights[i] * output_activation(i, probes, bits, masks, w_out)
        force = FORCE_SCALE * y_ens

        for _ in range(steps_per_action):
            if not rk4(s, force, phys, nxt):
                ok = False
                break
            for k in range(6):
                s[k] = nxt[k]
        if not ok or not in_domain(s, x_limit, angle_limit):
            break
        t += 1
        ring[t % window] = stable_term(s)

    denom = 0.0
    if t >= STABLE_WINDOW:
        for i in range(t - STABLE_WINDOW, t + 1):
            denom += ring[i % window]
    return t, denom, not ok


@njit(cache=True, parallel=True)
def episode_batch(bits, weights, starts, t_max, steps_per_action, x_limit, angle_limit, phys,
                  w_in, res_ptr, res_col, res_val, res_thr, w_probe, probe_thr, masks, w_out,
                  input_scale, steps_out, denom_out, aborted_out):
    """Independent episodes, one per row of ``bits``/``weights``/``starts``.

    Each episode writes only its own output slot, so results do not depend on
    the number of threads.
    """
    for e in prange(bits.shape[0]):
        t, d, bad = episode(bits[e], weights[e], starts[e], t_max, steps_per_action, x_limit,
                       angle_limit, phys, w_in, res_ptr, res_col, res_val, res_thr, w_probe,
                       probe_thr, masks, w_out, input_scale)
        steps_out[e] = t
        denom_out[e] = d
        aborted_out[e] = bad

"""Jitted pieces shared by every sweep tier."""

import numpy as np
from numba import njit

from .._bits import f32_as_i32, i32_as_f32
from ..fastexp import exp_accurate_scalar, exp_exact_scalar, exp_fast_scalar

EXACT, FAST, ACCURATE = 0, 1, 2
EXP_KINDS = {"exact": EXACT, "fast": FAST, "accurate": ACCURATE}

ONE = np.float32(1.0)
TWO = np.float32(2.0)
ZERO = np.float32(0.0)
# below this the acceptance probability is under the smallest normal float32;
# treating it as 0 only changes a decision when the uniform is exactly 0.0
MIN_ARG = np.float32(-125.0 * 0.6931471805599453)


@njit(inline="always")
def exp_by_kind(kind, x):
    if kind == FAST:
        return exp_fast_scalar(x)
    if kind == ACCURATE:
        return exp_accurate_scalar(x)
    return exp_exact_scalar(x)


@njit(inline="always")
def flip_argument(beta, gamma, s, hs, ht):
    """-beta * dE with dE = 2 s (h_space + gamma h_tau), all in float32."""
    d_e = TWO * np.float32(s) * (hs + gamma * ht)
    return -beta * d_e


@njit(inline="always")
def accept_prob(kind, beta, gamma, s, hs, ht):
    return prob_from_argument(kind, flip_argument(beta, gamma, s, hs, ht))


@njit(inline="always")
def prob_from_argument(kind, x):
    # evaluated unconditionally so the choice compiles to a select
    p = min(ONE, exp_by_kind(kind, max(x, MIN_ARG)))
    return ZERO if x < MIN_ARG else p


@njit(inline="always")
def masked_product(two_s, coupling, keep):
    # keep is 0 or -1; a cleared product is +0.0, which leaves every value
    # (including -0.0) bit-unchanged when subtracted
    return i32_as_f32(f32_as_i32(two_s * coupling) & keep)


def padded_slots(model, space_slots=None):
    """Fixed-width per-spin update slots: space edges padded to ``space_slots``, then tau edges.

    Returns (targets, couplings, keep); padding targets the owner with keep 0.
    """
    n = model.n_spins
    tau = model.tau_counts.astype(np.int64)
    deg = np.diff(model.offsets)
    space = deg - tau
    S = int(space.max(initial=0)) if space_slots is None else int(space_slots)
    T = int(tau.max(initial=0))
    slot_t = np.repeat(np.arange(n, dtype=np.int32)[:, None], S + T, axis=1)
    slot_J = np.zeros((n, S + T), np.float32)
    keep = np.zeros((n, S + T), np.int32)
    rank = np.arange(model.targets.size) - np.repeat(model.offsets[:-1], deg)
    src = model.sources
    col = np.where(model.is_tau, S + rank - space[src], rank)
    slot_t[src, col] = model.targets
    slot_J[src, col] = model.couplings
    keep[src, col] = -1
    return slot_t, slot_J, keep, S


@njit(cache=True, nogil=True)
def state_energy(h, offsets, targets, couplings, spins):
    e = 0.0
    for i in range(spins.size):
        si = np.float64(spins[i])
        acc = 0.0
        for k in range(offsets[i], offsets[i + 1]):
            acc += np.float64(couplings[k]) * np.float64(spins[targets[k]])
        e -= si * (np.float64(h[i]) + 0.5 * acc)
    return e


@njit(cache=True, nogil=True)
def resync_fields(h, offsets, targets, couplings, tau_w, spins, hs, ht):
    """Overwrite both field arrays with float64 sums over each spin's edge list."""
    for i in range(spins.size):
        a = np.float64(h[i])
        b = 0.0
        for e in range(offsets[i], offsets[i + 1]):
            v = np.float64(couplings[e]) * np.float64(spins[targets[e]])
            w = tau_w[e]
            b += v * w
            a += v * (1.0 - w)
        hs[i] = np.float32(a)
        ht[i] = np.float32(b)


@njit(cache=True, nogil=True)
def magnetization(spins):
    m = 0
    for i in range(spins.size):
        m += spins[i]
    return m


@njit(cache=True, nogil=True)
def count_groups(flags, widths, groups):
    """Per width w: groups of w consecutive indices holding at least one flip.

    Only the first ``(n // w) * w`` indices form groups.
    """
    n = flags.size
    for a in range(widths.size):
        w = widths[a]
        full = n // w
        hit = 0
        for g in range(full):
            base = g * w
            f = 0
            for k in range(w):
                f |= flags[base + k]
            hit += f
        groups[a, 0] += hit
        groups[a, 1] += full


@njit(cache=True, nogil=True)
def record_trace(sw, trace_e, trace_m, h, offsets, targets, couplings, spins):
    if trace_e.size:
        trace_e[sw] = state_energy(h, offsets, targets, couplings, spins)
        trace_m[sw] = magnetization(spins)

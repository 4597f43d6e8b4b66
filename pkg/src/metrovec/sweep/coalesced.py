"""Two-phase lane-parallel sweep over the coalesced spin order.

Lane ``t`` owns layers ``2t`` and ``2t+1``; step ``(parity, p)`` of all lanes
touches the ``W`` consecutive spins ``W * (parity * P + p) + t``.  A parity
half-sweep runs as two phases separated by barriers:

1. flip attempts in the lane's layer of that parity, with its space updates and
   the tau update "to the left" (layer below, owned by nobody else this phase);
2. the deferred tau updates "to the right", which would otherwise collide with
   the neighbouring lane's left updates.

Every field is written by exactly one lane per phase, so the result does not
depend on how lanes are split across workers.
"""

import numpy as np
from numba import njit

from ..rng import _draw_lanes_unit
from ._common import TWO, accept_prob, count_groups, record_trace


def tau_sides(model):
    """(left_target, left_J, right_target, right_J) per spin: layer - 1 and layer + 1."""
    meta = model.layered
    layer, _ = meta.layer_pos()
    L = meta.n_layers
    n = model.n_spins
    last = model.offsets[1:]
    a, b = last - 2, last - 1
    ta, tb = model.targets[a], model.targets[b]
    a_is_left = layer[ta] == (layer - 1) % L
    left = np.where(a_is_left, ta, tb).astype(np.int32)
    right = np.where(a_is_left, tb, ta).astype(np.int32)
    lj = np.where(a_is_left, model.couplings[a], model.couplings[b]).astype(np.float32)
    rj = np.where(a_is_left, model.couplings[b], model.couplings[a]).astype(np.float32)
    assert np.all(layer[left] == (layer - 1) % L) and np.all(layer[right] == (layer + 1) % L)
    return left, lj, right, rj


@njit(cache=True, nogil=True)
def flip_phase(parity, lo, hi, W, P, spins, hs, ht, offsets, space_end, targets, J,
               left, left_J, ubuf, pending, kind, beta, gamma, counters, flags, track):
    attempts = 0
    flips = 0
    for p in range(P):
        row = parity * P + p
        base = W * row
        for t in range(lo, hi):
            i = base + t
            s = spins[i]
            attempts += 1
            if ubuf[row, t] < accept_prob(kind, beta, gamma, s, hs[i], ht[i]):
                spins[i] = -s
                flips += 1
                two_s = TWO * np.float32(s)
                for e in range(offsets[i], space_end[i]):
                    hs[targets[e]] -= two_s * J[e]
                ht[left[i]] -= two_s * left_J[i]
                pending[i] = two_s
                if track:
                    flags[i] = 1
            else:
                pending[i] = 0.0
                if track:
                    flags[i] = 0
    counters[0] += attempts
    counters[1] += flips


@njit(cache=True, nogil=True)
def push_phase(parity, lo, hi, W, P, ht, right, right_J, pending):
    for p in range(P):
        base = W * (parity * P + p)
        for t in range(lo, hi):
            i = base + t
            if pending[i] != 0.0:
                ht[right[i]] -= pending[i] * right_J[i]


@njit(cache=True, nogil=True)
def draw_phase(words, W, lo, hi, cursor, ubuf):
    return _draw_lanes_unit(words, W, lo, hi, cursor, ubuf)


@njit(cache=True, nogil=True)
def coalesced_sweeps(W, P, spins, hs, ht, offsets, space_end, targets, J,
                     left, left_J, right, right_J, ubuf, pending,
                     words, cursor, kind, beta, gamma, n_sweeps,
                     counters, flags, widths, groups, h, trace_e, trace_m):
    """Single-worker run: all lanes inside each phase, phases in order."""
    track = widths.size > 0
    c = cursor[0]
    for sw in range(n_sweeps):
        c = _draw_lanes_unit(words, W, 0, W, c, ubuf)
        for parity in range(2):
            flip_phase(parity, 0, W, W, P, spins, hs, ht, offsets, space_end, targets, J,
                       left, left_J, ubuf, pending, kind, beta, gamma, counters, flags, track)
            push_phase(parity, 0, W, W, P, ht, right, right_J, pending)
        if track:
            count_groups(flags, widths, groups)
        record_trace(sw, trace_e, trace_m, h, offsets, targets, J, spins)
    cursor[0] = c

"""Restructured scalar sweep.

Every spin owns a fixed-width row of update slots, space edges first and the
tau edges last, so a flip runs two loops of constant trip count with no
branches.  Rows shorter than the widest one are padded with slots whose
product is masked to +0.0.  ``2 * S_mul`` is computed once per flip and the
uniforms for a whole sweep are generated before the sweep starts.
"""

import numpy as np
from numba import njit

from ..rng import _fill_scalar
from ._common import TWO, accept_prob, count_groups, masked_product, record_trace


@njit(cache=True, nogil=True)
def basic_sweeps(spins, hs, ht, slot_t, slot_J, keep, space_slots,
                 words, cursor, kind, beta, gamma, n_sweeps,
                 counters, flags, widths, groups,
                 h, offsets, targets, J, trace_e, trace_m):
    n = spins.size
    slots = slot_t.shape[1]
    track = widths.size > 0
    ubuf = np.empty(n, np.float32)
    attempts = 0
    flips = 0
    for sw in range(n_sweeps):
        _fill_scalar(words, cursor, ubuf)
        for i in range(n):
            u = ubuf[i]
            s = spins[i]
            attempts += 1
            if u < accept_prob(kind, beta, gamma, s, hs[i], ht[i]):
                spins[i] = -s
                flips += 1
                two_s = TWO * np.float32(s)
                for e in range(space_slots):
                    hs[slot_t[i, e]] -= masked_product(two_s, slot_J[i, e], keep[i, e])
                for e in range(space_slots, slots):
                    ht[slot_t[i, e]] -= masked_product(two_s, slot_J[i, e], keep[i, e])
                if track:
                    flags[i] = 1
            elif track:
                flags[i] = 0
        if track:
            count_groups(flags, widths, groups)
        record_trace(sw, trace_e, trace_m, h, offsets, targets, J, spins)
    counters[0] += attempts
    counters[1] += flips

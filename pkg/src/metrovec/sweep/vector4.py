"""Four-lane sweep over the section-interlaced spin order.

Quadruplet ``q`` holds spins ``4q .. 4q+3``, one per layer section, and draws
its four uniforms from four interlaced generators.  Each quadruplet is
tagged with how far it can be vectorised:

* ``SCALAR``: lanes are adjacent to each other (only when a section has
  fewer than three layers); lanes are decided and updated one after another.
* ``LANEWISE``: lanes are independent, so the four decisions happen at once,
  but some neighbour quadruplet is not lane-aligned (the layer seam between
  sections); updates go lane by lane.
* ``GROUPED``: every edge slot of lane ``k`` points at lane ``k`` of one
  aligned quadruplet, so updates can be masked four-wide group writes.
"""

from contextlib import contextmanager
from typing import NamedTuple

import numba
import numpy as np
from numba import njit

from ..rng import N, _temper, _to_unit, _twist4
from ._common import ACCURATE, EXACT, FAST, TWO, accept_prob, count_groups, masked_product, record_trace

SCALAR, LANEWISE, GROUPED = 0, 1, 2
LANES = 4


class QuadLayout(NamedTuple):
    """Grouped edge tables, one row per quadruplet.

    Slots ``0 .. space_slots-1`` are space edges and the remaining slots tau
    edges, padded to the same count for every quadruplet so the update loops
    have fixed trip counts.  ``qbase[q, e]`` is the first index of the target
    quadruplet, ``qJ[q, e, k]`` the coupling for lane ``k`` and ``qkeep[q, e]``
    is -1 for a real slot and 0 for padding.
    """

    mode: np.ndarray
    qbase: np.ndarray
    qJ: np.ndarray
    qkeep: np.ndarray
    space_slots: int

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.mode, minlength=3)


def quadruplet_layout(model) -> QuadLayout:
    n = model.n_spins
    nq = n // LANES
    deg = model.degrees
    tau_deg = model.tau_counts
    space_deg = deg - tau_deg
    S = int(space_deg.max()) if n else 0
    T = int(tau_deg.max()) if n else 0
    mode = np.full(nq, GROUPED, np.int8)
    qbase = np.repeat((LANES * np.arange(nq, dtype=np.int32))[:, None], S + T, axis=1)
    qJ = np.zeros((nq, S + T, LANES), np.float32)
    qkeep = np.zeros((nq, S + T), np.int32)
    off, tgt, cpl = model.offsets, model.targets, model.couplings
    for q in range(nq):
        lanes = range(LANES * q, LANES * q + LANES)
        members = set(lanes)
        neighbours = [set(tgt[off[i]:off[i + 1]].tolist()) for i in lanes]
        if any(members & nb for nb in neighbours):
            mode[q] = SCALAR
            continue
        if len({deg[i] for i in lanes}) != 1 or len({space_deg[i] for i in lanes}) != 1:
            mode[q] = LANEWISE
            continue
        sd = int(space_deg[LANES * q])
        slots = list(range(sd)) + list(range(S, S + int(tau_deg[LANES * q])))
        for e, slot in enumerate(slots):
            t = [int(tgt[off[i] + e]) for i in lanes]
            if t[0] % LANES or t != [t[0] + k for k in range(LANES)]:
                mode[q] = LANEWISE
                break
            qbase[q, slot] = t[0]
            qJ[q, slot, :] = [cpl[off[i] + e] for i in lanes]
            qkeep[q, slot] = -1
        if mode[q] == LANEWISE:
            qbase[q] = LANES * q
            qJ[q] = 0
            qkeep[q] = 0
    return QuadLayout(mode, qbase, qJ, qkeep, S)


U0, U1, U2, U3 = np.uint64(0), np.uint64(1), np.uint64(2), np.uint64(3)


@njit(cache=True, nogil=True)
def _refill4(words, start, buf):
    for j in range(start * LANES, N * LANES):
        buf[j] = _to_unit(_temper(words[j]))


@njit(inline="always")
def _group_write(field, t, qJ, q, e, d0, d1, d2, d3, k0, k1, k2, k3, slot):
    # unsigned indices and loads ahead of stores let the lanes share vector ops
    a0, a1, a2, a3 = field[t], field[t + U1], field[t + U2], field[t + U3]
    j0, j1, j2, j3 = qJ[q, e, U0], qJ[q, e, U1], qJ[q, e, U2], qJ[q, e, U3]
    k0, k1, k2, k3 = k0 & slot, k1 & slot, k2 & slot, k3 & slot
    field[t] = a0 - masked_product(d0, j0, k0)
    field[t + U1] = a1 - masked_product(d1, j1, k1)
    field[t + U2] = a2 - masked_product(d2, j2, k2)
    field[t + U3] = a3 - masked_product(d3, j3, k3)


@njit(inline="always")
def _scalar_update(i, two_s, hs, ht, offsets, space_end, targets, J):
    for e in range(offsets[i], space_end[i]):
        hs[targets[e]] -= two_s * J[e]
    for e in range(space_end[i], offsets[i + 1]):
        ht[targets[e]] -= two_s * J[e]


@njit(inline="always")
def _sweeps(spins, hs, ht, offsets, space_end, targets, J,
            mode, qbase, qJ, qkeep, space_slots, grouped,
            words, cursor, kind, beta, gamma, n_sweeps,
            counters, flags, widths, groups,
            h, trace_e, trace_m):
    nq = mode.size
    slots = qbase.shape[1]
    track = widths.size > 0
    buf = np.empty(N * LANES, np.float32)
    c = cursor[0]
    if c < N:
        _refill4(words, c, buf)
    attempts = 0
    flips = 0
    # an all-quiet quadruplet can skip the masked writes; that branch only
    # pays off while it is well predicted, so it follows the last sweep's rate
    skip = True
    for sw in range(n_sweeps):
        hit_quads = 0
        for q in range(nq):
            if c >= N:
                _twist4(words)
                _refill4(words, 0, buf)
                c = 0
            attempts += LANES
            mq = mode[q]
            if mq == SCALAR:
                for k in range(LANES):
                    i = LANES * q + k
                    s = spins[i]
                    f = buf[LANES * c + k] < accept_prob(kind, beta, gamma, s, hs[i], ht[i])
                    if f:
                        spins[i] = -s
                        flips += 1
                        _scalar_update(i, TWO * np.float32(s), hs, ht, offsets, space_end, targets, J)
                    if track:
                        flags[i] = f
                c += 1
                continue

            b = np.uint64(LANES * q)
            r = np.uint64(LANES * c)
            c += 1
            s0, s1, s2, s3 = spins[b], spins[b + U1], spins[b + U2], spins[b + U3]
            f0 = buf[r] < accept_prob(kind, beta, gamma, s0, hs[b], ht[b])
            f1 = buf[r + U1] < accept_prob(kind, beta, gamma, s1, hs[b + U1], ht[b + U1])
            f2 = buf[r + U2] < accept_prob(kind, beta, gamma, s2, hs[b + U2], ht[b + U2])
            f3 = buf[r + U3] < accept_prob(kind, beta, gamma, s3, hs[b + U3], ht[b + U3])
            if track:
                flags[b], flags[b + U1], flags[b + U2], flags[b + U3] = f0, f1, f2, f3
            nflip = np.int64(f0) + np.int64(f1) + np.int64(f2) + np.int64(f3)
            hit_quads += nflip > 0
            if skip and nflip == 0:
                continue
            flips += nflip
            spins[b] = s0 - 2 * s0 * f0
            spins[b + U1] = s1 - 2 * s1 * f1
            spins[b + U2] = s2 - 2 * s2 * f2
            spins[b + U3] = s3 - 2 * s3 * f3
            d0, d1 = TWO * np.float32(s0), TWO * np.float32(s1)
            d2, d3 = TWO * np.float32(s2), TWO * np.float32(s3)
            if grouped and mq == GROUPED:
                k0, k1 = -np.int32(f0), -np.int32(f1)
                k2, k3 = -np.int32(f2), -np.int32(f3)
                uq = np.uint64(q)
                for e in range(space_slots):
                    ue = np.uint64(e)
                    _group_write(hs, np.uint64(qbase[uq, ue]), qJ, uq, ue,
                                 d0, d1, d2, d3, k0, k1, k2, k3, qkeep[uq, ue])
                for e in range(space_slots, slots):
                    ue = np.uint64(e)
                    _group_write(ht, np.uint64(qbase[uq, ue]), qJ, uq, ue,
                                 d0, d1, d2, d3, k0, k1, k2, k3, qkeep[uq, ue])
            elif nflip:
                i = LANES * q
                if f0:
                    _scalar_update(i, d0, hs, ht, offsets, space_end, targets, J)
                if f1:
                    _scalar_update(i + 1, d1, hs, ht, offsets, space_end, targets, J)
                if f2:
                    _scalar_update(i + 2, d2, hs, ht, offsets, space_end, targets, J)
                if f3:
                    _scalar_update(i + 3, d3, hs, ht, offsets, space_end, targets, J)
        skip = 4 * hit_quads < nq
        if track:
            count_groups(flags, widths, groups)
        record_trace(sw, trace_e, trace_m, h, offsets, targets, J, spins)
    cursor[0] = c
    counters[0] += attempts
    counters[1] += flips


@njit(cache=True, nogil=True)
def vector4_sweeps(spins, hs, ht, offsets, space_end, targets, J,
                   mode, qbase, qJ, qkeep, space_slots, grouped,
                   words, cursor, kind, beta, gamma, n_sweeps,
                   counters, flags, widths, groups,
                   h, trace_e, trace_m):
    # one inlined copy per exp kind keeps the hot loop free of the dispatch
    if kind == FAST:
        _sweeps(spins, hs, ht, offsets, space_end, targets, J, mode, qbase, qJ, qkeep, space_slots,
                grouped, words, cursor, FAST, beta, gamma, n_sweeps, counters, flags, widths,
                groups, h, trace_e, trace_m)
    elif kind == ACCURATE:
        _sweeps(spins, hs, ht, offsets, space_end, targets, J, mode, qbase, qJ, qkeep, space_slots,
                grouped, words, cursor, ACCURATE, beta, gamma, n_sweeps, counters, flags, widths,
                groups, h, trace_e, trace_m)
    else:
        _sweeps(spins, hs, ht, offsets, space_end, targets, J, mode, qbase, qJ, qkeep, space_slots,
                grouped, words, cursor, EXACT, beta, gamma, n_sweeps, counters, flags, widths,
                groups, h, trace_e, trace_m)


@contextmanager
def _superword():
    # numba leaves LLVM's SLP vectoriser off; the lane-unrolled kernel needs it
    old = numba.config.SLP_VECTORIZE
    numba.config.SLP_VECTORIZE = 1
    try:
        yield
    finally:
        numba.config.SLP_VECTORIZE = old


def run_vector4_sweeps(*args):
    """Call :func:`vector4_sweeps`, compiling it (on first use) with SLP enabled."""
    with _superword():
        return vector4_sweeps(*args)

"""Original-style sweep: edge ids into a shared edge table, branches, exact exp.

Each uniform is pulled from the generator one at a time.  The edge table is a
``(num_edges, 2)`` array of endpoints, so finding the neighbour and picking
the space or tau field both branch inside the inner loop.
"""

import numpy as np
from numba import njit

from ..rng import _next_u32, _to_unit
from ._common import TWO, accept_prob, count_groups, record_trace


def edge_table(model):
    """(graph_edges, incident_offsets, incident_edges, J, is_tau) for ``model``."""
    i, j, J, tau = model.undirected()
    graph_edges = np.stack([i, j], axis=1).astype(np.int32)
    ne = i.size
    ends = np.concatenate([i, j])
    ids = np.concatenate([np.arange(ne), np.arange(ne)])
    order = np.argsort(ends, kind="stable")
    counts = np.bincount(ends, minlength=model.n_spins)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return graph_edges, offsets, ids[order].astype(np.int32), J.astype(np.float32), tau.astype(np.uint8)


@njit(cache=True, nogil=True)
def reference_sweeps(spins, hs, ht, graph_edges, inc_off, inc_edges, J, is_tau,
                     words, cursor, kind, beta, gamma, n_sweeps,
                     counters, flags, widths, groups,
                     h, e_off, e_tgt, e_J, trace_e, trace_m):
    n = spins.size
    track = widths.size > 0
    for sw in range(n_sweeps):
        for curr_spin in range(n):
            u = _to_unit(_next_u32(words, cursor))
            p = accept_prob(kind, beta, gamma, spins[curr_spin], hs[curr_spin], ht[curr_spin])
            counters[0] += 1
            if u < p:
                s_mul = spins[curr_spin]
                spins[curr_spin] = -s_mul
                counters[1] += 1
                if track:
                    flags[curr_spin] = 1
                for edge_index in range(inc_off[curr_spin], inc_off[curr_spin + 1]):
                    curr_edge = inc_edges[edge_index]
                    if graph_edges[curr_edge, 0] == curr_spin:
                        curr_nbr = graph_edges[curr_edge, 1]
                    else:
                        curr_nbr = graph_edges[curr_edge, 0]
                    if is_tau[curr_edge]:
                        ht[curr_nbr] -= TWO * np.float32(s_mul) * J[curr_edge]
                    else:
                        hs[curr_nbr] -= TWO * np.float32(s_mul) * J[curr_edge]
            elif track:
                flags[curr_spin] = 0
        if track:
            count_groups(flags, widths, groups)
        record_trace(sw, trace_e, trace_m, h, e_off, e_tgt, e_J, spins)

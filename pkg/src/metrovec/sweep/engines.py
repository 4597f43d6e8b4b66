"""Engine objects: validate a model once, hold its tier-specific layout, run sweeps."""

from __future__ import annotations

import threading

import numpy as np

from ..model import ModelError, SpinModel
from ..rng import InterlacedMt, Mt19937
from ._common import EXP_KINDS, padded_slots, resync_fields
from .basic import basic_sweeps
from .coalesced import coalesced_sweeps, draw_phase, flip_phase, push_phase, tau_sides
from .reference import edge_table, reference_sweeps
from .state import SweepParams, SweepState, incremental_fields_exact, init_state
from .vector4 import LANES, quadruplet_layout, run_vector4_sweeps

# rounding in incremental updates drifts by up to ~0.1 ULP per sweep
RESYNC_SWEEPS = 128

_NO_TRACE = np.empty(0, np.float64)
_NO_TRACE_M = np.empty(0, np.int64)


class Trace:
    """Per-sweep cost and magnetisation recorded during a run."""

    def __init__(self, sweeps: int):
        self.cost = np.empty(sweeps, np.float64)
        self.magnetization = np.empty(sweeps, np.int64)

    def window(self, start: int, count: int) -> "Trace":
        w = Trace(0)
        w.cost = self.cost[start:start + count]
        w.magnetization = self.magnetization[start:start + count]
        return w


class Engine:
    """Base engine.

    Fields are rebuilt from the spins every ``resync_every`` sweeps of a state
    (counted from its creation), unless the model's values make incremental
    updates exact.  Every engine resyncs at the same sweeps, so trajectories
    stay comparable across tiers.
    """

    name = "engine"
    default_exp = "fast"

    def __init__(self, model: SpinModel):
        self.model = model
        self.resync_every = 0 if incremental_fields_exact(model) else RESYNC_SWEEPS
        self._tau_w = model.is_tau.astype(np.float64)
        self.h = model.h
        self.offsets = model.offsets
        self.targets = model.targets
        self.couplings = model.couplings
        self.space_end = (model.offsets[1:] - model.tau_counts).astype(np.int64)

    @property
    def lanes(self) -> int:
        return 1

    def new_state(self, initial, params: SweepParams, seed: int = 0, widths=()) -> SweepState:
        return init_state(self.model, initial, params, seed=seed, lanes=self.lanes, widths=widths)

    def _check_state(self, state: SweepState):
        if state.spins.shape != (self.model.n_spins,):
            raise ValueError("state does not belong to this model")
        if self.lanes == 1:
            if not isinstance(state.rng, Mt19937):
                raise ValueError(f"{self.name} engine needs a scalar generator")
        elif not isinstance(state.rng, InterlacedMt) or state.rng.lanes != self.lanes:
            raise ValueError(f"{self.name} engine needs a {self.lanes}-lane interlaced generator")

    def _common_args(self, state: SweepState):
        p = state.params.resolved(self.default_exp)
        return EXP_KINDS[p.exp_kind], np.float32(p.beta), np.float32(p.tau_scale)

    def _stats_args(self, state: SweepState):
        st = state.stats
        widths = np.array(st.widths, np.int64)
        flags = np.zeros(self.model.n_spins if widths.size else 0, np.uint8)
        counters = np.zeros(2, np.int64)
        return counters, flags, widths, st.groups

    def _finish(self, state: SweepState, counters):
        state.stats.attempts += int(counters[0])
        state.stats.flips += int(counters[1])

    def _trace_args(self, trace: Trace | None):
        if trace is None:
            return _NO_TRACE, _NO_TRACE_M
        return trace.cost, trace.magnetization

    def run(self, state: SweepState, sweeps: int = 1, trace: bool = False) -> Trace | None:
        self._check_state(state)
        tr = Trace(sweeps) if trace else None
        every = self.resync_every
        done = 0
        while done < sweeps:
            k = sweeps - done
            if every:
                k = min(k, every - state.sweep_count % every)
            self._run(state, k, None if tr is None else tr.window(done, k))
            done += k
            state.sweep_count += k
            if every and state.sweep_count % every == 0:
                self.resync(state)
        return tr

    def resync(self, state: SweepState) -> None:
        m = self.model
        resync_fields(m.h, m.offsets, m.targets, m.couplings, self._tau_w, state.spins,
                      state.h_eff_space, state.h_eff_tau)

    def _run(self, state, sweeps, trace):
        raise NotImplementedError


class ReferenceEngine(Engine):
    name = "reference"
    default_exp = "exact"

    def __init__(self, model: SpinModel):
        super().__init__(model)
        self.graph_edges, self.inc_off, self.inc_edges, self.edge_J, self.edge_tau = edge_table(model)

    def _run(self, state, sweeps, trace):
        kind, beta, gamma = self._common_args(state)
        counters, flags, widths, groups = self._stats_args(state)
        te, tm = self._trace_args(trace)
        rng = state.rng
        reference_sweeps(state.spins, state.h_eff_space, state.h_eff_tau,
                         self.graph_edges, self.inc_off, self.inc_edges, self.edge_J, self.edge_tau,
                         rng.words, rng._cursor, kind, beta, gamma, sweeps,
                         counters, flags, widths, groups,
                         self.h, self.offsets, self.targets, self.couplings, te, tm)
        self._finish(state, counters)


class BasicEngine(Engine):
    name = "basic"

    def __init__(self, model: SpinModel):
        if not model.is_tau_last():
            raise ModelError("basic engine needs tau edges last; apply reorder_edges_tau_last")
        super().__init__(model)
        self.slot_t, self.slot_J, self.keep, self.space_slots = padded_slots(model)

    def _run(self, state, sweeps, trace):
        kind, beta, gamma = self._common_args(state)
        counters, flags, widths, groups = self._stats_args(state)
        te, tm = self._trace_args(trace)
        rng = state.rng
        basic_sweeps(state.spins, state.h_eff_space, state.h_eff_tau,
                     self.slot_t, self.slot_J, self.keep, self.space_slots,
                     rng.words, rng._cursor, kind, beta, gamma, sweeps,
                     counters, flags, widths, groups,
                     self.h, self.offsets, self.targets, self.couplings, te, tm)
        self._finish(state, counters)


class Vector4Engine(Engine):
    name = "vector4"

    def __init__(self, model: SpinModel, lane_parallel_updates: bool = True):
        meta = model.layered
        if meta is None or meta.ordering != "vector4":
            raise ModelError("vector4 engine needs a model relabelled by vector4_permutation")
        if not model.is_tau_last():
            raise ModelError("vector4 engine needs tau edges last")
        super().__init__(model)
        self.lane_parallel_updates = bool(lane_parallel_updates)
        self.layout = quadruplet_layout(model)

    @property
    def lanes(self) -> int:
        return LANES

    def _run(self, state, sweeps, trace):
        kind, beta, gamma = self._common_args(state)
        counters, flags, widths, groups = self._stats_args(state)
        te, tm = self._trace_args(trace)
        rng = state.rng
        cursor = np.array([rng.cursor], np.int64)
        run_vector4_sweeps(state.spins, state.h_eff_space, state.h_eff_tau,
                           self.offsets, self.space_end, self.targets, self.couplings,
                           *self.layout,
                           self.lane_parallel_updates,
                           rng.words, cursor, kind, beta, gamma, sweeps,
                           counters, flags, widths, groups, self.h, te, tm)
        rng.cursor = int(cursor[0])
        self._finish(state, counters)


class CoalescedEngine(Engine):
    name = "coalesced"

    def __init__(self, model: SpinModel, workers: int = 1):
        meta = model.layered
        if meta is None or meta.ordering != "coalesce":
            raise ModelError("coalesced engine needs a model relabelled by coalesce_permutation")
        if not model.is_tau_last():
            raise ModelError("coalesced engine needs tau edges last")
        super().__init__(model)
        self.width = meta.width
        self.per_layer = meta.per_layer
        if not 1 <= workers <= self.width:
            raise ValueError(f"workers must lie in [1, {self.width}], got {workers}")
        self.workers = int(workers)
        self.left, self.left_J, self.right, self.right_J = tau_sides(model)

    @property
    def lanes(self) -> int:
        return self.width

    def new_state(self, initial, params, seed=0, widths=()):
        return super().new_state(initial, params, seed, tuple(widths) + (self.width,))

    def _run(self, state, sweeps, trace):
        if self.width not in state.stats.widths:
            state.stats.add_width(self.width)
        if self.workers == 1:
            self._run_serial(state, sweeps, trace)
        else:
            self._run_threaded(state, sweeps, trace)

    def _buffers(self):
        return (np.empty((2 * self.per_layer, self.width), np.float32),
                np.zeros(self.model.n_spins, np.float32))

    def _run_serial(self, state, sweeps, trace):
        kind, beta, gamma = self._common_args(state)
        counters, flags, widths, groups = self._stats_args(state)
        te, tm = self._trace_args(trace)
        ubuf, pending = self._buffers()
        rng = state.rng
        cursor = np.array([rng.cursor], np.int64)
        coalesced_sweeps(self.width, self.per_layer, state.spins, state.h_eff_space, state.h_eff_tau,
                         self.offsets, self.space_end, self.targets, self.couplings,
                         self.left, self.left_J, self.right, self.right_J, ubuf, pending,
                         rng.words, cursor, kind, beta, gamma, sweeps,
                         counters, flags, widths, groups, self.h, te, tm)
        rng.cursor = int(cursor[0])
        self._finish(state, counters)

    def _run_threaded(self, state, sweeps, trace):
        from ._common import count_groups, record_trace

        kind, beta, gamma = self._common_args(state)
        _, _, widths, groups = self._stats_args(state)
        track = widths.size > 0
        n = self.model.n_spins
        flag_bufs = [np.zeros(n if track else 0, np.uint8) for _ in range(2)]
        te, tm = self._trace_args(trace)
        ubuf, pending = self._buffers()
        W, P = self.width, self.per_layer
        bounds = np.linspace(0, W, self.workers + 1).astype(int)
        counters = [np.zeros(2, np.int64) for _ in range(self.workers)]
        cursors = [0] * self.workers
        barrier = threading.Barrier(self.workers)
        errors = []
        rng = state.rng
        spins, hs, ht = state.spins, state.h_eff_space, state.h_eff_tau

        def work(w):
            lo, hi = int(bounds[w]), int(bounds[w + 1])
            c = rng.cursor
            try:
                for sw in range(sweeps):
                    flags = flag_bufs[sw % 2]
                    c = draw_phase(rng.words, W, lo, hi, c, ubuf)
                    for parity in range(2):
                        flip_phase(parity, lo, hi, W, P, spins, hs, ht, self.offsets, self.space_end,
                                   self.targets, self.couplings, self.left, self.left_J, ubuf, pending,
                                   kind, beta, gamma, counters[w], flags, track)
                        barrier.wait()
                        push_phase(parity, lo, hi, W, P, ht, self.right, self.right_J, pending)
                        barrier.wait()
                    if w == 0:
                        # other workers cannot pass the next barrier before this finishes
                        if track:
                            count_groups(flags, widths, groups)
                        record_trace(sw, te, tm, self.h, self.offsets, self.targets, self.couplings, spins)
                    if te.size:
                        barrier.wait()
            except threading.BrokenBarrierError:
                pass
            except BaseException as exc:  # pragma: no cover - surfaced below
                errors.append(exc)
                barrier.abort()
            cursors[w] = c

        threads = [threading.Thread(target=work, args=(w,)) for w in range(self.workers)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            raise errors[0]
        assert len(set(cursors)) == 1
        rng.cursor = cursors[0]
        self._finish(state, sum(counters))


ENGINES = {
    "reference": ReferenceEngine,
    "basic": BasicEngine,
    "vector4": Vector4Engine,
    "coalesced": CoalescedEngine,
}


def make_engine(name: str, model: SpinModel, **options) -> Engine:
    try:
        cls = ENGINES[name]
    except KeyError:
        raise ValueError(f"unknown engine {name!r}; choose from {sorted(ENGINES)}") from None
    return cls(model, **options)

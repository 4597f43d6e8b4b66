"""Metropolis sweep engines at four optimisation tiers.

``reference``  branchy edge-table sweep with exact exponential
``basic``      tau-last edge lists, cached 2*S_mul, batched uniforms, fast exponential
``vector4``    four section-interlaced lanes with four interlaced generators
``coalesced``  W lanes of two layers each, two-phase left/right update schedule
"""

from .engines import (
    ENGINES,
    BasicEngine,
    CoalescedEngine,
    Engine,
    ReferenceEngine,
    Trace,
    Vector4Engine,
    make_engine,
)
from .state import (
    FlipStats,
    SweepParams,
    SweepState,
    collect_wait_stats,
    field_scale,
    field_ulp_error,
    flip_probability,
    init_state,
    recompute_fields,
)


def _cached(model, key, factory):
    cache = model.__dict__.setdefault("_engine_cache", {})
    if key not in cache:
        cache[key] = factory()
    return cache[key]


def sweep_reference(state, model, sweeps=1):
    _cached(model, ("reference",), lambda: ReferenceEngine(model)).run(state, sweeps)
    return state


def sweep_basic(state, model, sweeps=1):
    _cached(model, ("basic",), lambda: BasicEngine(model)).run(state, sweeps)
    return state


def sweep_vector4(state, model, lane_parallel_updates=True, sweeps=1):
    key = ("vector4", bool(lane_parallel_updates))
    _cached(model, key, lambda: Vector4Engine(model, lane_parallel_updates)).run(state, sweeps)
    return state


def sweep_coalesced(state, model, workers=1, sweeps=1):
    _cached(model, ("coalesced", workers), lambda: CoalescedEngine(model, workers)).run(state, sweeps)
    return state


__all__ = [
    "ENGINES", "BasicEngine", "CoalescedEngine", "Engine", "FlipStats", "ReferenceEngine",
    "SweepParams", "SweepState", "Trace", "Vector4Engine", "collect_wait_stats", "field_scale",
    "field_ulp_error", "flip_probability", "init_state", "make_engine", "recompute_fields",
    "sweep_basic", "sweep_coalesced", "sweep_reference", "sweep_vector4",
]

"""Ground truth for the sweep engines.

* ``enumerate_boltzmann`` sums the Boltzmann weights of every state of a small
  model (log-sum-exp, compensated accumulation).
* ``chain_statistics_test`` compares an engine's time averages with the exact
  moments, using batch-means standard errors.
* ``trajectory_equivalence`` runs two engines side by side and reports the
  first sweep and spin where their states part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .model import SpinModel, prepare_for_engine
from .sweep import Engine, SweepParams, make_engine

MAX_ENUM_SPINS = 24
_CHUNK_BITS = 16
REPLICATE_SEED_STRIDE = 100_003


# -------------------------------------------------------------- enumeration

@njit(cache=True, nogil=True)
def _state_costs(h, ei, ej, eJ, start, out_cost, out_mag):
    """Cost and magnetisation of states ``start .. start + out.size``.

    Bit ``i`` of the state index set means s_i = +1.
    """
    n = h.size
    for k in range(out_cost.size):
        x = start + k
        c = 0.0
        m = 0
        for i in range(n):
            s = 1.0 if (x >> i) & 1 else -1.0
            c -= h[i] * s
            m += 1 if s > 0 else -1
        for e in range(ei.size):
            si = 1.0 if (x >> ei[e]) & 1 else -1.0
            sj = 1.0 if (x >> ej[e]) & 1 else -1.0
            c -= eJ[e] * si * sj
        out_cost[k] = c
        out_mag[k] = m


@njit(cache=True, nogil=True)
def _kahan(values):
    s = 0.0
    comp = 0.0
    for v in values:
        y = v - comp
        t = s + y
        comp = (t - s) - y
        s = t
    return s


def state_spins(index: int, n: int) -> np.ndarray:
    """Signs of enumeration state ``index`` (bit i set means +1)."""
    bits = (int(index) >> np.arange(n)) & 1
    return np.where(bits == 1, 1, -1).astype(np.int8)


@dataclass
class ExactDistribution:
    model: SpinModel
    beta: float
    probs: np.ndarray = field(repr=False)
    costs: np.ndarray = field(repr=False)
    magnetizations: np.ndarray = field(repr=False)
    log_z: float = 0.0
    mean_cost: float = 0.0
    mean_magnetization: float = 0.0
    var_cost: float = 0.0

    def expect(self, values: np.ndarray) -> float:
        return float(_kahan(self.probs * np.asarray(values, np.float64)))

    def prob_of(self, spins) -> float:
        s = np.asarray(spins)
        index = int(((s > 0).astype(np.int64) << np.arange(s.size)).sum())
        return float(self.probs[index])


def enumerate_boltzmann(model: SpinModel, beta: float) -> ExactDistribution:
    """Exact Boltzmann distribution over all 2**n states of ``model``."""
    n = model.n_spins
    if n > MAX_ENUM_SPINS:
        raise ValueError(f"enumeration is limited to {MAX_ENUM_SPINS} spins, model has {n}")
    if not beta >= 0:
        raise ValueError("beta must be non-negative")
    i, j, J, _ = model.undirected()
    h = model.h.astype(np.float64)
    ei, ej, eJ = i.astype(np.int64), j.astype(np.int64), J.astype(np.float64)
    total = 1 << n
    costs = np.empty(total, np.float64)
    mags = np.empty(total, np.int64)
    chunk = 1 << _CHUNK_BITS
    # fixed chunk order keeps the reduction bit-stable
    for start in range(0, total, chunk):
        stop = min(total, start + chunk)
        _state_costs(h, ei, ej, eJ, start, costs[start:stop], mags[start:stop])
    logw = -float(beta) * costs
    top = logw.max()
    w = np.exp(logw - top)
    z = _kahan(w)
    probs = w / z
    mean_cost = float(_kahan(probs * costs))
    mean_mag = float(_kahan(probs * mags.astype(np.float64)))
    var_cost = float(_kahan(probs * (costs - mean_cost) ** 2))
    return ExactDistribution(model, float(beta), probs, costs, mags, top + math.log(z),
                             mean_cost, mean_mag, var_cost)


# ------------------------------------------------------------- chain testing

@dataclass
class MomentCheck:
    name: str
    exact: float
    estimate: float
    stderr: float
    z: float
    passed: bool


@dataclass
class ChainTestReport:
    engine: str
    beta: float
    exp_kind: str
    sweeps: int
    burn_in: int
    replicates: int
    checks: list[MomentCheck]
    flip_rate: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> MomentCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _resolve_engine(engine, model: SpinModel, options=None) -> Engine:
    if isinstance(engine, Engine):
        return engine
    return make_engine(engine, prepare_for_engine(model, engine), **(options or {}))


def batch_means(series: np.ndarray, batches: int) -> tuple[float, float]:
    """Mean of ``series`` and its batch-means standard error (whole batches only)."""
    series = np.asarray(series, np.float64)
    if batches < 2 or series.size < batches:
        raise ValueError("need at least two batches of at least one sample")
    size = series.size // batches
    means = series[: size * batches].reshape(batches, size).mean(axis=1)
    return float(means.mean()), float(means.std(ddof=1) / math.sqrt(batches))


def chain_statistics_test(model: SpinModel, engine, params: SweepParams, sweeps: int,
                          burn_in: int = 1000, replicates: int = 4, *, batches_per_replicate: int = 5,
                          seed: int = 0, z_threshold: float = 4.0, exact: ExactDistribution | None = None,
                          engine_options=None) -> ChainTestReport:
    """Time-averaged cost and magnetisation against exact enumeration.

    ``replicates`` independent chains (base seeds ``seed + REPLICATE_SEED_STRIDE * r``)
    each contribute ``batches_per_replicate`` contiguous batches; a moment
    passes when the estimate lies within ``z_threshold`` standard errors of the
    exact value.
    """
    eng = _resolve_engine(engine, model, engine_options)
    if exact is None:
        exact = enumerate_boltzmann(model, params.beta)
    cost_batches, mag_batches = [], []
    attempts = flips = 0
    for r in range(replicates):
        # lane k of a multi-lane generator is seeded base + k, so replicate
        # bases are spaced past any lane count to keep the streams disjoint
        base = seed + REPLICATE_SEED_STRIDE * r
        st = eng.new_state(base + 1, params, seed=base)
        if burn_in:
            eng.run(st, burn_in)
        tr = eng.run(st, sweeps, trace=True)
        attempts += st.stats.attempts
        flips += st.stats.flips
        size = sweeps // batches_per_replicate
        for b in range(batches_per_replicate):
            sl = slice(b * size, (b + 1) * size)
            cost_batches.append(tr.cost[sl].mean())
            mag_batches.append(tr.magnetization[sl].astype(np.float64).mean())
    checks = []
    for name, batch, target in (("cost", cost_batches, exact.mean_cost),
                                ("magnetization", mag_batches, exact.mean_magnetization)):
        b = np.asarray(batch)
        est = float(b.mean())
        se = float(b.std(ddof=1) / math.sqrt(b.size)) if b.size > 1 else math.inf
        diff = est - target
        if se > 0:
            z = diff / se
        else:
            z = 0.0 if abs(diff) <= 1e-12 * max(1.0, abs(target)) else math.inf
        checks.append(MomentCheck(name, float(target), est, se, float(z), abs(z) <= z_threshold))
    kind = params.resolved(eng.default_exp).exp_kind
    return ChainTestReport(eng.name, float(params.beta), kind, sweeps, burn_in, replicates, checks,
                           flips / attempts if attempts else 0.0)


# ------------------------------------------------------ trajectory comparison

@dataclass
class TrajectoryResult:
    equal: bool
    sweeps: int
    first_sweep: int | None = None
    first_spin: int | None = None
    first_spin_canonical: int | None = None

    def __bool__(self):
        return self.equal


def _ordering(model: SpinModel):
    meta = model.layered
    return None if meta is None else (meta.ordering, meta.width, meta.origin.tobytes())


def trajectory_equivalence(engine_a, engine_b, model: SpinModel, params: SweepParams, sweeps: int,
                           *, seed: int = 0, initial=None) -> TrajectoryResult:
    """Run two engines from one state and RNG seed; compare spins after every sweep.

    Engines are names (built on ``model`` the way ``prepare_for_engine`` would)
    or ready ``Engine`` objects.
    """
    a = _resolve_engine(engine_a, model)
    b = _resolve_engine(engine_b, model)
    if a.model.n_spins != b.model.n_spins or _ordering(a.model) != _ordering(b.model):
        raise ValueError(f"{a.name} and {b.name} use different spin orderings; trajectories are not comparable")
    if a.lanes != b.lanes:
        raise ValueError(f"{a.name} draws from {a.lanes} generator lanes, {b.name} from {b.lanes}")
    if initial is None:
        initial = seed + 1
    sa = a.new_state(initial, params, seed=seed)
    sb = b.new_state(sa.spins.copy(), params, seed=seed)
    for sweep in range(sweeps):
        a.run(sa, 1)
        b.run(sb, 1)
        if not np.array_equal(sa.spins, sb.spins):
            spin = int(np.flatnonzero(sa.spins != sb.spins)[0])
            meta = a.model.layered
            canon = int(meta.origin[spin]) if meta is not None else spin
            return TrajectoryResult(False, sweep + 1, sweep, spin, canon)
    return TrajectoryResult(True, sweeps)

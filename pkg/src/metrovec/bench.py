"""Synthetic layered models and the relative-performance benchmark.

The benchmark runs one chain per value of a beta ladder for every engine,
repeats the whole ladder with identical seeds, and reports wall time,
throughput, speedup against a baseline engine and flip/wait statistics.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
import statistics
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TextIO

import networkx as nx
import numba
import numpy as np

from .fastexp import exp_accurate_scalar, exp_exact_scalar, exp_fast_scalar
from .model import DTYPE, LayerSpec, ModelError, SpinModel, build_layered_model, prepare_for_engine
from .sweep import ENGINES, SweepParams, collect_wait_stats, make_engine

DISTRIBUTIONS = ("uniform", "pm1")
DEFAULT_BETAS = (0.25, 0.5, 1.0, 2.0)
DEFAULT_WIDTHS = (1, 4, 32)
# generator lanes take base + k, so chain bases sit further apart than any lane count
CHAIN_SEED_STRIDE = 100_003
CSV_COLUMNS = ("engine", "spins", "sweeps", "reps", "mean_seconds", "sd_seconds",
               "spin_updates_per_sec", "speedup_vs_reference", "flip_rate", "wait_w4", "wait_w32")


class BenchError(RuntimeError):
    pass


# ---------------------------------------------------------------- generation

@dataclass(frozen=True)
class GeneratorSpec:
    n_layers: int = 256
    per_layer: int = 96
    space_degree: tuple[int, int] = (4, 6)
    distribution: str = "uniform"
    seed: int = 0
    j_tau: float = 1.0
    allow_degenerate: bool = False

    def build(self) -> SpinModel:
        return generate_model(self.n_layers, self.per_layer, self.space_degree, self.distribution,
                              self.seed, j_tau=self.j_tau, allow_degenerate=self.allow_degenerate)


def _degree_range(space_degree, allow_degenerate):
    lo, hi = (space_degree, space_degree) if np.isscalar(space_degree) else space_degree
    lo, hi = int(lo), int(hi)
    floor = 0 if allow_degenerate else 4
    if not floor <= lo <= hi <= 6:
        raise ModelError(f"space degree range ({lo}, {hi}) must lie within [{floor}, 6]")
    return lo, hi


# uniform draws live on a dyadic grid: every field sum of at most a few
# hundred such values is exact in float32, so incremental updates never drift
GRID_BITS = 16


def _draw(rng, distribution, size):
    sign = rng.choice(np.array([-1.0, 1.0]), size)
    if distribution == "pm1":
        return sign.astype(DTYPE)
    # nonzero so that no drawn edge vanishes from the layer
    steps = rng.integers(1, 2**GRID_BITS + 1, size)
    return (sign * np.ldexp(steps.astype(np.float64), -GRID_BITS)).astype(DTYPE)


def generate_model(n_layers: int, per_layer: int, space_degree=(4, 6), distribution: str = "uniform",
                   seed: int = 0, *, j_tau: float = 1.0, allow_degenerate: bool = False) -> SpinModel:
    """Random layered model whose layer is a random graph of space degree 4..6.

    Each position draws its space degree uniformly from ``space_degree`` (an
    int or an inclusive ``(lo, hi)`` pair); the layer graph is a uniformly
    random simple graph with that degree sequence.  Couplings and fields come
    from ``distribution``; ``uniform`` means uniform on the nonzero multiples
    of ``2**-GRID_BITS`` in [-1, 1].  With ``allow_degenerate`` the degree may drop to 0,
    which for ``per_layer == 1`` gives a bare tau ring.
    """
    if distribution not in DISTRIBUTIONS:
        raise ModelError(f"unknown coupling distribution {distribution!r}")
    L, P = int(n_layers), int(per_layer)
    if P < 1 or L < 4:
        raise ModelError(f"need per_layer >= 1 and n_layers >= 4, got P={P}, L={L}")
    lo, hi = _degree_range(space_degree, allow_degenerate)
    if P == 1 and allow_degenerate:
        lo = hi = 0
    if hi > P - 1 or (lo == hi and (lo * P) % 2):
        raise ModelError(f"space degree ({lo}, {hi}) is unattainable with {P} positions")
    rng = np.random.default_rng(seed)
    degrees = rng.integers(lo, hi + 1, P)
    if degrees.sum() % 2:
        k = int(np.argmax(degrees < hi)) if (degrees < hi).any() else int(np.argmax(degrees > lo))
        degrees[k] += 1 if degrees[k] < hi else -1

    J = np.zeros((P, P), DTYPE)
    if degrees.any():
        graph_seed = int(rng.integers(2**31))
        graph = None
        for attempt in range(20):
            try:
                graph = nx.random_degree_sequence_graph(degrees.tolist(), seed=graph_seed + attempt, tries=20)
                break
            except (nx.NetworkXError, nx.NetworkXUnfeasible):
                continue
        if graph is None:
            raise ModelError(f"could not realise a layer graph with degrees in ({lo}, {hi})")
        edges = np.array(sorted(tuple(sorted(e)) for e in graph.edges()), np.int64)
        values = _draw(rng, distribution, len(edges))
        J[edges[:, 0], edges[:, 1]] = values
        J[edges[:, 1], edges[:, 0]] = values
    h = _draw(rng, distribution, P)
    return build_layered_model(LayerSpec(h, J), L, j_tau)


# ----------------------------------------------------------------- benchmark

@dataclass(frozen=True)
class BenchConfig:
    model: GeneratorSpec | SpinModel | str = field(default_factory=GeneratorSpec)
    engines: tuple[str, ...] = ("reference", "basic", "vector4")
    sweeps: int = 1000
    repetitions: int = 10
    betas: tuple[float, ...] = DEFAULT_BETAS
    seed: int = 0
    exp_kind: dict = field(default_factory=dict)  # engine -> exp kind; missing: engine default
    widths: tuple[int, ...] = DEFAULT_WIDTHS
    workers: int | None = None  # chains run concurrently; None: one per CPU
    coalesced_workers: int = 1
    tau_scale: float = 1.0

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if not self.engines:
            raise ValueError("at least one engine is required")
        unknown = set(self.engines) - set(ENGINES)
        if unknown:
            raise ValueError(f"unknown engines {sorted(unknown)}; choose from {sorted(ENGINES)}")
        if self.sweeps < 1:
            raise ValueError("sweeps must be at least 1")
        if not self.betas:
            raise ValueError("the beta ladder is empty")
        object.__setattr__(self, "engines", tuple(self.engines))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))

    @property
    def baseline(self) -> str:
        """Engine the speedups are measured against: ``reference`` if present, else the first."""
        return "reference" if "reference" in self.engines else self.engines[0]

    def load_model(self) -> SpinModel:
        if isinstance(self.model, SpinModel):
            return self.model
        if isinstance(self.model, GeneratorSpec):
            return self.model.build()
        from .modelio import load_model
        return load_model(self.model)


@dataclass
class EngineResult:
    engine: str
    spins: int
    sweeps: int
    reps: int
    mean_seconds: float
    sd_seconds: float
    spin_updates_per_sec: float
    speedup_vs_reference: float
    flip_rate: float
    wait: dict[int, float]
    checksum: str
    times: list[float] = field(default_factory=list)

    @property
    def min_seconds(self) -> float:
        return min(self.times)

    def row(self) -> dict:
        return {"engine": self.engine, "spins": self.spins, "sweeps": self.sweeps, "reps": self.reps,
                "mean_seconds": self.mean_seconds, "sd_seconds": self.sd_seconds,
                "spin_updates_per_sec": self.spin_updates_per_sec,
                "speedup_vs_reference": self.speedup_vs_reference, "flip_rate": self.flip_rate,
                "wait_w4": self.wait.get(4, math.nan), "wait_w32": self.wait.get(32, math.nan)}


@dataclass
class BenchReport:
    results: list[EngineResult]
    betas: tuple[float, ...]
    baseline: str
    environment: dict
    synthetic_ladder: bool = True

    def result(self, engine: str) -> EngineResult:
        for r in self.results:
            if r.engine == engine:
                return r
        raise KeyError(engine)

    def speedup(self, a: str, b: str, stat: str = "mean") -> float:
        """Time of ``b`` over time of ``a`` (how many times faster ``a`` is)."""
        ta, tb = self.result(a), self.result(b)
        if stat == "min":
            return tb.min_seconds / ta.min_seconds
        return tb.mean_seconds / ta.mean_seconds


def environment_descriptor(config: BenchConfig | None = None) -> dict:
    env = {
        "host": platform.node(),
        "machine": platform.machine(),
        "processor": platform.processor(),
        "platform": platform.platform(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "numba": numba.__version__,
        "cpu_count": os.cpu_count(),
        "build_profile": {
            "numba_opt": int(numba.config.OPT),
            "loop_vectorize": int(numba.config.LOOP_VECTORIZE),
            "slp_vectorize_vector4": 1,
            "svml": bool(getattr(numba.config, "USING_SVML", False)),
            "fastmath": False,
        },
        "timer": "time.perf_counter",
    }
    if config is not None:
        env["workers"] = _workers(config)
    return env


def _workers(config):
    return max(1, int(config.workers if config.workers is not None else (os.cpu_count() or 1)))


class _Prepared:
    """One engine with its relabelled model and a seeded initial state per chain."""

    def __init__(self, name, model, config):
        options = {"workers": config.coalesced_workers} if name == "coalesced" else {}
        try:
            self.model = prepare_for_engine(model, name)
            self.engine = make_engine(name, self.model, **options)
        except (ModelError, ValueError) as exc:
            raise BenchError(f"cannot build engine {name!r} for this model: {exc}") from exc
        self.name = name
        self.kind = config.exp_kind.get(name)
        origin = self.model.layered.origin if self.model.layered is not None else None
        self.initial = []
        for k in range(len(config.betas)):
            spins = np.random.default_rng([config.seed, k]).choice(np.array([-1, 1], np.int8), model.n_spins)
            self.initial.append(spins if origin is None else spins[origin])

    def states(self, config, widths=()):
        return [self.engine.new_state(self.initial[k],
                                      SweepParams(beta, config.tau_scale, self.kind),
                                      seed=config.seed + CHAIN_SEED_STRIDE * k, widths=widths)
                for k, beta in enumerate(config.betas)]


def _run_ladder(prep, states, sweeps, pool):
    if pool is None:
        for st in states:
            prep.engine.run(st, sweeps)
    else:
        list(pool.map(lambda st: prep.engine.run(st, sweeps), states))


def _checksum(prep, states):
    import hashlib
    digest = hashlib.sha256()
    origin = prep.model.layered.origin if prep.model.layered is not None else None
    for st in states:
        spins = st.spins
        if origin is not None:
            canon = np.empty_like(spins)
            canon[origin] = spins
            spins = canon
        digest.update(spins.tobytes())
    return digest.hexdigest()[:16]


def run_benchmark(config: BenchConfig, progress=None) -> BenchReport:
    """Warm up once (untimed, collecting statistics), then time every repetition."""
    model = config.load_model()
    workers = _workers(config)
    prepared = [_Prepared(name, model, config) for name in config.engines]
    resolution = time.get_clock_info("perf_counter").resolution
    sweeps = config.sweeps
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        stats = {}
        for prep in prepared:
            states = prep.states(config, config.widths)
            t0 = time.perf_counter()
            _run_ladder(prep, states, sweeps, pool)
            stats[prep.name] = (states, time.perf_counter() - t0)
        shortest = min(t for _, t in stats.values())
        if resolution > 0.01 * shortest:
            factor = 2 ** math.ceil(math.log2(100 * resolution / max(shortest, 1e-12)))
            warnings.warn(f"timer resolution {resolution:g}s is over 1% of a {shortest:g}s run; "
                          f"sweeps raised from {sweeps} to {sweeps * factor}")
            sweeps *= factor
            for prep in prepared:
                states = prep.states(config, config.widths)
                _run_ladder(prep, states, sweeps, pool)
                stats[prep.name] = (states, 0.0)

        times = {p.name: [] for p in prepared}
        checks = {p.name: set() for p in prepared}
        for rep in range(config.repetitions):
            for prep in prepared:
                states = prep.states(config)
                t0 = time.perf_counter()
                _run_ladder(prep, states, sweeps, pool)
                times[prep.name].append(time.perf_counter() - t0)
                checks[prep.name].add(_checksum(prep, states))
                if progress is not None:
                    progress(rep, prep.name, times[prep.name][-1])
    finally:
        if pool is not None:
            pool.shutdown()

    base_mean = statistics.fmean(times[config.baseline])
    results = []
    for prep in prepared:
        states, _ = stats[prep.name]
        warm = _checksum(prep, states)
        if checks[prep.name] != {warm}:
            raise BenchError(f"engine {prep.name!r} produced different final states across repetitions")
        ts = times[prep.name]
        mean = statistics.fmean(ts)
        sd = statistics.stdev(ts) if len(ts) > 1 else 0.0
        attempts = sum(st.stats.attempts for st in states)
        flips = sum(st.stats.flips for st in states)
        hits = {w: 0 for w in config.widths}
        groups = {w: 0 for w in config.widths}
        for st in states:
            for w in config.widths:
                k = st.stats.widths.index(w)
                hits[w] += int(st.stats.groups[k, 0])
                groups[w] += int(st.stats.groups[k, 1])
        wait = {w: hits[w] / groups[w] if groups[w] else math.nan for w in config.widths}
        updates = model.n_spins * sweeps * len(config.betas)
        results.append(EngineResult(
            engine=prep.name, spins=model.n_spins, sweeps=sweeps, reps=config.repetitions,
            mean_seconds=mean, sd_seconds=sd, spin_updates_per_sec=updates / mean,
            speedup_vs_reference=1.0 if prep.name == config.baseline else base_mean / mean,
            flip_rate=flips / attempts if attempts else math.nan, wait=wait, checksum=warm, times=ts))
    return BenchReport(results, config.betas, config.baseline, environment_descriptor(config))


# ------------------------------------------------------- exponential timing

@numba.njit(cache=True, nogil=True)
def _loop_fast(x, out):
    for i in range(x.size):
        out[i] = exp_fast_scalar(x[i])


@numba.njit(cache=True, nogil=True)
def _loop_accurate(x, out):
    for i in range(x.size):
        out[i] = exp_accurate_scalar(x[i])


@numba.njit(cache=True, nogil=True)
def _loop_libm(x, out):
    for i in range(x.size):
        out[i] = exp_exact_scalar(x[i])


EXP_LOOPS = {"fast": _loop_fast, "accurate": _loop_accurate, "libm": _loop_libm}


def exp_microbenchmark(size: int = 1 << 20, reps: int = 20, seed: int = 0) -> dict[str, float]:
    """Nanoseconds per element (min over ``reps``) of each exponential in a compiled loop.

    Inputs are uniform on [-20, 0], the range of Metropolis acceptance
    arguments; ``libm`` is the C library's double-precision ``exp``.
    """
    x = np.random.default_rng(seed).uniform(-20.0, 0.0, size).astype(np.float32)
    out = np.empty_like(x)
    result = {}
    for name, loop in EXP_LOOPS.items():
        loop(x, out)
        best = math.inf
        for _ in range(reps):
            t0 = time.perf_counter()
            loop(x, out)
            best = min(best, time.perf_counter() - t0)
        result[name] = best / size * 1e9
    return result


# ------------------------------------------------------------------- reports

def report_to_dict(report: BenchReport) -> dict:
    return {
        "baseline": report.baseline,
        "betas": list(report.betas),
        "synthetic_ladder": report.synthetic_ladder,
        "environment": report.environment,
        "results": [r.row() for r in report.results],
    }


def write_report(report: BenchReport, fmt: str = "csv", out: TextIO | str | os.PathLike | None = None) -> str:
    """Render ``report`` as CSV or JSON; also write it to ``out`` (stream or path) if given."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in report.results:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.row().items()})
        text = buf.getvalue()
    elif fmt == "json":
        text = json.dumps(report_to_dict(report), indent=2) + "\n"
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if out is None:
        return text
    if hasattr(out, "write"):
        out.write(text)
        return text
    try:
        with open(out, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {os.fspath(out)}: {exc.strerror}") from exc
    return text


def read_report_json(text: str) -> dict:
    return json.loads(text)

"""Self-checks behind ``metrovec validate``.

Each suite returns a list of ``Check`` records; a suite passes when every
check does.  ``scale`` shrinks the workload for quick runs (1.0 is the full
acceptance-sized workload).
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import fastexp
from .bench import generate_model
from .model import prepare_for_engine
from .oracle import chain_statistics_test, enumerate_boltzmann, trajectory_equivalence
from .rng import InterlacedMt, Mt19937
from .sweep import SweepParams, make_engine

SUITES = ("rng", "exp", "trajectory", "boltzmann")


@dataclass
class Check:
    suite: str
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_dict(self):
        return asdict(self)


def _n(full, scale, floor=1):
    return max(floor, int(round(full * scale)))


def _timed(suite, name, fn):
    t0 = time.perf_counter()
    passed, detail = fn()
    return Check(suite, name, bool(passed), detail, time.perf_counter() - t0)


# ---------------------------------------------------------------------- rng

def canonical_mt_outputs(seed: int, n: int) -> np.ndarray:
    """Raw MT19937 outputs from numpy's generator with ``init_genrand`` seeding."""
    bg = np.random.MT19937(0)
    bg._legacy_seeding(int(seed))
    return bg.random_raw(n).astype(np.uint32)


def rng_suite(scale: float = 1.0, seeds=(1, 5489, 2024), lanes=(4, 128)) -> list[Check]:
    draws = _n(1_000_000, scale, 2000)
    checks = []
    for seed in seeds:
        def scalar(seed=seed):
            ours = Mt19937.seeded(seed).draw_u32(draws)
            ref = canonical_mt_outputs(seed, draws)
            bad = np.flatnonzero(ours != ref)
            return bad.size == 0, {"draws": draws, "first_mismatch": int(bad[0]) if bad.size else None}
        checks.append(_timed("rng", f"scalar seed {seed}", scalar))
    for K in lanes:
        def interlaced(K=K):
            blocks = _n(1_000_000, scale if K <= 4 else scale / 8, 2000)
            base = 17
            block = InterlacedMt.from_base_seed(base, K).draw_u32(blocks)
            bad_lanes = [k for k in range(K)
                         if not np.array_equal(block[:, k], Mt19937.seeded(base + k).draw_u32(blocks))]
            return not bad_lanes, {"lanes": K, "blocks": blocks, "bad_lanes": bad_lanes}
        checks.append(_timed("rng", f"interlaced K={K}", interlaced))
    return checks


# ---------------------------------------------------------------------- exp

FAST_BOUNDS = (-0.0395, 0.0205)
ACCURATE_BOUNDS = (-0.011, 0.0055)
OCTAVE_MEAN_BOUND = 0.002


def exp_suite(scale: float = 1.0) -> list[Check]:
    samples = _n(10_000_000, scale, 10_001)

    def fast():
        r = fastexp.error_scan("fast", -80.0, 80.0, samples)
        octaves = fastexp.octave_means("fast", -80.0, 80.0, samples)
        worst = max(abs(m) for _, m in octaves)
        ok = r.min_rel_error >= FAST_BOUNDS[0] and r.max_rel_error <= FAST_BOUNDS[1] and worst <= OCTAVE_MEAN_BOUND
        return ok, {"min": r.min_rel_error, "max": r.max_rel_error, "mean": r.mean_rel_error,
                    "worst_octave_mean": worst, "samples": samples}

    def accurate():
        r = fastexp.error_scan("accurate", -21.8, 22.1, samples)
        ok = ACCURATE_BOUNDS[0] < r.min_rel_error and r.max_rel_error < ACCURATE_BOUNDS[1]
        return ok, {"min": r.min_rel_error, "max": r.max_rel_error, "mean": r.mean_rel_error, "samples": samples}

    def masking():
        lo = np.float32(-31.5 * math.log(2))
        pos = np.concatenate([np.zeros(1, np.float32), np.geomspace(1e-30, 1e30, 2001).astype(np.float32)])
        below = -np.geomspace(-float(np.nextafter(lo, np.float32(-np.inf))), 1e30, 2001).astype(np.float32)
        inside = np.linspace(float(lo), -1e-6, 20001).astype(np.float32)
        ones = bool(np.all(fastexp.exp_accurate(pos) == np.float32(1.0)))
        zeros = bool(np.all(fastexp.exp_accurate(below) == np.float32(0.0)))
        positive = bool(np.all(fastexp.exp_accurate(inside) > 0))
        return ones and zeros and positive, {"ones": ones, "zeros": zeros, "positive_inside": positive}

    return [_timed("exp", "fast bounds", fast), _timed("exp", "accurate bounds", accurate),
            _timed("exp", "accurate masking", masking)]


# --------------------------------------------------------------- trajectory

def tier_model(seed: int = 11):
    """96-spin layered model: 16 layers of 6 positions."""
    return generate_model(16, 6, (4, 5), "uniform", seed)


def trajectory_suite(scale: float = 1.0, seeds=range(10), beta: float = 0.6) -> list[Check]:
    sweeps = _n(10_000, scale, 50)
    model = tier_model()
    checks = []
    for kind in ("exact", "fast"):
        def ref_basic(kind=kind):
            params = SweepParams(beta, 1.0, kind)
            results = [trajectory_equivalence("reference", "basic", model, params, sweeps, seed=s) for s in seeds]
            bad = [(s, r.first_sweep, r.first_spin) for s, r in zip(seeds, results) if not r.equal]
            return not bad, {"seeds": len(results), "sweeps": sweeps, "diverged": bad}
        checks.append(_timed("trajectory", f"reference = basic ({kind} exp)", ref_basic))

    def v4_flags():
        pm = prepare_for_engine(model, "vector4")
        on, off = make_engine("vector4", pm, lane_parallel_updates=True), make_engine("vector4", pm, lane_parallel_updates=False)
        r = trajectory_equivalence(on, off, pm, SweepParams(beta), sweeps, seed=7)
        return r.equal, {"sweeps": sweeps, "first_sweep": r.first_sweep, "first_spin": r.first_spin}
    checks.append(_timed("trajectory", "vector4 grouped = per-lane", v4_flags))

    def coalesced_workers():
        pm = prepare_for_engine(model, "coalesced")
        W = pm.layered.width
        csweeps = _n(1_000, scale, 20)
        base = make_engine("coalesced", pm, workers=1)
        bad = []
        for w in sorted({2, W}):
            r = trajectory_equivalence(base, make_engine("coalesced", pm, workers=w), pm, SweepParams(beta),
                                       csweeps, seed=7)
            if not r.equal:
                bad.append((w, r.first_sweep, r.first_spin))
        return not bad, {"width": W, "sweeps": csweeps, "diverged": bad}
    checks.append(_timed("trajectory", "coalesced worker invariance", coalesced_workers))

    def negative_control():
        r = _diverges_with_fast(model, beta, _n(2000, scale, 200))
        return not r.equal and r.first_sweep is not None, {"first_sweep": r.first_sweep,
                                                            "first_spin": r.first_spin}
    checks.append(_timed("trajectory", "exact vs fast diverges", negative_control))
    return checks


def _diverges_with_fast(model, beta, sweeps):
    from .sweep import ReferenceEngine

    class _FastReference(ReferenceEngine):
        default_exp = "fast"

    return trajectory_equivalence(make_engine("reference", model), _FastReference(model), model,
                                  SweepParams(beta), sweeps, seed=3)


# ---------------------------------------------------------------- boltzmann

def boltzmann_model(seed: int = 1):
    """12-spin layered model: 4 layers of a 3-position triangle."""
    return generate_model(4, 3, (2, 2), "uniform", seed, allow_degenerate=True)


def boltzmann_suite(scale: float = 1.0, betas=(0.2, 0.5, 1.0),
                    engines=("reference", "basic", "vector4", "coalesced")) -> list[Check]:
    # shorter chains at low temperature undersample the slow modes
    sweeps = _n(250_000, scale, 50_000)
    model = boltzmann_model()
    checks = []
    for beta in betas:
        exact = enumerate_boltzmann(model, beta)
        for eng in engines:
            def run(eng=eng, beta=beta, exact=exact):
                r = chain_statistics_test(model, eng, SweepParams(beta, 1.0, "exact"), sweeps,
                                          burn_in=1000, replicates=4, exact=exact)
                return r.passed, {c.name: {"exact": c.exact, "estimate": c.estimate, "se": c.stderr, "z": c.z}
                                  for c in r.checks} | {"sweeps": 4 * sweeps}
            checks.append(_timed("boltzmann", f"{eng} beta={beta}", run))
    return checks


RUNNERS = {"rng": rng_suite, "exp": exp_suite, "trajectory": trajectory_suite, "boltzmann": boltzmann_suite}


def run_suites(names, scale: float = 1.0, progress=None) -> list[Check]:
    out = []
    for name in names:
        for check in RUNNERS[name](scale):
            out.append(check)
            if progress is not None:
                progress(check)
    return out

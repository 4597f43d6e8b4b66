"""Sweep parameters, chain state, instrumentation and field bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..model import SpinModel
from ..rng import InterlacedMt, Mt19937
from ._common import EXP_KINDS, accept_prob


@dataclass(frozen=True)
class SweepParams:
    beta: float
    tau_scale: float = 1.0
    exp_kind: str | None = None  # None: the engine's default

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")
        if not np.isfinite(self.tau_scale):
            raise ValueError("tau_scale must be finite")
        if self.exp_kind is not None and self.exp_kind not in EXP_KINDS:
            raise ValueError(f"unknown exp_kind {self.exp_kind!r}")

    def resolved(self, default: str) -> "SweepParams":
        if self.exp_kind is not None:
            return self
        return SweepParams(self.beta, self.tau_scale, default)


def _check_widths(widths) -> tuple[int, ...]:
    ws = tuple(sorted({int(w) for w in widths}))
    if any(w < 1 for w in ws):
        raise ValueError("group widths must be positive")
    return ws


@dataclass
class FlipStats:
    widths: tuple[int, ...] = ()
    attempts: int = 0
    flips: int = 0
    groups: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.widths = _check_widths(self.widths)
        if self.groups is None:
            self.groups = np.zeros((len(self.widths), 2), np.int64)

    @property
    def flip_rate(self) -> float:
        return self.flips / self.attempts if self.attempts else 0.0

    @property
    def group_wait(self) -> dict[int, tuple[int, int]]:
        return {w: (int(a), int(b)) for w, (a, b) in zip(self.widths, self.groups)}

    def add_width(self, w: int) -> None:
        if w not in self.widths:
            old = self.group_wait
            self.widths = _check_widths(self.widths + (w,))
            self.groups = np.array([old.get(v, (0, 0)) for v in self.widths], np.int64).reshape(-1, 2)


def collect_wait_stats(stats: FlipStats, widths) -> dict[int, float]:
    """Fraction of width-w groups that held at least one flip."""
    out = {}
    recorded = stats.group_wait
    for w in widths:
        if w not in recorded:
            raise ValueError(f"group width {w} was not recorded")
        hit, total = recorded[w]
        out[w] = hit / total if total else 0.0
    return out


@dataclass
class SweepState:
    spins: np.ndarray
    h_eff_space: np.ndarray
    h_eff_tau: np.ndarray
    params: SweepParams
    rng: Mt19937 | InterlacedMt
    stats: FlipStats = field(default_factory=FlipStats)
    sweep_count: int = 0

    def copy(self) -> "SweepState":
        stats = FlipStats(self.stats.widths, self.stats.attempts, self.stats.flips, self.stats.groups.copy())
        return SweepState(self.spins.copy(), self.h_eff_space.copy(), self.h_eff_tau.copy(),
                          self.params, self.rng.copy(), stats, self.sweep_count)

    def checksum(self) -> str:
        import hashlib

        d = hashlib.sha256()
        for a in (self.spins, self.h_eff_space, self.h_eff_tau):
            d.update(np.ascontiguousarray(a).tobytes())
        return d.hexdigest()[:16]


def recompute_fields(model: SpinModel, spins) -> tuple[np.ndarray, np.ndarray]:
    """From-scratch effective fields: (h + sum_space J s, sum_tau J s) in float32."""
    s = np.asarray(spins, dtype=np.float64)
    contrib = model.couplings.astype(np.float64) * s[model.targets]
    space = np.bincount(model.sources, np.where(model.is_tau, 0.0, contrib), minlength=model.n_spins)
    tau = np.bincount(model.sources, np.where(model.is_tau, contrib, 0.0), minlength=model.n_spins)
    return (space + model.h).astype(np.float32), tau.astype(np.float32)


def field_scale(model: SpinModel) -> np.ndarray:
    """|h_i| + sum_j |J_ij|, the magnitude bound of spin i's fields."""
    a = np.bincount(model.sources, np.abs(model.couplings.astype(np.float64)), minlength=model.n_spins)
    return np.abs(model.h.astype(np.float64)) + a


def _grid_exponent(values: np.ndarray) -> int | None:
    """Exponent of the lowest set bit over all nonzero float32 ``values``."""
    v = np.asarray(values, np.float32)
    v = v[v != 0]
    if v.size == 0:
        return None
    frac, ex = np.frexp(v.astype(np.float64))
    mant = np.abs(np.ldexp(frac, 24)).astype(np.int64)
    low = (mant & -mant).astype(np.float64)
    return int((ex - 24 + np.log2(low).astype(np.int64)).min())


def incremental_fields_exact(model: SpinModel) -> bool:
    """Whether incremental field updates can never round.

    True when every h and J is a multiple of a common power of two ``2**q`` and
    each spin's magnitude bound ``|h| + sum |J|`` stays below ``2**(24 + q)``:
    every partial sum is then a float32 value.
    """
    q = _grid_exponent(np.concatenate([model.h, model.couplings]))
    if q is None:
        return True
    return bool(field_scale(model).max() < 2.0 ** (24 + q))


def field_ulp_error(model: SpinModel, state: SweepState) -> float:
    """Worst incremental-vs-recomputed field gap, in float32 ULPs of the field's scale."""
    hs, ht = recompute_fields(model, state.spins)
    ulp = np.spacing(np.maximum(field_scale(model), 1e-30).astype(np.float32)).astype(np.float64)
    gap = np.maximum(
        np.abs(state.h_eff_space.astype(np.float64) - hs),
        np.abs(state.h_eff_tau.astype(np.float64) - ht),
    )
    return float((gap / ulp).max()) if gap.size else 0.0


def initial_spins(n: int, initial) -> np.ndarray:
    if isinstance(initial, (int, np.integer)):
        return np.random.default_rng(int(initial)).choice(np.array([-1, 1], np.int8), n)
    s = np.asarray(initial)
    if s.shape != (n,):
        raise ValueError(f"expected {n} initial spins, got shape {s.shape}")
    if not np.all((s == 1) | (s == -1)):
        raise ValueError("spin values must be -1 or +1")
    return s.astype(np.int8)


def init_state(model: SpinModel, initial, params: SweepParams, rng=None, *, seed: int = 0,
               lanes: int = 1, widths=()) -> SweepState:
    """Spins from ``initial`` (signs, or an int seed for random signs) with fresh fields.

    Without ``rng`` a generator seeded from ``seed`` is created: scalar for one
    lane, otherwise ``lanes`` interlaced generators with seeds ``seed + k``.
    """
    spins = initial_spins(model.n_spins, initial)
    hs, ht = recompute_fields(model, spins)
    if rng is None:
        rng = Mt19937.seeded(seed) if lanes == 1 else InterlacedMt.from_base_seed(seed, lanes)
    return SweepState(spins, hs, ht, params, rng, FlipStats(widths))


def flip_probability(state: SweepState, i: int, default_kind: str = "exact") -> float:
    p = state.params.resolved(default_kind)
    return float(accept_prob(EXP_KINDS[p.exp_kind], np.float32(p.beta), np.float32(p.tau_scale),
                             np.int8(state.spins[i]), state.h_eff_space[i], state.h_eff_tau[i]))

"""Sparse Ising models, layered (Suzuki-Trotter shaped) construction and spin reorderings.

Adjacency is stored as CSR over directed edges: spin ``i`` owns the slots
``offsets[i]:offsets[i+1]`` of ``targets``/``couplings``/``is_tau``.  Every
undirected edge appears once in each endpoint's list.  Layered models keep
their two tau edges in the last two slots of every list.

Index convention for layered models: the unpermuted index of ``(layer, pos)``
is ``layer * P + pos``.  ``LayeredMeta.origin`` maps a current index back to
that unpermuted index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

DTYPE = np.float32


class ModelError(ValueError):
    pass


class EdgeRecord(NamedTuple):
    target_spin: int
    coupling: float
    is_tau: bool = False


@dataclass(frozen=True)
class SpinEdgeList:
    edges: tuple[EdgeRecord, ...]
    tau_count: int


@dataclass(frozen=True)
class LayerSpec:
    """One layer: per-position fields and a symmetric zero-diagonal coupling matrix."""

    h: np.ndarray
    couplings: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=DTYPE).reshape(-1)
        J = np.asarray(self.couplings, dtype=DTYPE)
        if J.shape != (h.size, h.size):
            raise ModelError(f"coupling matrix shape {J.shape} does not match {h.size} positions")
        if np.any(np.diag(J) != 0):
            raise ModelError("layer spec contains self-edges")
        if not np.array_equal(J, J.T):
            raise ModelError("layer spec couplings are not symmetric")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "couplings", J)

    @property
    def n_positions(self) -> int:
        return self.h.size


ORDERINGS = ("identity", "vector4", "coalesce", "custom")


@dataclass(frozen=True)
class LayeredMeta:
    n_layers: int
    per_layer: int
    ordering: str = "identity"
    width: int | None = None
    origin: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.ordering not in ORDERINGS:
            raise ModelError(f"unknown ordering {self.ordering!r}")
        if self.n_layers < 4:
            raise ModelError(f"layered models need at least 4 layers, got {self.n_layers}")
        if self.per_layer < 1:
            raise ModelError("layers need at least one position")
        n = self.n_layers * self.per_layer
        if self.origin is None:
            origin = np.arange(n, dtype=np.int64)
        else:
            origin = np.asarray(self.origin, dtype=np.int64)
            if origin.shape != (n,) or not np.array_equal(np.sort(origin), np.arange(n)):
                raise ModelError("layer origin map is not a permutation")
        origin.setflags(write=False)
        object.__setattr__(self, "origin", origin)

    @property
    def kind(self) -> str:
        return f"coalesce({self.width})" if self.ordering == "coalesce" else self.ordering

    def layer_pos(self) -> tuple[np.ndarray, np.ndarray]:
        """(layer, position) of every current spin index."""
        return np.divmod(self.origin, self.per_layer)

    def __eq__(self, other):
        if not isinstance(other, LayeredMeta):
            return NotImplemented
        return (
            (self.n_layers, self.per_layer, self.ordering, self.width)
            == (other.n_layers, other.per_layer, other.ordering, other.width)
            and np.array_equal(self.origin, other.origin)
        )


def _frozen(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpinModel:
    n_spins: int
    h: np.ndarray
    offsets: np.ndarray
    targets: np.ndarray
    couplings: np.ndarray
    is_tau: np.ndarray
    layered: LayeredMeta | None = None

    def __post_init__(self):
        n = int(self.n_spins)
        object.__setattr__(self, "n_spins", n)
        object.__setattr__(self, "h", _frozen(self.h, DTYPE))
        object.__setattr__(self, "offsets", _frozen(self.offsets, np.int64))
        object.__setattr__(self, "targets", _frozen(self.targets, np.int32))
        object.__setattr__(self, "couplings", _frozen(self.couplings, DTYPE))
        object.__setattr__(self, "is_tau", _frozen(self.is_tau, np.bool_))
        self._validate()

    # -- construction -------------------------------------------------------

    @classmethod
    def from_adjacency(cls, h, adjacency: Sequence[Iterable], layered=None) -> "SpinModel":
        """Build from per-spin edge lists, keeping the given slot order.

        Each entry of ``adjacency`` is an iterable of ``EdgeRecord`` or
        ``(target, coupling[, is_tau])`` tuples.
        """
        h = np.asarray(h, dtype=DTYPE)
        offsets = [0]
        targets, couplings, tau = [], [], []
        for edges in adjacency:
            for e in edges:
                e = EdgeRecord(*e)
                targets.append(e.target_spin)
                couplings.append(e.coupling)
                tau.append(bool(e.is_tau))
            offsets.append(len(targets))
        if len(offsets) - 1 != h.size:
            raise ModelError(f"{len(offsets) - 1} edge lists for {h.size} spins")
        return cls(h.size, h, offsets, targets, couplings, tau, layered)

    @classmethod
    def from_undirected(cls, n_spins, h, i, j, J, tau=None, layered=None) -> "SpinModel":
        """Build from an undirected edge list in canonical slot order.

        Canonical order: space edges by ascending target, then tau edges by
        ascending target.
        """
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        J = np.asarray(J, dtype=DTYPE)
        tau = np.zeros(i.size, bool) if tau is None else np.asarray(tau, dtype=bool)
        if np.any(i == j):
            raise ModelError("self-edges are not allowed")
        src = np.concatenate([i, j])
        dst = np.concatenate([j, i])
        cpl = np.concatenate([J, J])
        tt = np.concatenate([tau, tau])
        order = np.lexsort((dst, tt, src))
        counts = np.bincount(src, minlength=n_spins) if src.size else np.zeros(n_spins, np.int64)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        h = np.zeros(n_spins, DTYPE) if h is None else h
        return cls(n_spins, h, offsets, dst[order], cpl[order], tt[order], layered)

    # -- validation ---------------------------------------------------------

    def _validate(self):
        n = self.n_spins
        if self.h.shape != (n,):
            raise ModelError(f"expected {n} local fields, got {self.h.shape}")
        if self.offsets.shape != (n + 1,) or self.offsets[0] != 0 or np.any(np.diff(self.offsets) < 0):
            raise ModelError("malformed CSR offsets")
        m = int(self.offsets[-1])
        if not (self.targets.size == self.couplings.size == self.is_tau.size == m):
            raise ModelError("edge arrays disagree in length")
        if m and (self.targets.min() < 0 or self.targets.max() >= n):
            raise ModelError("edge target outside the model")
        src = self.sources
        if np.any(src == self.targets):
            raise ModelError("self-edges are not allowed")
        bits = self.couplings.view(np.uint32)
        fwd = np.lexsort((self.is_tau, bits, self.targets, src))
        rev = np.lexsort((self.is_tau, bits, src, self.targets))
        same = (
            np.array_equal(src[fwd], self.targets[rev])
            and np.array_equal(self.targets[fwd], src[rev])
            and np.array_equal(bits[fwd], bits[rev])
            and np.array_equal(self.is_tau[fwd], self.is_tau[rev])
        )
        if not same:
            raise ModelError("adjacency is not symmetric")
        if m:
            key = src.astype(np.int64) * n + self.targets
            if np.unique(key).size != m:
                raise ModelError("duplicate edges between the same pair of spins")
        if self.layered is not None:
            self._validate_layers()

    def _validate_layers(self):
        meta = self.layered
        L, P = meta.n_layers, meta.per_layer
        if L * P != self.n_spins:
            raise ModelError(f"{L} layers x {P} positions != {self.n_spins} spins")
        layer, pos = meta.layer_pos()
        src = self.sources
        t = self.is_tau
        if np.any(np.bincount(src[t], minlength=self.n_spins) != 2):
            raise ModelError("every spin of a layered model needs exactly two tau edges")
        dl = (layer[self.targets[t]] - layer[src[t]]) % L
        if np.any(pos[self.targets[t]] != pos[src[t]]) or np.any((dl != 1) & (dl != L - 1)):
            raise ModelError("tau edges must join the same position in adjacent layers")
        s = ~t
        if np.any(layer[self.targets[s]] != layer[src[s]]):
            raise ModelError("space edges must stay inside a layer")
        # identical layers: compare each layer's positions/couplings against layer 0
        key_pos = pos[src[s]] * P + pos[self.targets[s]]
        order = np.lexsort((key_pos, layer[src[s]]))
        per_layer = np.bincount(layer[src[s]], minlength=L)
        if np.any(per_layer != per_layer[0]):
            raise ModelError("layers do not share one space topology")
        ks = key_pos[order].reshape(L, -1)
        cs = self.couplings[s][order].view(np.uint32).reshape(L, -1)
        hs = np.empty((L, P), np.uint32)
        hs[layer, pos] = self.h.view(np.uint32)
        if np.any(ks != ks[0]) or np.any(cs != cs[0]) or np.any(hs != hs[0]):
            raise ModelError("layers are not identical copies")
        tau_J = self.couplings[t].view(np.uint32)
        if tau_J.size and np.any(tau_J != tau_J[0]):
            raise ModelError("tau couplings must share one value")

    # -- views --------------------------------------------------------------

    @cached_property
    def sources(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_spins, dtype=np.int32), np.diff(self.offsets))

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    @cached_property
    def tau_counts(self) -> np.ndarray:
        return np.bincount(self.sources[self.is_tau], minlength=self.n_spins)

    @property
    def j_tau(self) -> float | None:
        return float(self.couplings[self.is_tau][0]) if self.is_tau.any() else None

    def edge_list(self, i: int) -> SpinEdgeList:
        a, b = self.offsets[i], self.offsets[i + 1]
        edges = tuple(
            EdgeRecord(int(t), float(c), bool(k))
            for t, c, k in zip(self.targets[a:b], self.couplings[a:b], self.is_tau[a:b])
        )
        return SpinEdgeList(edges, sum(e.is_tau for e in edges))

    @property
    def adjacency(self) -> list[SpinEdgeList]:
        return [self.edge_list(i) for i in range(self.n_spins)]

    def undirected(self):
        """(i, j, J, is_tau) arrays with i < j, each edge once, sorted by (i, j)."""
        src = self.sources
        keep = src < self.targets
        i, j = src[keep], self.targets[keep]
        order = np.lexsort((j, i))
        return i[order], j[order], self.couplings[keep][order], self.is_tau[keep][order]

    def is_tau_last(self) -> bool:
        for i in range(self.n_spins):
            a, b = self.offsets[i], self.offsets[i + 1]
            k = int(self.tau_counts[i])
            if not self.is_tau[b - k : b].all():
                return False
        return True

    def canonical(self) -> tuple:
        """Order-free description used for equality."""
        src = self.sources
        bits = self.couplings.view(np.uint32)
        order = np.lexsort((self.targets, src))
        return (
            self.n_spins,
            self.h.view(np.uint32).tobytes(),
            src[order].tobytes(),
            self.targets[order].tobytes(),
            bits[order].tobytes(),
            self.is_tau[order].tobytes(),
            self.layered,
        )

    def __eq__(self, other):
        if not isinstance(other, SpinModel):
            return NotImplemented
        return self.canonical() == other.canonical()

    def __hash__(self):
        return id(self)


@dataclass(frozen=True)
class SpinPermutation:
    """``forward[old] = new`` and ``inverse[new] = old``."""

    forward: np.ndarray
    inverse: np.ndarray = None
    ordering: str = "custom"
    width: int | None = None

    def __post_init__(self):
        fwd = np.asarray(self.forward, dtype=np.int64)
        n = fwd.size
        if np.any(fwd < 0) or np.any(fwd >= n) or np.unique(fwd).size != n:
            raise ModelError("permutation is not a bijection")
        inv = np.empty(n, np.int64)
        inv[fwd] = np.arange(n)
        if self.inverse is not None and not np.array_equal(np.asarray(self.inverse), inv):
            raise ModelError("inverse does not undo forward")
        object.__setattr__(self, "forward", _frozen(fwd, np.int64))
        object.__setattr__(self, "inverse", _frozen(inv, np.int64))

    def __len__(self):
        return self.forward.size

    def invert(self) -> "SpinPermutation":
        return SpinPermutation(self.inverse, self.forward)

    def permute_state(self, values: np.ndarray) -> np.ndarray:
        """Relabel a per-spin array: output[forward[i]] = values[i]."""
        values = np.asarray(values)
        return values[self.inverse]


# -- operations ---------------------------------------------------------------


def build_layered_model(layer: LayerSpec, n_layers: int, j_tau: float) -> SpinModel:
    """Stack ``n_layers`` copies of ``layer`` joined into a tau ring of coupling ``j_tau``."""
    if not isinstance(layer, LayerSpec):
        layer = LayerSpec(*layer)
    L, P = int(n_layers), layer.n_positions
    if L < 4:
        raise ModelError(f"layered models need at least 4 layers, got {L}")
    pi, pj = np.nonzero(np.triu(layer.couplings != 0, 1))
    pJ = layer.couplings[pi, pj]
    base = np.arange(L)[:, None] * P
    si = (base + pi).ravel()
    sj = (base + pj).ravel()
    sJ = np.tile(pJ, L)
    ti = np.arange(L * P)
    tj = (ti + P) % (L * P)
    i = np.concatenate([si, ti])
    j = np.concatenate([sj, tj])
    J = np.concatenate([sJ, np.full(ti.size, j_tau, DTYPE)])
    tau = np.concatenate([np.zeros(si.size, bool), np.ones(ti.size, bool)])
    h = np.tile(layer.h, L)
    return SpinModel.from_undirected(L * P, h, i, j, J, tau, LayeredMeta(L, P))


def total_cost(model: SpinModel, spins) -> float:
    """-sum_i h_i s_i - sum_{edges} J_ij s_i s_j, each undirected edge counted once."""
    s = np.asarray(spins)
    if s.shape != (model.n_spins,):
        raise ValueError(f"expected {model.n_spins} spins, got shape {s.shape}")
    if not np.all((s == 1) | (s == -1)):
        raise ValueError("spin values must be -1 or +1")
    s = s.astype(np.float64)
    pair = model.couplings.astype(np.float64) * s[model.sources] * s[model.targets]
    return float(-(model.h.astype(np.float64) @ s) - 0.5 * pair.sum())


def reorder_edges_tau_last(model: SpinModel) -> SpinModel:
    """Move tau edges to the end of every list, keeping relative order otherwise."""
    if model.layered is not None and np.any(model.tau_counts != 2):
        raise ModelError("every spin of a layered model needs exactly two tau edges")
    src = model.sources
    slot = np.arange(src.size)
    order = np.lexsort((slot, model.is_tau, src))
    return SpinModel(
        model.n_spins, model.h, model.offsets, model.targets[order],
        model.couplings[order], model.is_tau[order], model.layered,
    )


def _require_layered(model: SpinModel) -> LayeredMeta:
    if model.layered is None:
        raise ModelError("operation needs a layered model")
    return model.layered


def vector4_permutation(model: SpinModel) -> SpinPermutation:
    """Split the layers into 4 sections and interlace them.

    ``new(l, p) = 4 * ((l mod L/4) * P + p) + l // (L/4)``; quadruplet ``q`` is
    new indices ``4q .. 4q+3`` and lane ``k`` is section ``k``.
    """
    meta = _require_layered(model)
    L, P = meta.n_layers, meta.per_layer
    if L % 4:
        raise ModelError(f"vector4 ordering needs a layer count divisible by 4, got {L}")
    sec = L // 4
    layer, pos = meta.layer_pos()
    fwd = 4 * ((layer % sec) * P + pos) + layer // sec
    return SpinPermutation(fwd, ordering="vector4", width=4)


def coalesce_permutation(model: SpinModel, width: int) -> SpinPermutation:
    """Interlace groups of two layers: lane ``t`` owns layers ``2t`` and ``2t+1``.

    ``new(l, p) = W * ((l mod 2) * P + p) + l // 2``.
    """
    meta = _require_layered(model)
    L, P = meta.n_layers, meta.per_layer
    if L != 2 * width:
        raise ModelError(f"coalesced ordering needs L = 2W, got L={L}, W={width}")
    layer, pos = meta.layer_pos()
    fwd = width * ((layer % 2) * P + pos) + layer // 2
    return SpinPermutation(fwd, ordering="coalesce", width=width)


def apply_permutation(model: SpinModel, perm: SpinPermutation) -> SpinModel:
    """Relabel spins: spin ``i`` of the result is spin ``perm.inverse[i]`` of ``model``."""
    if len(perm) != model.n_spins:
        raise ModelError(f"permutation of length {len(perm)} for {model.n_spins} spins")
    fwd, inv = perm.forward, perm.inverse
    deg = model.degrees[inv]
    offsets = np.concatenate([[0], np.cumsum(deg)])
    starts = model.offsets[inv]
    slots = np.repeat(starts - offsets[:-1], deg) + np.arange(offsets[-1])
    layered = None
    if model.layered is not None:
        meta = model.layered
        base = meta.origin[inv]
        ordering, width = "custom", None
        # at L = 8 the vector4 and coalesce(4) orders coincide; the label the
        # permutation carries decides
        named = sorted(_named_orders(meta.n_layers, meta.per_layer), key=lambda c: c[0] != perm.ordering)
        for candidate in named:
            if np.array_equal(candidate[2], base):
                ordering, width = candidate[0], candidate[1]
                break
        layered = LayeredMeta(meta.n_layers, meta.per_layer, ordering, width, base)
    return SpinModel(
        model.n_spins, model.h[inv], offsets, fwd[model.targets[slots]],
        model.couplings[slots], model.is_tau[slots], layered,
    )


def _named_orders(L: int, P: int):
    """(ordering, width, origin) for every named ordering valid at this shape."""
    n = L * P
    old = np.arange(n)
    layer, pos = np.divmod(old, P)
    yield "identity", None, old
    if L % 4 == 0:
        sec = L // 4
        fwd = 4 * ((layer % sec) * P + pos) + layer // sec
        origin = np.empty(n, np.int64)
        origin[fwd] = old
        yield "vector4", 4, origin
    if L % 2 == 0:
        W = L // 2
        fwd = W * ((layer % 2) * P + pos) + layer // 2
        origin = np.empty(n, np.int64)
        origin[fwd] = old
        yield "coalesce", W, origin


def infer_layered_meta(model: SpinModel, L: int, P: int) -> LayeredMeta:
    """Recognise which named ordering a layered model's tau structure follows."""
    for ordering, width, origin in _named_orders(L, P):
        meta = LayeredMeta(L, P, ordering, width, origin)
        try:
            SpinModel(model.n_spins, model.h, model.offsets, model.targets,
                      model.couplings, model.is_tau, meta)
        except ModelError:
            continue
        return meta
    raise ModelError(f"edges do not follow any known ordering of {L} layers x {P} positions")


def with_layered_meta(model: SpinModel, meta: LayeredMeta | None) -> SpinModel:
    return SpinModel(model.n_spins, model.h, model.offsets, model.targets,
                     model.couplings, model.is_tau, meta)


def prepare_for_engine(model: SpinModel, engine: str) -> SpinModel:
    """Reorder and relabel a model the way ``engine`` expects its input."""
    if engine in ("vector4", "coalesced"):
        _require_layered(model)
    m = reorder_edges_tau_last(model) if engine != "reference" else model
    if engine == "vector4" and m.layered.ordering != "vector4":
        m = apply_permutation(m, vector4_permutation(m))
    elif engine == "coalesced" and m.layered.ordering != "coalesce":
        m = apply_permutation(m, coalesce_permutation(m, m.layered.n_layers // 2))
    return m

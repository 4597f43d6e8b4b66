import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import layered, random_model, ring_layer
from metrovec.bench import generate_model
from metrovec.model import (
    EdgeRecord, LayerSpec, ModelError, SpinModel, SpinPermutation, apply_permutation,
    build_layered_model, coalesce_permutation, prepare_for_engine, reorder_edges_tau_last,
    total_cost, vector4_permutation,
)


def brute_cost(model, spins):
    """Edge-by-edge sum over each spin's own list, halving the double count."""
    c = 0.0
    for i in range(model.n_spins):
        c -= float(model.h[i]) * spins[i]
        for e in model.edge_list(i).edges:
            c -= 0.5 * e.coupling * spins[i] * spins[e.target_spin]
    return c


def random_states(n, count, seed=0):
    return np.random.default_rng(seed).choice([-1, 1], (count, n)).astype(np.int8)


def grid_layer(P=8):
    """8 positions on a ring with +1/+2/+3 links (space degree 6)."""
    J = np.zeros((P, P), np.float32)
    for a in range(P):
        for d in (1, 2):
            J[a, (a + d) % P] = J[(a + d) % P, a] = 0.5
    return LayerSpec(np.zeros(P), J)


# ------------------------------------------------------------ construction

def test_smallest_tau_ring():
    m = build_layered_model(LayerSpec([0.0], [[0.0]]), 4, 1.0)
    assert m.n_spins == 4
    assert list(m.degrees) == [2, 2, 2, 2]
    assert m.is_tau.all()
    assert sorted(e.target_spin for e in m.edge_list(0).edges) == [1, 3]


def test_full_size_spin_count():
    m = build_layered_model(LayerSpec(np.zeros(96), np.zeros((96, 96))), 256, 1.0)
    assert m.n_spins == 24_576


def test_generated_degrees_in_band():
    m = generate_model(64, 8, (4, 6), "uniform", seed=3)
    assert set(np.unique(m.degrees)) <= {6, 7, 8}
    assert np.all(m.tau_counts == 2)
    assert m.is_tau_last()
    assert m.layered.ordering == "identity"


def test_tau_ring_structure():
    m = layered(P=5, L=6)
    L, P = 6, 5
    for i in range(m.n_spins):
        layer, pos = divmod(i, P)
        tau = {e.target_spin for e in m.edge_list(i).edges if e.is_tau}
        assert tau == {((layer + 1) % L) * P + pos, ((layer - 1) % L) * P + pos}


def test_rejects_short_ring_and_asymmetry():
    with pytest.raises(ModelError):
        build_layered_model(LayerSpec([0.0], [[0.0]]), 3, 1.0)
    with pytest.raises(ModelError):
        LayerSpec([0.0, 0.0], [[0.0, 1.0], [0.5, 0.0]])
    with pytest.raises(ModelError):
        LayerSpec([0.0], [[1.0]])


def test_from_adjacency_rejects_asymmetric():
    with pytest.raises(ModelError):
        SpinModel.from_adjacency([0, 0], [[EdgeRecord(1, 1.0)], [EdgeRecord(0, 0.5)]])
    with pytest.raises(ModelError):
        SpinModel.from_adjacency([0, 0], [[EdgeRecord(1, 1.0)], []])


def test_adjacency_symmetric(small_layered):
    m = small_layered
    for i in range(m.n_spins):
        for e in m.edge_list(i).edges:
            back = [b for b in m.edge_list(e.target_spin).edges if b.target_spin == i]
            assert len(back) == 1
            assert back[0].coupling == e.coupling and back[0].is_tau == e.is_tau


# ------------------------------------------------------------- total cost

def test_two_spin_costs(two_spin):
    assert total_cost(two_spin, [1, 1]) == -1.0
    assert total_cost(two_spin, [1, -1]) == 1.0


def test_cost_rejects_bad_values(two_spin):
    with pytest.raises(ValueError):
        total_cost(two_spin, [1, 0])
    with pytest.raises(ValueError):
        total_cost(two_spin, [1, 1, 1])


def test_cost_matches_brute_force():
    m = random_model(12, np.random.default_rng(4), 0.5)
    for s in random_states(12, 50):
        assert total_cost(m, s) == pytest.approx(brute_cost(m, s), abs=1e-9)


# ---------------------------------------------------------------- reorder

def test_reorder_single_list():
    # spin 0 of a 4-ring with two space edges placed around its tau edges
    adj = [
        [EdgeRecord(3, 1.0, True), EdgeRecord(1, 0.5), EdgeRecord(2, 0.25), EdgeRecord(4, 1.0, True)],
        [EdgeRecord(0, 0.5)], [EdgeRecord(0, 0.25)], [EdgeRecord(0, 1.0, True)], [EdgeRecord(0, 1.0, True)],
    ]
    m = SpinModel.from_adjacency(np.zeros(5), adj)
    r = reorder_edges_tau_last(m)
    assert [(e.target_spin, e.is_tau) for e in r.edge_list(0).edges] == [(1, False), (2, False), (3, True), (4, True)]
    assert reorder_edges_tau_last(r).targets.tobytes() == r.targets.tobytes()


def test_reorder_keeps_cost(small_layered):
    shuffled = _shuffle_slots(small_layered, 9)
    assert not shuffled.is_tau_last()
    r = reorder_edges_tau_last(shuffled)
    assert r.is_tau_last()
    for s in random_states(r.n_spins, 100, 1):
        assert total_cost(r, s) == total_cost(shuffled, s)


def test_layered_model_requires_two_tau_edges():
    m = build_layered_model(LayerSpec([0.0], [[0.0]]), 4, 1.0)
    with pytest.raises(ModelError):
        SpinModel(m.n_spins, m.h, m.offsets, m.targets, m.couplings, np.zeros_like(m.is_tau), m.layered)


def _shuffle_slots(m, seed):
    rng = np.random.default_rng(seed)
    order = np.concatenate([a + rng.permutation(b - a) for a, b in zip(m.offsets[:-1], m.offsets[1:])])
    return SpinModel(m.n_spins, m.h, m.offsets, m.targets[order], m.couplings[order], m.is_tau[order], m.layered)


# ------------------------------------------------------------ permutations

def test_vector4_anchor_p8():
    m = build_layered_model(grid_layer(8), 64, 1.0)
    perm = vector4_permutation(m)
    assert perm.forward[0 * 8 + 4] == 16
    assert perm.forward[16 * 8 + 0] == 1
    # quadruplet 0 holds layers 0, 16, 32, 48 at position 0
    assert list(perm.inverse[0:4]) == [0, 128, 256, 384]


def test_vector4_anchor_tau_quadruplet_p4():
    m = build_layered_model(ring_layer(4, np.random.default_rng(0)), 64, 1.0)
    pm = apply_permutation(reorder_edges_tau_last(m), vector4_permutation(m))
    layer, pos = pm.layered.layer_pos()
    assert list(layer[16:20]) == [1, 17, 33, 49] and list(pos[16:20]) == [0, 0, 0, 0]
    tau_up = {int(t) for i in range(4) for e in pm.edge_list(i).edges if e.is_tau
              for t in [e.target_spin] if layer[t] == layer[i] + 1}
    assert tau_up == {16, 17, 18, 19}


def test_vector4_small_ring_lanes_are_layers():
    m = build_layered_model(LayerSpec([0.0], [[0.0]]), 4, 1.0)
    assert list(vector4_permutation(m).forward) == [0, 1, 2, 3]


def test_coalesce_spin_256_anchor():
    m = build_layered_model(grid_layer(8), 64, 1.0)
    pm = apply_permutation(reorder_edges_tau_last(m), coalesce_permutation(m, 32))
    layer, pos = pm.layered.layer_pos()
    assert (layer[0], pos[0]) == (0, 0) and (layer[1], pos[1]) == (2, 0)
    assert (layer[256], pos[256]) == (1, 0)
    tau = [{e.target_spin for e in pm.edge_list(i).edges if e.is_tau} for i in (0, 1)]
    assert tau[0] & tau[1] == {256}


def test_coalesce_small_and_wide():
    m = build_layered_model(LayerSpec([0.0], [[0.0]]), 4, 1.0)
    assert list(coalesce_permutation(m, 2).forward) == [0, 2, 1, 3]
    big = build_layered_model(LayerSpec([0.0], [[0.0]]), 256, 1.0)
    perm = coalesce_permutation(big, 128)
    assert len(set(perm.forward % 128)) == 128
    with pytest.raises(ModelError):
        coalesce_permutation(m, 3)


def test_vector4_rejects_bad_layer_count():
    m = build_layered_model(LayerSpec([0.0], [[0.0]]), 6, 1.0)
    with pytest.raises(ModelError):
        vector4_permutation(m)


def test_permutation_bijection_checks():
    with pytest.raises(ModelError):
        SpinPermutation([0, 0, 1])
    p = SpinPermutation([2, 0, 1])
    assert list(p.inverse[p.forward]) == [0, 1, 2]
    assert list(p.invert().forward) == list(p.inverse)


def test_identity_and_inverse_round_trip(small_layered):
    m = reorder_edges_tau_last(small_layered)
    ident = SpinPermutation(np.arange(m.n_spins))
    assert apply_permutation(m, ident) == m
    perm = vector4_permutation(m)
    back = apply_permutation(apply_permutation(m, perm), perm.invert())
    assert back.canonical()[:6] == m.canonical()[:6]


def test_permutation_preserves_cost_and_tau_last():
    m = reorder_edges_tau_last(generate_model(4, 8, (4, 6), "uniform", seed=2))
    assert m.n_spins == 32
    for perm in (vector4_permutation(m), coalesce_permutation(m, 2)):
        pm = apply_permutation(m, perm)
        assert pm.is_tau_last()
        for s in random_states(32, 100, 5):
            assert total_cost(pm, perm.permute_state(s)) == total_cost(m, s)


@given(st.integers(2, 20), st.integers(0, 2**31))
def test_random_permutation_preserves_cost(n, seed):
    rng = np.random.default_rng(seed)
    m = random_model(n, rng, 0.4)
    perm = SpinPermutation(rng.permutation(n))
    pm = apply_permutation(m, perm)
    s = rng.choice([-1, 1], n)
    assert total_cost(pm, perm.permute_state(s)) == pytest.approx(total_cost(m, s), abs=1e-9)


@pytest.mark.parametrize("L", [4, 8])
def test_l8_ordering_labels(L):
    m = generate_model(L, 8, (4, 6), "uniform", 1)
    assert prepare_for_engine(m, "vector4").layered.ordering == "vector4"
    assert prepare_for_engine(m, "coalesced").layered.ordering == "coalesce"


def test_prepare_requires_layered():
    m = random_model(8, np.random.default_rng(0))
    with pytest.raises(ModelError):
        prepare_for_engine(m, "vector4")
    assert prepare_for_engine(m, "basic").is_tau_last()


# ---------------------------------------------------------------- quadruplets

def quadruplet_conflicts(model):
    """Quadruplets with an internal edge or two members sharing a neighbour."""
    bad = []
    for q in range(model.n_spins // 4):
        members = range(4 * q, 4 * q + 4)
        nbrs = [{e.target_spin for e in model.edge_list(i).edges} for i in members]
        if any(set(members) & nb for nb in nbrs) or any(a & b for a, b in itertools.combinations(nbrs, 2)):
            bad.append(q)
    return bad


@pytest.mark.parametrize("L,P,seed", [(16, 8, 0), (32, 7, 1), (64, 8, 2), (20, 10, 3)])
def test_quadruplet_safety(L, P, seed):
    pm = prepare_for_engine(generate_model(L, P, (4, 6), "uniform", seed), "vector4")
    assert quadruplet_conflicts(pm) == []


def test_quadruplet_alignment():
    L, P = 32, 6
    pm = prepare_for_engine(generate_model(L, P, (4, 5), "uniform", 4), "vector4")
    layer, _ = pm.layered.layer_pos()
    for q in range(pm.n_spins // 4):
        members = range(4 * q, 4 * q + 4)
        if any(layer[i] in (0, L - 1) for i in members):
            continue
        for step in (1, -1):
            ups = [next(e.target_spin for e in pm.edge_list(i).edges
                        if e.is_tau and layer[e.target_spin] == (layer[i] + step) % L) for i in members]
            assert ups[0] % 4 == 0 and ups == [ups[0] + k for k in range(4)]

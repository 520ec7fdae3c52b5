from __future__ import annotations

import json
import math
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest

from surfarch import arch, lattice, sim
from surfarch.decoder import Decoder, enumerate_faults, mwpm
from surfarch.sim import run_shot


def build(d=3, name="textbook", T1=10e-6, n_cycles=3, **overrides):
    m = arch.preset(name).replace(**overrides)
    lay = lattice.build_layout(d)
    sched = lattice.build_schedule(lay, m)
    return lay, sched, m, enumerate_faults(lay, sched, m, T1, n_cycles)


@pytest.fixture(scope="module")
def d3():
    return build()


def pair_costs(graph, events):
    """Exact pair costs from an independent Dijkstra over the same edge weights."""
    g = nx.Graph()
    for a, b, w in zip(graph.u.tolist(), graph.v.tolist(), graph.weight.tolist()):
        g.add_edge(a, b, weight=w)
    dist = {e: nx.single_source_dijkstra_path_length(g, e) for e in events}
    return dist


def brute_force(events, dist, boundary):
    """Minimum total cost over all pairings with per-event boundary matches."""
    events = list(events)
    if not events:
        return Fraction(0)
    first, rest = events[0], events[1:]
    best = Fraction(dist[first][boundary]) + brute_force(rest, dist, boundary)
    for i, other in enumerate(rest):
        sub = brute_force(rest[:i] + rest[i + 1:], dist, boundary)
        best = min(best, Fraction(dist[first][other]) + sub)
    return best


def test_brute_force_pairing_small_random(d3):
    _, _, _, graphs = d3
    rng = np.random.default_rng(17)
    for g in graphs.values():
        for _ in range(60):
            k = int(rng.integers(1, 7))
            ev = sorted(rng.choice(g.boundary, size=k, replace=False).tolist())
            res = mwpm(g, ev)
            assert res.exact_weight == brute_force(ev, pair_costs(g, ev), g.boundary)
            assert res.total_weight == float(res.exact_weight)


def test_empty_events(d3):
    g = d3[3]["X"]
    res = mwpm(g, [], 13)
    assert res.matched_pairs == frozenset() and res.total_weight == 0.0
    assert not res.correction.x_bits.any()


def test_every_event_matched_once(d3):
    g = d3[3]["Z"]
    ev = [0, 5, 9, 14, 20]
    res = mwpm(g, ev, 13)
    seen = [n for pair in res.matched_pairs for n in pair if n != g.boundary]
    assert sorted(seen) == ev


def test_rejects_foreign_nodes(d3):
    g = d3[3]["X"]
    with pytest.raises(ValueError):
        mwpm(g, [g.boundary])


def test_adjacent_pair_is_undone(d3):
    lay, sched, m, graphs = d3
    q = lay.data_coords.index((2, 2))
    rec = run_shot(lay, sched, m, 3, faults=[(1, 0, q, "X")], noiseless=True)
    dec = Decoder(lay, graphs, backend="blossom")
    out = dec.decode_shot(rec)
    assert len(out["X"].matched_pairs) == 1
    assert (out["X"].correction.x_bits == rec.final_residual.x_bits).all()
    assert not out["X"].logical_flip
    assert out["Z"].matched_pairs == frozenset()


def test_case1_row_chain_is_misidentified():
    lay, sched, m, graphs = build(3, n_cycles=2)
    dec = Decoder(lay, graphs, backend="blossom")
    row = [q for q in range(lay.n_data) if lay.data_coords[q][0] == 2]
    # (d+1)/2 = 2 flips in one row: the left end and the middle
    chain = sorted(row, key=lambda q: lay.data_coords[q][1])[:2]
    rec = run_shot(lay, sched, m, 2, faults=[(0, 0, q, "X") for q in chain], noiseless=True)
    out = dec.decode_shot(rec)["X"]
    residual = out.correction.x_bits ^ rec.final_residual.x_bits
    # correction completes the chain through the short side: a logical X remains
    assert set(np.nonzero(residual)[0]) == set(row)
    lz = lay.logical_vector("Z").astype(int)
    actual = (lz @ rec.final_residual.x_bits.astype(int)) % 2
    assert actual != int(out.logical_flip)


def test_spacelike_and_timelike_edges(d3):
    lay, sched, m, graphs = d3
    g = graphs["X"]
    ns = g.n_stab
    rounds = {(g.site(a)[1], g.site(b)[1] if b != g.boundary else None)
              for a, b in zip(g.u, g.v)}
    # same-round, consecutive-round and boundary edges are all present
    assert any(r0 == r1 for r0, r1 in rounds)
    assert any(r1 is not None and r1 == r0 + 1 for r0, r1 in rounds)
    assert any(r1 is None for _, r1 in rounds)
    # the timelike edge of a bulk syndrome carries the measurement error budget
    e = g.edge_index()[(g.node(1, 1), g.node(1, 2))]
    assert g.prob[e] > m.p_meas
    assert len(g.corrections[e]) == 0


def test_diagonal_edge_from_ancilla_fault(d3):
    lay, sched, m, graphs = d3
    g = graphs["X"]
    i = next(i for i in range(lay.n_x) if len(lay.support("X", i)) == 4)
    rec = run_shot(lay, sched, m, 3, faults=[(1, 2, lay.n_data + i, "X")], noiseless=True)
    nodes = sorted(g.node(s - lay.n_x, r) for s, r in rec.events_of_kind(lay, "Z"))
    assert len(nodes) == 2
    sites = [g.site(n) for n in nodes]
    assert sites[0][1] != sites[1][1] or sites[0][0] != sites[1][0]
    assert tuple(nodes) in g.edge_index()


def test_graph_connected_to_boundary(d3):
    for g in d3[3].values():
        G = nx.Graph()
        G.add_nodes_from(range(g.n_nodes))
        G.add_edges_from(zip(g.u.tolist(), g.v.tolist()))
        assert nx.is_connected(G)
        assert (g.prob > 0).all() and (g.weight >= 0).all()


def test_triangle_inequality(d3):
    from scipy.sparse.csgraph import dijkstra

    g = d3[3]["Z"]
    dist = dijkstra(g.csr(), directed=False)
    n = g.n_nodes
    for a in range(0, n, 3):
        # d(a, b) <= d(a, c) + d(c, b) for every b, c
        assert (dist[a][None, :] <= dist[a][:, None] + dist + 1e-12).all()


def test_xz_graph_shapes(d3):
    # same node and edge counts; the hook edges differ in orientation because X
    # syndromes are CNOT controls and Z syndromes are targets, so the graphs are
    # not isomorphic under the fixed north-west-east-south order
    gx, gz = d3[3]["X"], d3[3]["Z"]
    assert gx.n_nodes == gz.n_nodes
    assert len(gx.u) == len(gz.u)
    assert gx.conflicts == gz.conflicts == 0


def test_data_edges_match_between_types():
    # a data flip between cycles costs the same in both graphs when T2 = T1
    lay, sched, m, graphs = build(3)
    gx, gz = graphs["X"], graphs["Z"]
    wx = sorted(np.round(gx.prob[gx.v != gx.boundary], 12))
    wz = sorted(np.round(gz.prob[gz.v != gz.boundary], 12))
    assert wx[0] == wz[0]


@pytest.mark.parametrize("d", [3, 5])
def test_validity_of_corrections(d):
    lay, sched, m, graphs = build(d, T1=2.5e-6, n_cycles=d)
    dec = Decoder(lay, graphs, backend="blossom")
    hx = lay.check_matrix("X").astype(int)
    hz = lay.check_matrix("Z").astype(int)
    for seed in range(25):
        rec = run_shot(lay, sched, m, d, seed=seed, T1=2.5e-6)
        out = dec.decode_shot(rec)
        rx = out["X"].correction.x_bits ^ rec.final_residual.x_bits
        rz = out["Z"].correction.z_bits ^ rec.final_residual.z_bits
        assert not ((hz @ rx) % 2).any()
        assert not ((hx @ rz) % 2).any()
        # the logical verdict agrees with the residual's homology class
        lz = lay.logical_vector("Z").astype(int)
        lx = lay.logical_vector("X").astype(int)
        assert ((lz @ rx) % 2) == ((lz @ rec.final_residual.x_bits.astype(int)) % 2) ^ int(out["X"].logical_flip)
        assert ((lx @ rz) % 2) == ((lx @ rec.final_residual.z_bits.astype(int)) % 2) ^ int(out["Z"].logical_flip)


def test_backends_agree_on_failures():
    lay, sched, m, graphs = build(3, T1=3e-6, n_cycles=3)
    batch = sim.FrameSimulator(lay, sched, m, 3e-6).run(400, 3, np.random.default_rng(2))
    fast = Decoder(lay, graphs, "pymatching").count_failures(batch)
    exact = Decoder(lay, graphs, "blossom").count_failures(batch)
    # ties may be broken differently; totals must be close
    assert abs(fast[0] - exact[0]) <= 4 and abs(fast[1] - exact[1]) <= 4


def test_graph_json(d3):
    doc = json.loads(d3[3]["X"].to_json())
    assert doc["error_type"] == "X"
    e = doc["edges"][0]
    assert e["weight"] == pytest.approx(-math.log(e["prob"]))


def test_unknown_backend(d3):
    with pytest.raises(ValueError):
        Decoder(d3[0], d3[3], backend="greedy")

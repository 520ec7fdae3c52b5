"""Space-time matching graphs and minimum-weight perfect matching decoding.

Two independent graphs are built per configuration: error type ``"X"``
(bit flips, seen by Z-type syndromes, logical failure = odd overlap with the
logical-Z support) and ``"Z"`` (phase flips, seen by X-type syndromes).
A detector node is ``round * n_stab + stab`` with ``stab`` the index within
its syndrome type; the boundary is node ``n_rounds * n_stab``.

Edges come from forcing every single fault of one bulk cycle into an
otherwise noiseless two-cycle run.  A fault only fires detectors in its own
round and the next, so the template is tiled over all cycles.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import networkx as nx
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from .arch import ArchitectureModel
from .lattice import CodeLayout, CycleSchedule
from .sim import (BatchResult, FrameSimulator, PauliFrame, ShotRecord, _PAIR_CODES,
                  compile_noise, default_n_cycles, make_faults)

# Faults with zero probability still get an edge so every detector is matchable.
PROB_FLOOR = 1e-15
ERROR_TYPES = ("X", "Z")


class DecodingError(RuntimeError):
    pass


@dataclass
class MatchingGraph:
    error_type: str
    n_stab: int
    n_rounds: int
    u: np.ndarray
    v: np.ndarray
    prob: np.ndarray
    logical: np.ndarray
    corrections: list = field(repr=False)
    conflicts: int = 0

    @property
    def boundary(self) -> int:
        return self.n_rounds * self.n_stab

    @property
    def n_nodes(self) -> int:
        return self.boundary + 1

    @property
    def weight(self) -> np.ndarray:
        return -np.log(self.prob)

    def node(self, stab: int, rnd: int) -> int:
        return rnd * self.n_stab + stab

    def site(self, node: int) -> tuple[int, int] | None:
        """``(stab, round)`` of a detector node; ``None`` for the boundary."""
        if node == self.boundary:
            return None
        return node % self.n_stab, node // self.n_stab

    def edge_index(self) -> dict:
        if not hasattr(self, "_edge_index"):
            self._edge_index = {
                (min(a, b), max(a, b)): i for i, (a, b) in enumerate(zip(self.u, self.v))
            }
        return self._edge_index

    def csr(self) -> sp.csr_matrix:
        if not hasattr(self, "_csr"):
            n = self.n_nodes
            w = self.weight
            self._csr = sp.csr_matrix(
                (np.concatenate([w, w]),
                 (np.concatenate([self.u, self.v]), np.concatenate([self.v, self.u]))),
                shape=(n, n))
        return self._csr

    def to_json(self) -> str:
        edges = []
        for i in range(len(self.u)):
            edges.append({
                "a": self.site(int(self.u[i])),
                "b": self.site(int(self.v[i])),
                "prob": float(self.prob[i]),
                "weight": float(-math.log(self.prob[i])),
                "logical": bool(self.logical[i]),
                "correction": list(self.corrections[i]),
            })
        return json.dumps({
            "error_type": self.error_type,
            "n_stab": self.n_stab,
            "n_rounds": self.n_rounds,
            "boundary": "boundary",
            "edges": edges,
        }, indent=1)


@dataclass
class _Fault:
    prob: float
    step: int
    parts: tuple  # ((qubit, pauli), ...) or (("M", qubit),)


def _fault_list(layout: CodeLayout, schedule: CycleSchedule, model: ArchitectureModel,
                T1: float | None) -> list[_Fault]:
    noise = compile_noise(layout, schedule, model, T1)
    faults = []
    for s, (step, nz) in enumerate(zip(schedule.steps, noise)):
        # single-qubit faults on every qubit that can decohere in this slice
        probs = {}
        for dur, qubits in step.decohere:
            for q in qubits:
                probs[int(q)] = (0.0, 0.0, 0.0)
        for op in nz.pauli:
            for q in op.qubits:
                probs[int(q)] = op.probs
        for q, ps in sorted(probs.items()):
            for pauli, p in zip("XYZ", ps):
                faults.append(_Fault(max(p, PROB_FLOOR), s, ((q, pauli),)))
        if step.kind.startswith("cnot"):
            # also ensures single-qubit components exist for decomposition
            busy = np.concatenate([step.controls, step.targets])
            for q in busy:
                if int(q) not in probs:
                    for pauli in "XYZ":
                        faults.append(_Fault(PROB_FLOOR, s, ((int(q), pauli),)))
            p = max(model.p_intr / 15.0, PROB_FLOOR)
            for c, t in zip(step.controls, step.targets):
                for a, b in _PAIR_CODES:
                    parts = tuple((int(q), "IXYZ"[code])
                                  for q, code in ((c, a), (t, b)) if code)
                    faults.append(_Fault(p, s, parts))
        if step.kind == "prep":
            p = max(model.p_qsp, PROB_FLOOR)
            for q in layout.z_qubits:
                faults.append(_Fault(p, s, ((int(q), "X"),)))
            for q in layout.x_qubits:
                faults.append(_Fault(p, s, ((int(q), "Z"),)))
        if step.kind == "measure":
            p = max(model.p_meas, PROB_FLOOR)
            for q in range(layout.n_data, layout.n_qubits):
                faults.append(_Fault(p, s, ((q, "M"),)))
    return faults


def _type_slices(layout: CodeLayout):
    # error type -> (syndrome slice, residual attribute, logical support used for parity)
    return {
        "X": (slice(layout.n_x, layout.n_x + layout.n_z), "x_bits", layout.logical_z_support),
        "Z": (slice(0, layout.n_x), "z_bits", layout.logical_x_support),
    }


def enumerate_faults(layout: CodeLayout, schedule: CycleSchedule, model: ArchitectureModel,
                     T1: float | None, n_cycles: int | None = None) -> dict:
    """Matching graphs ``{"X": MatchingGraph, "Z": MatchingGraph}`` for ``n_cycles``
    noisy cycles followed by one noiseless readout round.

    Every fault is simulated alone.  Two-qubit faults that fire more than two
    detectors of one type are split into their single-qubit parts, each of
    which fires at most two.  Edge probabilities combine as
    ``1 - prod(1 - p_fault)``; weights are ``-ln p_edge``.
    """
    n_cycles = default_n_cycles(layout.d) if n_cycles is None else n_cycles
    faults = _fault_list(layout, schedule, model, T1)
    rows = []
    single = {}
    for i, f in enumerate(faults):
        for q, pauli in f.parts:
            rows.append((i, 0, f.step, q, pauli))
        if len(f.parts) == 1:
            single.setdefault((f.step, *f.parts[0]), i)
    sim = FrameSimulator(layout, schedule, model, None)
    res = sim.run(len(faults), 2, faults=make_faults(rows), noiseless=True)
    ev = res.detection_events()
    if ev[2].any():
        raise DecodingError("a fault fired detectors more than one round later")

    graphs = {}
    for etype, (sl, attr, lsupport) in _type_slices(layout).items():
        n_stab = sl.stop - sl.start
        sub = ev[:2, sl, :]                       # (2, n_stab, F)
        resid = getattr(res.data, attr)           # (n_data, F)
        lmask = np.zeros(layout.n_data, dtype=bool)
        lmask[list(lsupport)] = True

        def effect(i):
            r, s = np.nonzero(sub[:, :, i])
            nodes = tuple(sorted(zip(r.tolist(), s.tolist())))
            corr = frozenset(np.nonzero(resid[:, i])[0].tolist())
            return nodes, corr

        template: dict = {}

        def add(nodes, corr, p):
            if len(nodes) == 1:
                key = (nodes[0], None)
            else:
                key = nodes
            logical = len(corr & set(lsupport)) % 2 == 1
            template.setdefault(key, []).append((p, corr, logical))

        for i, f in enumerate(faults):
            nodes, corr = effect(i)
            if not nodes:
                continue
            if len(nodes) <= 2:
                add(nodes, corr, f.prob)
                continue
            for q, pauli in f.parts:
                j = single.get((f.step, q, pauli))
                if j is None:
                    raise DecodingError(f"no single-qubit component for {f}")
                cn, cc = effect(j)
                if len(cn) > 2:
                    raise DecodingError(f"component fault fires {len(cn)} detectors")
                if cn:
                    add(cn, cc, f.prob)
        graphs[etype] = _tile(etype, template, n_stab, n_cycles)
    return graphs


def _tile(etype, template, n_stab, n_cycles) -> MatchingGraph:
    n_rounds = n_cycles + 1
    boundary = n_rounds * n_stab
    acc: dict = {}
    for key, contribs in template.items():
        for t in range(n_cycles):
            a = (t + key[0][0]) * n_stab + key[0][1]
            b = boundary if key[1] is None else (t + key[1][0]) * n_stab + key[1][1]
            gk = (min(a, b), max(a, b))
            acc.setdefault(gk, []).extend(contribs)
    us, vs, ps, ls, cs = [], [], [], [], []
    conflicts = 0
    for (a, b), contribs in sorted(acc.items()):
        keep = 1.0
        for p, _, _ in contribs:
            keep *= 1.0 - p
        best = max(contribs, key=lambda c: c[0])
        if len({c[2] for c in contribs}) > 1:
            conflicts += 1
        us.append(a)
        vs.append(b)
        ps.append(1.0 - keep)
        ls.append(best[2])
        cs.append(tuple(sorted(best[1])))
    return MatchingGraph(etype, n_stab, n_rounds, np.array(us, dtype=np.int64),
                         np.array(vs, dtype=np.int64), np.array(ps), np.array(ls, dtype=bool),
                         cs, conflicts)


# --- exact matching -----------------------------------------------------------------


@dataclass
class DecoderResult:
    matched_pairs: frozenset
    correction: PauliFrame
    total_weight: float
    logical_flip: bool
    exact_weight: Fraction = Fraction(0)  # sum of the float pair costs, without rounding


def _path(pred_row, src, dst):
    nodes = [dst]
    while nodes[-1] != src:
        nxt = pred_row[nodes[-1]]
        if nxt < 0:
            raise DecodingError(f"no path from {src} to {dst}")
        nodes.append(int(nxt))
    return nodes[::-1]


def mwpm(graph: MatchingGraph, events, n_data: int | None = None) -> DecoderResult:
    """Exact minimum-weight perfect matching of ``events`` (detector node ids).

    Each event may pair with another event or with its own copy of the
    boundary; pair costs are shortest-path distances.  The matching is solved
    with Edmonds' blossom algorithm on exactly scaled integer weights, so the
    optimum over the cost table is not subject to rounding.
    """
    ev = sorted(set(int(e) for e in events))
    if any(e < 0 or e >= graph.boundary for e in ev):
        raise ValueError("event is not a detector node of this graph")
    n_data = n_data if n_data is not None else 1 + max((max(c) for c in graph.corrections if c),
                                                       default=0)
    empty = PauliFrame.zeros(n_data)
    if not ev:
        return DecoderResult(frozenset(), empty, 0.0, False, Fraction(0))
    dist, pred = dijkstra(graph.csr(), directed=False, indices=ev, return_predecessors=True)
    k = len(ev)
    b = graph.boundary
    cost = {}
    for i in range(k):
        if math.isfinite(dist[i, b]):
            cost[("e", i), ("b", i)] = Fraction(dist[i, b])
        for j in range(i + 1, k):
            if math.isfinite(dist[i, ev[j]]):
                cost[("e", i), ("e", j)] = Fraction(dist[i, ev[j]])
            cost[("b", i), ("b", j)] = Fraction(0)
    top = max(cost.values()) + 1
    # networkx stays in exact arithmetic only for int weights; the costs are
    # dyadic rationals, so a common denominator makes them integers exactly
    scale = math.lcm(*(w.denominator for w in cost.values()), top.denominator)
    g = nx.Graph()
    g.add_nodes_from([("e", i) for i in range(k)] + [("b", i) for i in range(k)])
    for (p, q), w in cost.items():
        g.add_edge(p, q, weight=int((top - w) * scale))
    matching = nx.max_weight_matching(g, maxcardinality=True)
    if len(matching) != k:
        raise DecodingError("event set cannot be perfectly matched")

    eidx = graph.edge_index()
    corr: set = set()
    logical = False
    pairs = set()
    total = Fraction(0)
    for p, q in matching:
        if p[0] == "b" and q[0] == "b":
            continue
        if p[0] == "b":
            p, q = q, p
        i = p[1]
        dst = ev[q[1]] if q[0] == "e" else b
        total += cost[tuple(sorted((p, q)))] if q[0] == "e" else cost[p, q]
        pairs.add((ev[i], dst) if ev[i] < dst else (dst, ev[i]))
        path = _path(pred[i], ev[i], dst)
        for a, c in zip(path[:-1], path[1:]):
            e = eidx[(min(a, c), max(a, c))]
            corr.symmetric_difference_update(graph.corrections[e])
            logical ^= bool(graph.logical[e])
    frame = PauliFrame.zeros(n_data)
    bits = frame.x_bits if graph.error_type == "X" else frame.z_bits
    bits[sorted(corr)] = True
    return DecoderResult(frozenset(pairs), frame, float(total), logical, total)


# --- configured decoder -----------------------------------------------------------


class Decoder:
    """Both matching graphs for one configuration plus a batch decoding backend.

    ``backend="pymatching"`` uses the compiled sparse-blossom matcher for
    throughput; ``"blossom"`` runs :func:`mwpm` shot by shot.
    """

    def __init__(self, layout: CodeLayout, graphs: dict, backend: str = "pymatching"):
        if backend not in ("pymatching", "blossom"):
            raise ValueError(f"unknown decoder backend {backend!r}")
        self.layout = layout
        self.graphs = graphs
        self.backend = backend
        self._slices = _type_slices(layout)
        self._pm = {}
        if backend == "pymatching":
            import pymatching

            for etype, g in graphs.items():
                m = pymatching.Matching()
                w = g.weight
                for i in range(len(g.u)):
                    fid = {0} if g.logical[i] else set()
                    if g.v[i] == g.boundary:
                        m.add_boundary_edge(int(g.u[i]), fault_ids=fid, weight=float(w[i]),
                                            error_probability=float(g.prob[i]))
                    else:
                        m.add_edge(int(g.u[i]), int(g.v[i]), fault_ids=fid,
                                   weight=float(w[i]), error_probability=float(g.prob[i]))
                self._pm[etype] = m

    @classmethod
    def build(cls, layout, schedule, model, T1, n_cycles=None, backend="pymatching"):
        return cls(layout, enumerate_faults(layout, schedule, model, T1, n_cycles), backend)

    def _detectors(self, events: np.ndarray, etype: str) -> np.ndarray:
        sl = self._slices[etype][0]
        sub = events[:, sl, :]                           # (rounds, n_stab, shots)
        return np.ascontiguousarray(sub.reshape(-1, sub.shape[2]).T).astype(np.uint8)

    def predict(self, events: np.ndarray, etype: str) -> np.ndarray:
        """Predicted logical flips for a batch of detection events (rounds, n_synd, shots)."""
        det = self._detectors(events, etype)
        if self.backend == "pymatching":
            m = self._pm[etype]
            if m.num_fault_ids == 0:
                return np.zeros(det.shape[0], dtype=bool)
            return m.decode_batch(det)[:, 0].astype(bool)
        g = self.graphs[etype]
        return np.array([mwpm(g, np.nonzero(row)[0], self.layout.n_data).logical_flip
                         for row in det], dtype=bool)

    def actual_flips(self, data: PauliFrame, etype: str) -> np.ndarray:
        _, attr, support = self._slices[etype]
        bits = getattr(data, attr)
        return np.bitwise_xor.reduce(bits[list(support)], axis=0)

    def count_failures(self, batch: BatchResult) -> tuple[int, int]:
        """Logical X and logical Z failures in a simulated batch."""
        events = batch.detection_events()
        out = []
        for etype in ERROR_TYPES:
            wrong = self.predict(events, etype) ^ self.actual_flips(batch.data, etype)
            out.append(int(wrong.sum()))
        return out[0], out[1]

    def decode_shot(self, record: ShotRecord) -> dict:
        """Exact decoding of one shot: ``{error type: DecoderResult}``."""
        out = {}
        lay = self.layout
        for etype, (sl, _, _) in self._slices.items():
            g = self.graphs[etype]
            nodes = [g.node(s - sl.start, r) for s, r in record.detection_events
                     if sl.start <= s < sl.stop]
            out[etype] = mwpm(g, nodes, lay.n_data)
        return out

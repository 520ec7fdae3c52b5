"""Planar (unrotated) surface-code layout and the per-cycle gate schedule.

Coordinates use a doubled grid ``(row, col)`` with ``0 <= row, col <= 2d - 2``
and rows increasing southwards.  Data qubits sit where ``row + col`` is even,
X-type syndromes at (odd row, even col) and Z-type syndromes at (even row,
odd col).  Logical X runs horizontally along row 0 and logical Z vertically
along column 0.

Qubit indices: data qubits first, then X syndromes, then Z syndromes, each
block in row-major order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .arch import ArchitectureModel

DIRECTIONS = ("north", "west", "east", "south")
_OFFSETS = {"north": (-1, 0), "west": (0, -1), "east": (0, 1), "south": (1, 0)}


@dataclass(frozen=True)
class CodeLayout:
    d: int
    data_coords: tuple
    x_coords: tuple
    z_coords: tuple
    # (n_syndromes, 4) arrays of data indices in N, W, E, S order; -1 = missing
    x_neighbors: np.ndarray = field(repr=False)
    z_neighbors: np.ndarray = field(repr=False)
    logical_x_support: tuple = ()
    logical_z_support: tuple = ()

    @property
    def n_data(self) -> int:
        return len(self.data_coords)

    @property
    def n_x(self) -> int:
        return len(self.x_coords)

    @property
    def n_z(self) -> int:
        return len(self.z_coords)

    @property
    def n_qubits(self) -> int:
        return self.n_data + self.n_x + self.n_z

    @property
    def x_qubits(self) -> np.ndarray:
        return np.arange(self.n_data, self.n_data + self.n_x)

    @property
    def z_qubits(self) -> np.ndarray:
        return np.arange(self.n_data + self.n_x, self.n_qubits)

    def support(self, kind: str, i: int) -> list[int]:
        nb = self.x_neighbors if kind == "X" else self.z_neighbors
        return [int(q) for q in nb[i] if q >= 0]

    def check_matrix(self, kind: str) -> np.ndarray:
        """Binary (n_stabilizers, n_data) incidence matrix for X or Z stabilizers."""
        nb = self.x_neighbors if kind == "X" else self.z_neighbors
        h = np.zeros((len(nb), self.n_data), dtype=np.uint8)
        for i, row in enumerate(nb):
            h[i, row[row >= 0]] = 1
        return h

    def logical_vector(self, kind: str) -> np.ndarray:
        v = np.zeros(self.n_data, dtype=np.uint8)
        v[list(self.logical_x_support if kind == "X" else self.logical_z_support)] = 1
        return v

    def to_json(self) -> str:
        qubits = []
        for i, c in enumerate(self.data_coords):
            qubits.append({"index": i, "role": "data", "coord": list(c)})
        for i, c in enumerate(self.x_coords):
            qubits.append({
                "index": self.n_data + i, "role": "x_syndrome", "coord": list(c),
                "support": dict(zip(DIRECTIONS, (int(q) for q in self.x_neighbors[i]))),
            })
        for i, c in enumerate(self.z_coords):
            qubits.append({
                "index": self.n_data + self.n_x + i, "role": "z_syndrome", "coord": list(c),
                "support": dict(zip(DIRECTIONS, (int(q) for q in self.z_neighbors[i]))),
            })
        return json.dumps({
            "d": self.d,
            "qubits": qubits,
            "logical_x": list(self.logical_x_support),
            "logical_z": list(self.logical_z_support),
        }, indent=1)


def gf2_rank(m: np.ndarray) -> int:
    a = (np.asarray(m) % 2).astype(np.uint8)
    rank = 0
    rows, cols = a.shape
    for c in range(cols):
        pivot = np.nonzero(a[rank:, c])[0]
        if len(pivot) == 0:
            continue
        p = rank + pivot[0]
        a[[rank, p]] = a[[p, rank]]
        others = np.nonzero(a[:, c])[0]
        others = others[others != rank]
        a[others] ^= a[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def check_layout(layout: CodeLayout) -> None:
    """Raise ``AssertionError`` unless stabilizers commute, logicals commute
    with the opposite stabilizers, anticommute with each other, and are not
    stabilizer products."""
    hx = layout.check_matrix("X").astype(int)
    hz = layout.check_matrix("Z").astype(int)
    lx = layout.logical_vector("X").astype(int)
    lz = layout.logical_vector("Z").astype(int)
    assert not ((hx @ hz.T) % 2).any(), "X and Z stabilizers do not commute"
    assert not ((hz @ lx) % 2).any(), "logical X anticommutes with a Z stabilizer"
    assert not ((hx @ lz) % 2).any(), "logical Z anticommutes with an X stabilizer"
    assert (lx @ lz) % 2 == 1, "logical X and Z commute"
    assert gf2_rank(np.vstack([hx, lx])) == gf2_rank(hx) + 1, "logical X is a stabilizer"
    assert gf2_rank(np.vstack([hz, lz])) == gf2_rank(hz) + 1, "logical Z is a stabilizer"


def build_layout(d: int) -> CodeLayout:
    if not isinstance(d, (int, np.integer)) or d < 3 or d % 2 == 0:
        raise ValueError(f"code distance must be an odd integer >= 3, got {d!r}")
    d = int(d)
    size = 2 * d - 1
    data = [(r, c) for r in range(size) for c in range(size) if (r + c) % 2 == 0]
    xs = [(r, c) for r in range(size) for c in range(size) if r % 2 == 1 and c % 2 == 0]
    zs = [(r, c) for r in range(size) for c in range(size) if r % 2 == 0 and c % 2 == 1]
    index = {rc: i for i, rc in enumerate(data)}

    def neighbors(coords):
        out = np.full((len(coords), 4), -1, dtype=np.int64)
        for i, (r, c) in enumerate(coords):
            for j, name in enumerate(DIRECTIONS):
                dr, dc = _OFFSETS[name]
                out[i, j] = index.get((r + dr, c + dc), -1)
        return out

    layout = CodeLayout(
        d=d,
        data_coords=tuple(data),
        x_coords=tuple(xs),
        z_coords=tuple(zs),
        x_neighbors=neighbors(xs),
        z_neighbors=neighbors(zs),
        logical_x_support=tuple(index[(0, c)] for c in range(0, size, 2)),
        logical_z_support=tuple(index[(r, 0)] for r in range(0, size, 2)),
    )
    check_layout(layout)
    return layout


STEP_KINDS = ("prep", "cnot_north", "cnot_west", "cnot_east", "cnot_south", "hadamard", "measure")


@dataclass(frozen=True)
class Step:
    """One time slice of the cycle.

    ``controls``/``targets`` list the CNOTs of the slice.  ``decohere`` maps a
    duration in ns to the qubits that accumulate damping for that long during
    the slice.
    """

    kind: str
    duration_ns: int
    controls: np.ndarray = field(repr=False)
    targets: np.ndarray = field(repr=False)
    decohere: tuple = field(repr=False)
    idle: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class CycleSchedule:
    steps: tuple

    @property
    def durations_ns(self) -> list[int]:
        return [s.duration_ns for s in self.steps]

    @property
    def t_cycle_ns(self) -> int:
        return sum(self.durations_ns)


def build_schedule(layout: CodeLayout, m: ArchitectureModel) -> CycleSchedule:
    """Per-cycle circuit: prep, CNOTs north-west-east-south, Hadamard on X
    syndromes, readout.

    Data qubits decohere through every slice.  Syndrome qubits decohere during
    the CNOT slices; X syndromes additionally during the two local rotations
    (end of prep and the pre-readout Hadamard).  Weight-3 stabilizers idle in
    the slot of their missing neighbour.
    """
    data = np.arange(layout.n_data)
    xq, zq = layout.x_qubits, layout.z_qubits
    all_q = np.arange(layout.n_qubits)
    empty = np.zeros(0, dtype=np.int64)
    steps = [
        Step("prep", m.t_qsp_ns, empty, empty,
             ((m.t_qsp_ns, data), (m.t_loc_ns, xq)), empty),
    ]
    for j, name in enumerate(DIRECTIONS):
        xn = layout.x_neighbors[:, j]
        zn = layout.z_neighbors[:, j]
        # X syndromes control onto data; Z syndromes are targets of data controls
        controls = np.concatenate([xq[xn >= 0], zn[zn >= 0]])
        targets = np.concatenate([xn[xn >= 0], zq[zn >= 0]])
        busy = np.zeros(layout.n_qubits, dtype=bool)
        busy[controls] = True
        busy[targets] = True
        steps.append(Step(
            f"cnot_{name}", m.cnot_step_ns[j], controls, targets,
            ((m.cnot_step_ns[j], all_q),), np.nonzero(~busy)[0],
        ))
    steps.append(Step("hadamard", m.t_loc_ns, empty, empty,
                      ((m.t_loc_ns, data), (m.t_loc_ns, xq)), zq))
    steps.append(Step("measure", m.t_meas_ns, empty, empty,
                      ((m.t_meas_ns, data),), empty))
    return CycleSchedule(tuple(steps))

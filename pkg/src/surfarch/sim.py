"""Pauli-frame Monte Carlo of the surface-code memory cycle.

Frames are boolean arrays shaped ``(n_qubits,)`` for a single shot or
``(n_qubits, shots)`` for a batch.  A Y error is ``x = z = 1``.

Syndromes are indexed X-type first, then Z-type, i.e. syndrome ``s`` lives on
qubit ``layout.n_data + s``.  Round ``n_cycles`` is a final noiseless
stabilizer readout of the data frame.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .arch import NS, ArchitectureModel, intrinsic_flip_probability
from .lattice import CodeLayout, CycleSchedule
from .twirl import DampingParams, pta_channel

DEFAULT_SEED = 20130101
DEFAULT_BATCH = 8192

# 2-qubit Pauli codes 1..15 -> (code_a, code_b); code 0=I, 1=X, 2=Y, 3=Z
_PAIR_CODES = np.array([(k // 4, k % 4) for k in range(1, 16)], dtype=np.int8)
_XBIT = np.array([False, True, True, False])
_ZBIT = np.array([False, False, True, True])


@dataclass
class PauliFrame:
    x_bits: np.ndarray
    z_bits: np.ndarray

    @classmethod
    def zeros(cls, n: int, shots: int | None = None) -> "PauliFrame":
        shape = (n,) if shots is None else (n, shots)
        return cls(np.zeros(shape, dtype=bool), np.zeros(shape, dtype=bool))

    def copy(self) -> "PauliFrame":
        return PauliFrame(self.x_bits.copy(), self.z_bits.copy())

    def apply(self, q, pauli: str) -> "PauliFrame":
        if pauli in ("X", "Y"):
            self.x_bits[q] ^= True
        if pauli in ("Z", "Y"):
            self.z_bits[q] ^= True
        return self

    def label(self, q: int) -> str:
        return "IXZY"[int(self.x_bits[q]) + 2 * int(self.z_bits[q])]


def propagate_cnot(frame: PauliFrame, control, target) -> PauliFrame:
    """Conjugate by CNOT: X spreads control -> target, Z spreads target -> control.

    ``control`` and ``target`` may be index arrays of disjoint qubits.
    """
    if np.any(np.asarray(control) == np.asarray(target)):
        raise ValueError("control and target must differ")
    out = frame.copy()
    out.x_bits[target] ^= frame.x_bits[control]
    out.z_bits[control] ^= frame.z_bits[target]
    return out


def propagate_hadamard(frame: PauliFrame, q) -> PauliFrame:
    out = frame.copy()
    out.x_bits[q], out.z_bits[q] = frame.z_bits[q], frame.x_bits[q]
    return out


def inject_idle(frame: PauliFrame, q, dt: float, T1: float, T2: float,
                rng: np.random.Generator) -> PauliFrame:
    """Apply X, Y or Z to qubit ``q`` with the twirled damping probabilities."""
    out = frame.copy()
    if dt <= 0:
        return out
    ch = pta_channel(DampingParams(dt, T1, T2))
    u = rng.random()
    if u < ch.px:
        out.apply(q, "X")
    elif u < ch.px + ch.py:
        out.apply(q, "Y")
    elif u < ch.p_sigma:
        out.apply(q, "Z")
    return out


def inject_cnot_intrinsic(frame: PauliFrame, control: int, target: int, p_intr: float,
                          rng: np.random.Generator) -> PauliFrame:
    """With probability ``p_intr`` apply one of the 15 two-qubit Paulis uniformly."""
    out = frame.copy()
    if p_intr <= 0 or rng.random() >= p_intr:
        return out
    a, b = _PAIR_CODES[rng.integers(15)]
    for q, code in ((control, a), (target, b)):
        out.x_bits[q] ^= _XBIT[code]
        out.z_bits[q] ^= _ZBIT[code]
    return out


# --- compiled noise ---------------------------------------------------------


@dataclass(frozen=True)
class NoiseOp:
    """Pauli channel on ``qubits``; probabilities are (px, py, pz)."""

    qubits: np.ndarray
    probs: tuple


@dataclass(frozen=True)
class StepNoise:
    pauli: tuple = ()
    p_intr: float = 0.0
    p_prep: float = 0.0
    p_meas: float = 0.0


def compile_noise(layout: CodeLayout, schedule: CycleSchedule, model: ArchitectureModel,
                  T1: float | None) -> list[StepNoise]:
    """Per-step error probabilities; ``T1=None`` switches decoherence off."""
    out = []
    for step in schedule.steps:
        pauli = []
        if T1 is not None and math.isfinite(T1):
            T2 = model.T2_for(T1)
            for dur_ns, qubits in step.decohere:
                ch = pta_channel(DampingParams(dur_ns * NS, T1, T2))
                if ch.p_sigma > 0 and len(qubits):
                    pauli.append(NoiseOp(np.asarray(qubits), ch.as_tuple()))
        out.append(StepNoise(
            pauli=tuple(pauli),
            p_intr=model.p_intr if step.kind.startswith("cnot") else 0.0,
            p_prep=model.p_qsp if step.kind == "prep" else 0.0,
            p_meas=model.p_meas if step.kind == "measure" else 0.0,
        ))
    return out


def _sites(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    """Distinct flat indices in ``range(n)``, each included independently with prob ``p``."""
    if p <= 0 or n == 0:
        return np.zeros(0, dtype=np.int64)
    k = rng.binomial(n, p)
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    return rng.choice(n, size=k, replace=False)


def _apply_pauli_noise(x, z, op: NoiseOp, rng):
    shots = x.shape[1]
    px, py, pz = op.probs
    ps = px + py + pz
    hit = _sites(rng, len(op.qubits) * shots, ps)
    if not len(hit):
        return
    rows, cols = np.divmod(hit, shots)
    q = op.qubits[rows]
    u = rng.random(len(hit)) * ps
    xf = u < px + py
    zf = u >= px
    x[q[xf], cols[xf]] ^= True
    z[q[zf], cols[zf]] ^= True


def _apply_intrinsic(x, z, controls, targets, p, rng):
    shots = x.shape[1]
    hit = _sites(rng, len(controls) * shots, p)
    if not len(hit):
        return
    rows, cols = np.divmod(hit, shots)
    codes = _PAIR_CODES[rng.integers(15, size=len(hit))]
    for qs, code in ((controls[rows], codes[:, 0]), (targets[rows], codes[:, 1])):
        xf = _XBIT[code]
        zf = _ZBIT[code]
        x[qs[xf], cols[xf]] ^= True
        z[qs[zf], cols[zf]] ^= True


# --- forced faults -----------------------------------------------------------

FAULT_DTYPE = np.dtype([
    ("shot", np.int64), ("cycle", np.int64), ("step", np.int64),
    ("qubit", np.int64), ("x", bool), ("z", bool), ("meas", bool),
])


def make_faults(rows) -> np.ndarray:
    """Fault table from ``(shot, cycle, step, qubit, pauli)`` tuples.

    ``pauli`` is ``"X"``, ``"Y"``, ``"Z"`` or ``"M"`` (flip the readout of the
    syndrome qubit ``qubit``; ``step`` is then ignored).
    """
    out = np.zeros(len(rows), dtype=FAULT_DTYPE)
    for i, (shot, cycle, step, qubit, pauli) in enumerate(rows):
        out[i] = (shot, cycle, step, qubit, pauli in "XY", pauli in "YZ", pauli == "M")
    return out


def _group_faults(faults: np.ndarray | None):
    groups: dict = {}
    if faults is None or len(faults) == 0:
        return groups
    for key in {(int(f["cycle"]), int(f["step"]), bool(f["meas"])) for f in faults}:
        c, s, m = key
        sel = (faults["cycle"] == c) & (faults["meas"] == m)
        if not m:
            sel &= faults["step"] == s
        groups[(c, None if m else s)] = faults[sel]
    return groups


# --- batch engine -------------------------------------------------------------


@dataclass
class BatchResult:
    syndromes: np.ndarray  # (n_cycles + 1, n_synd, shots) bool
    data: PauliFrame       # residual data frame, (n_data, shots)

    def detection_events(self) -> np.ndarray:
        ev = self.syndromes.copy()
        ev[1:] ^= self.syndromes[:-1]
        return ev


def final_syndrome(layout: CodeLayout, data: PauliFrame) -> np.ndarray:
    """Noiseless stabilizer readout of a data frame, shape (n_synd, ...)."""
    hx = layout.check_matrix("X").astype(bool)
    hz = layout.check_matrix("Z").astype(bool)
    sx = (hx.astype(np.uint8) @ data.z_bits.astype(np.uint8)) % 2
    sz = (hz.astype(np.uint8) @ data.x_bits.astype(np.uint8)) % 2
    return np.concatenate([sx, sz]).astype(bool)


class FrameSimulator:
    """Runs the noisy cycle circuit on a batch of Pauli frames."""

    def __init__(self, layout: CodeLayout, schedule: CycleSchedule,
                 model: ArchitectureModel, T1: float | None):
        self.layout = layout
        self.schedule = schedule
        self.model = model
        self.T1 = T1
        self.noise = compile_noise(layout, schedule, model, T1)
        self._synd = np.arange(layout.n_data, layout.n_qubits)
        self._xq = layout.x_qubits
        self._zq = layout.z_qubits

    def run(self, shots: int, n_cycles: int, rng: np.random.Generator | None = None,
            faults: np.ndarray | None = None, noiseless: bool = False) -> BatchResult:
        if n_cycles < 1:
            raise ValueError("n_cycles must be >= 1")
        lay = self.layout
        x = np.zeros((lay.n_qubits, shots), dtype=bool)
        z = np.zeros_like(x)
        synd = np.zeros((n_cycles + 1, lay.n_x + lay.n_z, shots), dtype=bool)
        forced = _group_faults(faults)
        noisy = not noiseless
        if noisy and rng is None:
            raise ValueError("a random generator is required for noisy runs")

        for c in range(n_cycles):
            for s, (step, nz) in enumerate(zip(self.schedule.steps, self.noise)):
                kind = step.kind
                if kind == "prep":
                    x[self._synd] = False
                    z[self._synd] = False
                    if noisy and nz.p_prep > 0:
                        # wrong preparation: |1> for Z syndromes, |-> for X syndromes
                        self._flip(x, self._zq, nz.p_prep, rng)
                        self._flip(z, self._xq, nz.p_prep, rng)
                elif kind.startswith("cnot"):
                    ctl, tgt = step.controls, step.targets
                    x[tgt] ^= x[ctl]
                    z[ctl] ^= z[tgt]
                    if noisy and nz.p_intr > 0:
                        _apply_intrinsic(x, z, ctl, tgt, nz.p_intr, rng)
                elif kind == "measure":
                    synd[c] = x[self._synd]
                    if noisy and nz.p_meas > 0:
                        hit = _sites(rng, synd[c].size, nz.p_meas)
                        synd[c].reshape(-1)[hit] ^= True
                    f = forced.get((c, None))
                    if f is not None:
                        synd[c, f["qubit"] - lay.n_data, f["shot"]] ^= True

                if noisy:
                    for op in nz.pauli:
                        _apply_pauli_noise(x, z, op, rng)
                f = forced.get((c, s))
                if f is not None:
                    x[f["qubit"], f["shot"]] ^= f["x"]
                    z[f["qubit"], f["shot"]] ^= f["z"]

                if kind == "hadamard":
                    xq = self._xq
                    x[xq], z[xq] = z[xq].copy(), x[xq].copy()

        data = PauliFrame(x[: lay.n_data].copy(), z[: lay.n_data].copy())
        synd[n_cycles] = final_syndrome(lay, data)
        return BatchResult(synd, data)

    @staticmethod
    def _flip(bits, qubits, p, rng):
        shots = bits.shape[1]
        hit = _sites(rng, len(qubits) * shots, p)
        if len(hit):
            rows, cols = np.divmod(hit, shots)
            bits[qubits[rows], cols] ^= True


# --- single-shot API ----------------------------------------------------------


@dataclass
class ShotRecord:
    syndrome_history: np.ndarray          # (n_cycles + 1, n_synd) bool
    detection_events: frozenset           # {(syndrome id, round)}
    final_residual: PauliFrame            # data qubits only

    def events_of_kind(self, layout: CodeLayout, kind: str) -> frozenset:
        """Events on X-type (``"X"``) or Z-type (``"Z"``) syndromes."""
        if kind == "X":
            return frozenset(e for e in self.detection_events if e[0] < layout.n_x)
        return frozenset(e for e in self.detection_events if e[0] >= layout.n_x)


def _rng_for(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


def run_shot(layout: CodeLayout, schedule: CycleSchedule, model: ArchitectureModel,
             n_cycles: int, seed: int = DEFAULT_SEED, T1: float | None = None,
             faults=None, noiseless: bool = False) -> ShotRecord:
    """Simulate one shot.  ``T1`` defaults to ``model.T1`` (``None`` = no decoherence).

    ``faults`` is an optional list of ``(cycle, step, qubit, pauli)`` forced faults.
    """
    T1 = model.T1 if T1 is None else T1
    sim = FrameSimulator(layout, schedule, model, T1)
    table = make_faults([(0, *f) for f in faults]) if faults else None
    res = sim.run(1, n_cycles, _rng_for(seed, 0), faults=table, noiseless=noiseless)
    ev = res.detection_events()[:, :, 0]
    events = frozenset((int(s), int(r)) for r, s in zip(*np.nonzero(ev)))
    data = PauliFrame(res.data.x_bits[:, 0].copy(), res.data.z_bits[:, 0].copy())
    return ShotRecord(res.syndromes[:, :, 0].copy(), events, data)


# --- rate estimation -------------------------------------------------------------


def per_cycle_rate(failures: int, shots: int, n_cycles: int) -> tuple[float, float]:
    """Per-cycle logical flip probability and its standard error.

    A logical flips an odd number of times over ``n`` independent cycles with
    probability ``P = (1 - (1 - 2p)^n) / 2``; this inverts that relation.
    """
    P = failures / shots
    sigma = math.sqrt(P * (1 - P) / shots)
    base = 1.0 - 2.0 * P
    if base <= 0:
        return 0.5, math.inf
    rate = (1.0 - base ** (1.0 / n_cycles)) / 2.0
    err = sigma * base ** (1.0 / n_cycles - 1.0) / n_cycles
    return rate, err


@dataclass
class RatePoint:
    arch: str
    T1: float
    d: int
    shots: int
    n_cycles: int
    logical_x_failures: int
    logical_z_failures: int
    p_xl_per_cycle: float = field(init=False)
    p_xl_err: float = field(init=False)
    p_zl_per_cycle: float = field(init=False)
    p_zl_err: float = field(init=False)

    def __post_init__(self):
        if self.shots < 1:
            self.p_xl_per_cycle = self.p_zl_per_cycle = math.nan
            self.p_xl_err = self.p_zl_err = math.nan
            return
        if self.logical_x_failures > self.shots or self.logical_z_failures > self.shots:
            raise ValueError("more failures than shots")
        self.p_xl_per_cycle, self.p_xl_err = per_cycle_rate(
            self.logical_x_failures, self.shots, self.n_cycles)
        self.p_zl_per_cycle, self.p_zl_err = per_cycle_rate(
            self.logical_z_failures, self.shots, self.n_cycles)


def default_n_cycles(d: int) -> int:
    return 10 * d


def estimate(layout: CodeLayout, schedule: CycleSchedule, model: ArchitectureModel,
             T1: float | None, shots: int, n_cycles: int | None = None, decoder=None,
             seed: int = DEFAULT_SEED, batch_size: int = DEFAULT_BATCH,
             threads: int = 1) -> RatePoint:
    """Monte Carlo logical error rates per cycle.

    ``decoder`` is a :class:`surfarch.decoder.Decoder` built for the same
    configuration, or a backend name (``"pymatching"``/``"blossom"``).  Batch
    ``b`` draws from the substream ``(seed, b)``, so results do not depend on
    ``threads``.
    """
    from .decoder import Decoder

    if shots < 1:
        raise ValueError("shots must be >= 1")
    n_cycles = default_n_cycles(layout.d) if n_cycles is None else n_cycles
    if decoder is None or isinstance(decoder, str):
        decoder = Decoder.build(layout, schedule, model, T1, n_cycles,
                                backend=decoder or "pymatching")
    sim = FrameSimulator(layout, schedule, model, T1)
    sizes = [batch_size] * (shots // batch_size)
    if shots % batch_size:
        sizes.append(shots % batch_size)

    def work(b):
        res = sim.run(sizes[b], n_cycles, _rng_for(seed, b))
        return decoder.count_failures(res)

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(threads) as pool:
            counts = list(pool.map(work, range(len(sizes))))
    else:
        counts = [work(b) for b in range(len(sizes))]
    fx = sum(c[0] for c in counts)
    fz = sum(c[1] for c in counts)
    return RatePoint(model.name, math.inf if T1 is None else T1, layout.d, shots,
                     n_cycles, fx, fz)

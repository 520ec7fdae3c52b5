from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from surfarch import arch, lattice, sim
from surfarch.sim import (FrameSimulator, PauliFrame, inject_cnot_intrinsic, inject_idle,
                          per_cycle_rate, propagate_cnot, propagate_hadamard, run_shot)
from surfarch.twirl import DampingParams, pta_channel


def setup(d=3, name="textbook"):
    m = arch.preset(name)
    lay = lattice.build_layout(d)
    return lay, lattice.build_schedule(lay, m), m


def quiet_model(name="textbook"):
    return arch.preset(name).replace(p_intr=0.0, p_qsp=0.0, p_meas=0.0)


def frame(**paulis):
    f = PauliFrame.zeros(2)
    for q, p in paulis.items():
        f.apply(int(q[1:]), p)
    return f


def test_cnot_propagation():
    f = propagate_cnot(frame(q0="X"), 0, 1)
    assert (f.label(0), f.label(1)) == ("X", "X")
    f = propagate_cnot(frame(q1="Z"), 0, 1)
    assert (f.label(0), f.label(1)) == ("Z", "Z")
    f = propagate_cnot(frame(q1="X"), 0, 1)
    assert (f.label(0), f.label(1)) == ("I", "X")
    f = propagate_cnot(frame(q0="Y"), 0, 1)
    assert (f.label(0), f.label(1)) == ("Y", "X")
    with pytest.raises(ValueError):
        propagate_cnot(frame(), 1, 1)


def test_cnot_is_involution():
    rng = np.random.default_rng(1)
    f = PauliFrame(rng.random(2) < 0.5, rng.random(2) < 0.5)
    g = propagate_cnot(propagate_cnot(f, 0, 1), 0, 1)
    assert (g.x_bits == f.x_bits).all() and (g.z_bits == f.z_bits).all()


def test_hadamard():
    for before, after in (("X", "Z"), ("Z", "X"), ("Y", "Y"), ("I", "I")):
        f = PauliFrame.zeros(1)
        if before != "I":
            f.apply(0, before)
        assert propagate_hadamard(f, 0).label(0) == after


def test_idle_zero_duration():
    f = inject_idle(frame(q0="X"), 1, 0.0, 1e-6, 1e-6, np.random.default_rng(0))
    assert (f.label(0), f.label(1)) == ("X", "I")


def five_sigma(count, n, p):
    return abs(count - n * p) <= 5 * math.sqrt(n * p * (1 - p)) + 1


def test_idle_frequencies():
    rng = np.random.default_rng(7)
    dt, T1, T2 = 2e-6, 5e-6, 8e-6
    ch = pta_channel(DampingParams(dt, T1, T2))
    n = 100_000
    counts = {"I": 0, "X": 0, "Y": 0, "Z": 0}
    for _ in range(n):
        counts[inject_idle(PauliFrame.zeros(1), 0, dt, T1, T2, rng).label(0)] += 1
    for lab, p in zip("XYZ", ch.as_tuple()):
        assert five_sigma(counts[lab], n, p)


def test_batched_pauli_noise_frequencies():
    rng = np.random.default_rng(11)
    probs = pta_channel(DampingParams(2e-6, 5e-6, 8e-6)).as_tuple()
    n = 1_000_000
    x = np.zeros((1, n), dtype=bool)
    z = np.zeros_like(x)
    sim._apply_pauli_noise(x, z, sim.NoiseOp(np.array([0]), probs), rng)
    got = [(x & ~z).sum(), (x & z).sum(), (~x & z).sum()]
    for c, p in zip(got, probs):
        assert five_sigma(int(c), n, p)


def test_symmetric_channel_counts_indistinguishable():
    rng = np.random.default_rng(3)
    probs = pta_channel(DampingParams(1e-6, 4e-6, 4e-6)).as_tuple()
    n = 1_000_000
    x = np.zeros((1, n), dtype=bool)
    z = np.zeros_like(x)
    sim._apply_pauli_noise(x, z, sim.NoiseOp(np.array([0]), probs), rng)
    got = [(x & ~z).sum(), (x & z).sum(), (~x & z).sum()]
    assert stats.chisquare(got).pvalue > 1e-3


def test_intrinsic_noop():
    f = inject_cnot_intrinsic(PauliFrame.zeros(2), 0, 1, 0.0, np.random.default_rng(0))
    assert not f.x_bits.any() and not f.z_bits.any()


def test_intrinsic_marginal_and_labels():
    rng = np.random.default_rng(5)
    n, p = 1_000_000, 0.05
    x = np.zeros((2, n), dtype=bool)
    z = np.zeros_like(x)
    sim._apply_intrinsic(x, z, np.array([0]), np.array([1]), p, rng)
    for q in (0, 1):
        assert five_sigma(int(x[q].sum()), n, 8 * p / 15)
    code = (x[0] + 2 * z[0]) * 4 + (x[1] + 2 * z[1])
    counts = np.bincount(code.astype(int), minlength=16)
    for k in range(1, 16):
        assert five_sigma(int(counts[k]), n, p / 15)


def test_intrinsic_single_frame_frequency():
    rng = np.random.default_rng(9)
    n, p = 60_000, 0.3
    flips = sum(bool(inject_cnot_intrinsic(PauliFrame.zeros(2), 0, 1, p, rng).x_bits[1])
                for _ in range(n))
    assert five_sigma(flips, n, 8 * p / 15)


def test_zero_noise_shot():
    lay, sched, _ = setup(3)
    rec = run_shot(lay, sched, quiet_model(), 5, seed=1, T1=None)
    assert rec.detection_events == frozenset()
    assert not rec.final_residual.x_bits.any() and not rec.final_residual.z_bits.any()
    assert rec.syndrome_history.shape == (6, 12)


def bulk_data(lay):
    centre = (lay.d - 1, lay.d - 1)
    return lay.data_coords.index(centre)


def test_forced_data_x_fires_two_adjacent_z_syndromes():
    lay, sched, m = setup(3)
    q = bulk_data(lay)
    rec = run_shot(lay, sched, m, 3, faults=[(1, 0, q, "X")], noiseless=True)
    ev = sorted(rec.detection_events)
    assert len(ev) == 2
    assert all(s >= lay.n_x and r == 1 for s, r in ev)
    r, c = lay.data_coords[q]
    coords = {lay.z_coords[s - lay.n_x] for s, _ in ev}
    assert coords == {(r, c - 1), (r, c + 1)}
    assert rec.final_residual.label(q) == "X"


def test_forced_measurement_error_is_timelike():
    lay, sched, m = setup(3)
    synd = lay.n_data + 2
    rec = run_shot(lay, sched, m, 4, faults=[(1, 0, synd, "M")], noiseless=True)
    assert rec.detection_events == frozenset({(2, 1), (2, 2)})


def test_forced_faults_compose_linearly():
    lay, sched, m = setup(5)
    faults = [(0, 2, lay.n_data + 3, "X"), (2, 0, bulk_data(lay), "Y"),
              (1, 4, 7, "Z"), (2, 0, lay.n_data + lay.n_x + 1, "M")]
    single = [run_shot(lay, sched, m, 4, faults=[f], noiseless=True).detection_events
              for f in faults]
    both = run_shot(lay, sched, m, 4, faults=faults, noiseless=True).detection_events
    acc = frozenset()
    for s in single:
        acc = acc ^ s
    assert both == acc


def test_ancilla_fault_mid_sequence_spreads():
    lay, sched, m = setup(3)
    # X on an X syndrome after the west CNOT propagates to its east and south data
    i = next(i for i in range(lay.n_x) if len(lay.support("X", i)) == 4)
    rec = run_shot(lay, sched, m, 2, faults=[(0, 2, lay.n_data + i, "X")], noiseless=True)
    nb = lay.x_neighbors[i]
    flipped = set(np.nonzero(rec.final_residual.x_bits)[0])
    assert flipped == {int(nb[2]), int(nb[3])}


def test_single_data_error_parity_with_boundary():
    lay, sched, m = setup(3)
    for q in range(lay.n_data):
        rec = run_shot(lay, sched, m, 2, faults=[(0, 0, q, "X")], noiseless=True)
        n = len(rec.detection_events)
        r, c = lay.data_coords[q]
        on_edge = c in (0, 2 * lay.d - 2)
        assert n == (1 if on_edge else 2)


def test_shot_determinism():
    lay, sched, m = setup(3)
    a = run_shot(lay, sched, m, 6, seed=42, T1=2e-6)
    b = run_shot(lay, sched, m, 6, seed=42, T1=2e-6)
    assert a.detection_events == b.detection_events
    assert (a.syndrome_history == b.syndrome_history).all()
    c = run_shot(lay, sched, m, 6, seed=43, T1=2e-6)
    assert (c.syndrome_history != a.syndrome_history).any() or c.detection_events != a.detection_events


def test_detection_events_are_parity_changes():
    lay, sched, m = setup(3)
    rec = run_shot(lay, sched, m, 8, seed=5, T1=2e-6)
    h = rec.syndrome_history
    for s, r in rec.detection_events:
        prev = h[r - 1, s] if r > 0 else False
        assert h[r, s] != prev


def test_noisy_run_requires_rng():
    lay, sched, m = setup(3)
    with pytest.raises(ValueError):
        FrameSimulator(lay, sched, m, 1e-5).run(4, 2)
    with pytest.raises(ValueError):
        FrameSimulator(lay, sched, m, 1e-5).run(4, 0, np.random.default_rng(0))


def test_per_cycle_rate_inversion():
    p = 0.013
    for n in (1, 3, 10, 50):
        P = (1 - (1 - 2 * p) ** n) / 2
        shots = 10**9
        rate, err = per_cycle_rate(round(P * shots), shots, n)
        assert rate == pytest.approx(p, rel=1e-6)
        assert err > 0
    assert per_cycle_rate(0, 100, 5) == (0.0, 0.0)
    assert per_cycle_rate(50, 100, 5)[0] == 0.5


def test_rate_point_rejects_excess_failures():
    with pytest.raises(ValueError):
        sim.RatePoint("textbook", 1e-6, 3, 10, 3, 11, 0)


def test_zero_noise_estimate():
    lay, sched, _ = setup(3)
    r = sim.estimate(lay, sched, quiet_model(), None, 2000, 3)
    assert r.logical_x_failures == r.logical_z_failures == 0
    assert r.p_xl_per_cycle == r.p_zl_per_cycle == 0.0


def test_estimate_independent_of_threads():
    lay, sched, m = setup(3)
    a = sim.estimate(lay, sched, m, 3e-6, 5000, 3, seed=9, batch_size=1000, threads=1)
    b = sim.estimate(lay, sched, m, 3e-6, 5000, 3, seed=9, batch_size=1000, threads=3)
    assert (a.logical_x_failures, a.logical_z_failures) == (b.logical_x_failures, b.logical_z_failures)


def test_larger_code_helps_above_threshold():
    m = arch.preset("textbook")
    rates = {}
    for d in (3, 5):
        lay = lattice.build_layout(d)
        rates[d] = sim.estimate(lay, lattice.build_schedule(lay, m), m, 10e-6, 20_000)
    assert rates[5].p_xl_per_cycle < rates[3].p_xl_per_cycle
    assert rates[5].p_zl_per_cycle < rates[3].p_zl_per_cycle

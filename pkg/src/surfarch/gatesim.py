"""Two-qutrit CZ gate under amplitude and phase damping.

Units: frequencies in GHz, times in ns.  Hamiltonians are built in angular
units (rad/ns), i.e. every frequency is multiplied by 2*pi.

Qutrit 1 is flux-tuned from ``omega1_0`` down to a hold frequency near the
|11> <-> |20> avoided crossing (``omega1 = omega2 + eta``) and back.  One full
Rabi cycle through |20> returns the population to |11> with a pi phase,
which is the controlled-Z.

The coupling is never switched off, so gate errors and leakage are read in
the dressed basis, the eigenstates of the Hamiltonian at the idle point.
Reading them in the bare product basis would count the static hybridisation
as leakage.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import optimize, special

TWO_PI = 2.0 * math.pi

Y3 = np.array([[0, -1j, 0], [1j, 0, -1j * math.sqrt(2)], [0, 1j * math.sqrt(2), 0]])
N3 = np.diag([0.0, 1.0, 2.0])
I3 = np.eye(3)

# basis index of |ab> is 3a + b (qutrit 1 first)
COMPUTATIONAL = (0, 1, 3, 4)
LEAKED = tuple(i for i in range(9) if i not in COMPUTATIONAL)
KET11 = 4

MAX_DT = 0.005  # ns; halving it changes leakage by < 1e-6 relative


@dataclass(frozen=True)
class QutritPairParams:
    omega1_0: float = 8.0
    omega2: float = 6.0
    eta: float = 0.3
    g: float = 0.055

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("anharmonicity must be positive")
        if not self.g > 0:
            raise ValueError("coupling must be positive")
        if not self.omega1_0 > self.omega2:
            raise ValueError("qubit 1 must start above qubit 2")


def hamiltonian(params: QutritPairParams, omega1) -> np.ndarray:
    """H for one value (9x9) or an array of values (n, 9, 9) of omega1."""
    w1 = np.asarray(omega1, dtype=float)
    static = (
        params.omega2 * np.kron(I3, N3)
        - params.eta * (np.kron(np.diag([0, 0, 1.0]), I3) + np.kron(I3, np.diag([0, 0, 1.0])))
        + params.g * np.kron(Y3, Y3)
    )
    n1 = np.kron(N3, I3)
    return TWO_PI * (static + w1[..., None, None] * n1)


def crossing_frequency(params: QutritPairParams) -> float:
    """omega1 of the minimum |11>/|20> eigenvalue gap, found from the spectrum."""
    def gap(w1):
        e, v = np.linalg.eigh(hamiltonian(params, w1))
        pops = np.abs(v) ** 2
        a = int(np.argmax(pops[KET11]))
        rest = [k for k in range(9) if k != a]
        b = rest[int(np.argmax(pops[6, rest]))]  # |20>
        return abs(e[a] - e[b])

    guess = params.omega2 + params.eta
    res = optimize.minimize_scalar(gap, bounds=(guess - 5 * params.g, guess + 5 * params.g),
                                   method="bounded", options={"xatol": 1e-10})
    return float(res.x)


@dataclass(frozen=True)
class PulseShape:
    """Symmetric erf ramp-hold-ramp on omega1.

    Each ramp is an erf step of width ``ramp_width`` centred ``ramp_center``
    from its end of the pulse.  The shape is rescaled so that omega1 equals
    ``omega_0`` exactly at both endpoints and ``omega_hold`` at mid-pulse.
    """

    t_total: float
    ramp_width: float
    ramp_center: float
    omega_hold: float
    omega_0: float

    def __post_init__(self):
        if not self.t_total > 0 or not self.ramp_width > 0:
            raise ValueError("pulse duration and ramp width must be positive")
        if not 0 <= self.ramp_center < 0.5 * self.t_total:
            raise ValueError("ramp centre must lie in the first half of the pulse")

    def _raw(self, t):
        c, w = self.ramp_center, self.ramp_width
        return 0.5 * (special.erf((t - c) / w) + special.erf((self.t_total - c - t) / w))

    def omega(self, t):
        t = np.asarray(t, dtype=float)
        lo = self._raw(0.0)
        hi = self._raw(0.5 * self.t_total)
        s = (self._raw(t) - lo) / (hi - lo)
        return self.omega_0 + (self.omega_hold - self.omega_0) * s


def n_steps_for(t_total: float, dt: float = MAX_DT) -> int:
    return max(1, int(math.ceil(t_total / dt - 1e-9)))


_GAUSS = 0.5 * np.array([1.0 - 1.0 / math.sqrt(3.0), 1.0 + 1.0 / math.sqrt(3.0)])


def step_unitaries(params: QutritPairParams, pulse: PulseShape, n_steps: int) -> np.ndarray:
    """Propagators for each of ``n_steps`` equal slices.

    Fourth-order Magnus step from the two Gauss-Legendre nodes of each slice:
    ``U = exp(-i K)`` with ``K = dt/2 (H1 + H2) - i sqrt(3) dt^2 / 12 [H2, H1]``,
    which is Hermitian, so one eigendecomposition per slice suffices.
    """
    dt = pulse.t_total / n_steps
    start = np.arange(n_steps) * dt
    h1 = hamiltonian(params, pulse.omega(start + _GAUSS[0] * dt))
    h2 = hamiltonian(params, pulse.omega(start + _GAUSS[1] * dt))
    k = 0.5 * dt * (h1 + h2) - 1j * (math.sqrt(3.0) * dt * dt / 12.0) * (h2 @ h1 - h1 @ h2)
    e, v = np.linalg.eigh(k)
    return np.einsum("nij,nj,nkj->nik", v, np.exp(-1j * e), v.conj())


def _chain_product(us: np.ndarray) -> np.ndarray:
    # time-ordered product U_{n-1} ... U_1 U_0 by pairwise reduction
    while len(us) > 1:
        if len(us) % 2:
            us = np.concatenate([us, np.eye(us.shape[-1])[None]])
        us = us[1::2] @ us[0::2]
    return us[0]


def propagator(params: QutritPairParams, pulse: PulseShape, n_steps: int | None = None) -> np.ndarray:
    n = n_steps or n_steps_for(pulse.t_total)
    return _chain_product(step_unitaries(params, pulse, n))


@lru_cache(maxsize=64)
def _dressed(params: QutritPairParams, omega1: float) -> np.ndarray:
    e, v = np.linalg.eigh(hamiltonian(params, omega1))
    # label each eigenvector by the bare state it overlaps most
    rows, cols = optimize.linear_sum_assignment(-np.abs(v))
    out = np.empty_like(v)
    out[:, rows] = v[:, cols]
    ph = np.diag(out) / np.abs(np.diag(out))
    out = out / ph[None, :]
    out.flags.writeable = False
    return out


def dressed_basis(params: QutritPairParams, omega1: float | None = None) -> np.ndarray:
    """Columns are eigenvectors of H(omega1) (default: the idle frequency),
    ordered and phased to match the bare labels |ab>.

    With the coupling always on, these dressed states are the computational
    states at the start and end of every pulse.
    """
    return _dressed(params, float(params.omega1_0 if omega1 is None else omega1))


def gate_unitary(params: QutritPairParams, pulse: PulseShape, n_steps: int | None = None) -> np.ndarray:
    """Propagator expressed in the dressed basis at ``pulse.omega_0``."""
    v = dressed_basis(params, pulse.omega_0)
    return v.conj().T @ propagator(params, pulse, n_steps) @ v


# -- decoherence --------------------------------------------------------------

@dataclass(frozen=True)
class QutritKrausParams:
    lam: float
    lam_prime: float
    dt: float

    def __post_init__(self):
        for name in ("lam", "lam_prime"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    @classmethod
    def from_times(cls, dt: float, T1: float, T2: float) -> "QutritKrausParams":
        if dt < 0 or not T1 > 0 or not T2 > 0:
            raise ValueError("need dt >= 0 and positive T1, T2")
        if T2 > 2 * T1 * (1 + 1e-12):
            raise ValueError("T2 > 2*T1 gives a negative dephasing rate")
        lam = -math.expm1(-dt / T1)
        lam_p = -math.expm1(-dt * max(2.0 / T2 - 1.0 / T1, 0.0))
        return cls(lam, lam_p, dt)


def qutrit_kraus(lam: float, lam_prime: float) -> list[np.ndarray]:
    """Six operators: phase damping after amplitude damping, both levels alike."""
    s, sp = math.sqrt(1 - lam), math.sqrt(1 - lam_prime)
    ad = [
        np.diag([1.0, s, s]),
        np.array([[0, math.sqrt(lam), 0], [0, 0, 0], [0, 0, 0]]),
        np.array([[0, 0, math.sqrt(lam)], [0, 0, 0], [0, 0, 0]]),
    ]
    pd = [np.diag([1.0, sp, sp]), np.diag([0.0, math.sqrt(lam_prime), math.sqrt(lam_prime)])]
    return [p @ a for p in pd for a in ad]


def two_qutrit_kraus(k: QutritKrausParams) -> list[np.ndarray]:
    one = qutrit_kraus(k.lam, k.lam_prime)
    return [np.kron(a, b) for a in one for b in one]


def _qutrit_superop(k: QutritKrausParams) -> np.ndarray:
    # S[a, a', c, c'] so that rho'[a, a'] = sum S[a, a', c, c'] rho[c, c']
    ops = qutrit_kraus(k.lam, k.lam_prime)
    return sum(np.einsum("ac,bd->abcd", e, e.conj()) for e in ops)


def _apply_local(s: np.ndarray, rho: np.ndarray) -> np.ndarray:
    r = rho.reshape(3, 3, 3, 3)  # (a, b, a', b')
    r = np.einsum("xycd,cbde->xbye", s, r)  # qutrit 1: indices a, a'
    r = np.einsum("xycd,acbd->axby", s, r)  # qutrit 2: indices b, b'
    return r.reshape(9, 9)


def _check_density(rho: np.ndarray, dim: int = 9, tol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (dim, dim):
        raise ValueError(f"density matrix must be {dim}x{dim}")
    if abs(np.trace(rho) - 1) > tol or not np.allclose(rho, rho.conj().T, atol=tol):
        raise ValueError("input is not a unit-trace Hermitian matrix")
    if np.linalg.eigvalsh(rho)[0] < -tol:
        raise ValueError("input is not positive semidefinite")
    return rho


@dataclass(frozen=True)
class Evolution:
    rho: np.ndarray
    max_trace_error: float
    min_eigenvalue: float


def evolve_detailed(params, pulse, T1, T2, rho0, n_steps=None, monitor_every=100) -> Evolution:
    """Strang-split evolution: half damping step, then alternating unitary
    slices and full damping steps, closing with a half damping step.

    ``T1=None`` switches decoherence off.  Trace and positivity are sampled
    every ``monitor_every`` slices.
    """
    rho = _check_density(rho0)
    n = n_steps or n_steps_for(pulse.t_total)
    us = step_unitaries(params, pulse, n)
    dt = pulse.t_total / n
    if T1 is None:
        full = half = None
    else:
        T2 = T1 if T2 is None else T2
        full = _qutrit_superop(QutritKrausParams.from_times(dt, T1, T2))
        half = _qutrit_superop(QutritKrausParams.from_times(dt / 2, T1, T2))
    worst_tr, worst_eig = 0.0, 1.0
    if half is not None:
        rho = _apply_local(half, rho)
    for i, u in enumerate(us):
        rho = u @ rho @ u.conj().T
        if full is not None:
            rho = _apply_local(half if i == n - 1 else full, rho)
        if i % monitor_every == 0 or i == n - 1:
            worst_tr = max(worst_tr, abs(np.trace(rho).real - 1.0))
            worst_eig = min(worst_eig, float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]))
    return Evolution(rho, worst_tr, worst_eig)


def evolve(params, pulse, T1, T2, rho0, n_steps=None) -> np.ndarray:
    out = evolve_detailed(params, pulse, T1, T2, rho0, n_steps)
    if out.max_trace_error > 1e-9:
        raise ArithmeticError(f"trace drifted by {out.max_trace_error:.2e}")
    return out.rho


# -- gate metrics -------------------------------------------------------------

def cz_fidelity(u: np.ndarray) -> float:
    """Average gate fidelity of ``u`` to CZ, after removing local Z phases.

    The single-qubit phases are fixed from the |00>, |01> and |10> diagonal
    entries; leaked amplitude counts as infidelity.
    """
    m = u[np.ix_(COMPUTATIONAL, COMPUTATIONAL)]
    ph = np.angle(np.diag(m))
    target = np.exp(1j * np.array([ph[0], ph[1], ph[2], ph[1] + ph[2] - ph[0] + math.pi]))
    overlap = np.vdot(target, np.diag(m))  # tr(V^dag M) for diagonal V
    d = 4
    return float((abs(overlap) ** 2 + np.trace(m.conj().T @ m).real) / (d * (d + 1)))


def conditional_phase(u: np.ndarray) -> float:
    ph = np.angle(np.diag(u)[list(COMPUTATIONAL)])
    return float((ph[3] - ph[1] - ph[2] + ph[0]) % (2 * math.pi))


@dataclass(frozen=True)
class LeakageResult:
    leakage: float  # population outside the computational subspace
    loss_11: float  # 1 - <11|rho|11>, includes ordinary T1 decay
    max_trace_error: float
    min_eigenvalue: float


def cz_leakage(params, pulse, T1, T2, n_steps=None) -> LeakageResult:
    """Start in dressed |11>, evolve, and read populations in the dressed basis."""
    v = dressed_basis(params, pulse.omega_0)
    rho0 = np.outer(v[:, KET11], v[:, KET11].conj())
    out = evolve_detailed(params, pulse, T1, T2, rho0, n_steps)
    pops = np.diag(v.conj().T @ out.rho @ v).real
    return LeakageResult(
        leakage=float(pops[list(LEAKED)].sum()),
        loss_11=float(1.0 - pops[KET11]),
        max_trace_error=out.max_trace_error,
        min_eigenvalue=out.min_eigenvalue,
    )


def cz_residuals(u: np.ndarray) -> np.ndarray:
    """Leaked amplitudes out of |11> (real and imaginary parts) and the
    conditional-phase error; all vanish for an exact CZ on |11>."""
    a = u[list(LEAKED), KET11]
    return np.concatenate([a.real, a.imag, [math.sin(0.5 * (conditional_phase(u) - math.pi))]])


@dataclass(frozen=True)
class PulseOptimum:
    pulse: PulseShape
    residual: float  # squared norm of cz_residuals, decoherence off
    infidelity: float  # decoherence-free 1 - average CZ fidelity
    leakage_coherent: float
    leakage: float  # with damping when T1 is given, else equal to leakage_coherent
    converged: bool


SEARCH_STEPS_PER_NS = 20
POLISH_STEPS_PER_NS = 50


def pulse_from_vector(params: QutritPairParams, t_total: float, x, w_cross=None) -> PulseShape:
    """``x = (hold detuning from the crossing, ramp width, kappa)``.

    The ramp centre is ``ramp_width * (1 + kappa)`` with ``kappa`` in [0, 1],
    so the pulse leaves ``omega_0`` immediately and has no idle lead-in.
    """
    w_x = crossing_frequency(params) if w_cross is None else w_cross
    d, w, k = (float(v) for v in x)
    return PulseShape(t_total, w, w * (1 + k), w_x + d, params.omega1_0)


def optimize_pulse(params: QutritPairParams, t_total: float, T1=None, T2=None,
                   n_steps=None, starts=()) -> PulseOptimum:
    """Pick the hold frequency and ramp shape at fixed ``t_total``.

    Without decoherence the pulse is chosen to send |11> back to itself with
    a conditional phase of pi, i.e. minimal leakage out of |11> under the CZ
    constraint.  Search: a coarse grid at a coarse time step, bounded least
    squares from the best grid points (plus any ``starts``), then a polish at
    a finer step.  Leakage is re-evaluated with damping when ``T1`` is given.
    """
    if not 5.0 <= t_total <= 50.0:
        raise ValueError("t_total must lie in the [5, 50] ns scan window")
    n = n_steps or n_steps_for(t_total)
    w_x = crossing_frequency(params)
    lo = np.array([-0.25, 0.05, 0.0])
    hi = np.array([0.15, t_total / 8, 1.0])

    def resid_at(steps):
        n_s = int(math.ceil(t_total * steps))
        return lambda x: cz_residuals(gate_unitary(params, pulse_from_vector(params, t_total, x, w_x), n_s))

    def fit(fun, x0, nfev):
        x0 = np.clip(np.asarray(x0, dtype=float), lo + 1e-9, hi - 1e-9)
        return optimize.least_squares(fun, x0, bounds=(lo, hi), xtol=1e-12,
                                      ftol=1e-15, gtol=1e-15, max_nfev=nfev)

    coarse = resid_at(SEARCH_STEPS_PER_NS)
    grid = [(d, w, k)
            for d in np.linspace(-0.15, 0.05, 9)
            for w in np.linspace(0.1, t_total / 8 - 0.02, 14)
            for k in np.linspace(0.0, 1.0, 5)]
    scored = sorted((float(np.sum(coarse(x) ** 2)), i) for i, x in enumerate(grid))
    seeds = list(starts) + [grid[i] for _, i in scored[:6]]
    best = None
    for x0 in seeds:
        sol = fit(coarse, x0, 200)
        if best is None or sol.cost < best.cost:
            best = sol
    sol = fit(resid_at(POLISH_STEPS_PER_NS), best.x, 60)
    pulse = pulse_from_vector(params, t_total, sol.x, w_x)
    u = gate_unitary(params, pulse, n)
    res = float(np.sum(cz_residuals(u) ** 2))
    coh = float(np.sum(np.abs(u[list(LEAKED), KET11]) ** 2))
    leak = cz_leakage(params, pulse, T1, T2, n).leakage if T1 is not None else coh
    return PulseOptimum(pulse, res, 1.0 - cz_fidelity(u), coh, leak, res < 1e-8)


def landau_zener_error(g: float, epsilon_dot: float) -> float:
    """``1 - P_LZ`` for a sweep meant to cross a level pair diabatically.

    ``P_LZ = exp(-2 pi g^2 / epsilon_dot)`` is the diabatic passage
    probability, so the error is the population that follows the avoided
    crossing adiabatically; it vanishes as ``g -> 0`` and tends to 1 for
    strong coupling.  ``g`` in GHz and ``epsilon_dot`` in GHz/ns are ordinary
    frequencies, converted to angular units before use:
    ``1 - exp(-2 pi (2 pi g)^2 / (2 pi epsilon_dot))``.
    """
    if not g > 0 or not epsilon_dot > 0:
        raise ValueError("g and epsilon_dot must be positive")
    wg = TWO_PI * g
    return float(-math.expm1(-TWO_PI * wg * wg / (TWO_PI * epsilon_dot)))


@dataclass(frozen=True)
class SweepRow:
    g_MHz: float
    t_total_ns: float
    leakage: float
    loss_11: float
    infidelity: float
    residual: float
    max_trace_error: float


def _sweep_one(base, g, t_totals, T1, T2):
    p = replace(base, g=g)
    rows, prev = [], None
    for t in t_totals:
        # continuation: rescaled optimum of the previous duration is an extra start
        starts = [] if prev is None else [(prev[0], prev[1] * t / prev[3], prev[2])]
        opt = optimize_pulse(p, t, starts=starts)
        pl = opt.pulse
        prev = (pl.omega_hold - crossing_frequency(p), pl.ramp_width,
                pl.ramp_center / pl.ramp_width - 1.0, t)
        res = cz_leakage(p, pl, T1, T2)
        rows.append(SweepRow(g * 1e3, t, res.leakage, res.loss_11, opt.infidelity,
                             opt.residual, res.max_trace_error))
    return rows


def sweep(g_values_GHz, t_totals_ns, T1=10_000.0, T2=10_000.0, base=None, workers=1) -> list[SweepRow]:
    """Optimized-pulse leakage out of |11> for each coupling and gate time.

    T1 and T2 are in ns.  Durations are processed in the given order for
    each coupling; couplings are independent and may run concurrently.
    """
    base = base or QutritPairParams()
    t_totals = [float(t) for t in t_totals_ns]
    if workers > 1 and len(g_values_GHz) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda g: _sweep_one(base, g, t_totals, T1, T2), g_values_GHz))
    else:
        parts = [_sweep_one(base, g, t_totals, T1, T2) for g in g_values_GHz]
    return [r for part in parts for r in part]


@dataclass(frozen=True)
class CurveMinimum:
    t_total_ns: float
    leakage: float
    interior: bool


def curve_minimum(rows) -> CurveMinimum:
    ts = [r.t_total_ns for r in rows]
    ls = [r.leakage for r in rows]
    i = int(np.argmin(ls))
    return CurveMinimum(ts[i], ls[i], 0 < i < len(ls) - 1)


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["g_MHz", "t_total_ns", "leakage"])
    for r in rows:
        w.writerow([f"{r.g_MHz:.6g}", f"{r.t_total_ns:.6g}", f"{r.leakage:.6e}"])
    return buf.getvalue()
